#include "swarmlfa/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "swarmlfa/errors.hpp"

namespace swarmlfa {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kModels{"sgd", "adam", "pretrain-only", "hpl", "dhpl"};

std::string format_name(Separator sep) {
    switch (sep) {
        case Separator::DoubleColon: return "::";
        case Separator::Tab: return "tab";
        case Separator::Comma: return "comma";
    }
    return "tab";
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

HdiMatrix read_canonical_file(const fs::path& path, std::size_t users, std::size_t items) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return read_canonical(in, users, items);
}

RunReport failed_report(const std::string& name, const std::string& why) {
    RunReport r;
    r.model_name = name;
    r.failed = true;
    r.failure = why;
    return r;
}

ComparisonTable single_model_table(const RunReport& r) {
    ComparisonTable t;
    t.reference_model = r.model_name;
    t.datasets = {r.dataset_name};
    t.models = {r.model_name};
    t.cells.push_back({r.dataset_name, r.model_name, r.test_rmse, r.test_mae, r.seconds, 1.0, r.failed, 1.0});
    t.summary.push_back({r.model_name, 1.0, std::nullopt, std::nullopt});
    return t;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (models.empty()) throw ConfigError("run.models is empty");
    for (const std::string& m : models) {
        if (!kModels.contains(m)) throw ConfigError("unknown model '" + m + "'");
    }
    if (metric != "rmse" && metric != "mae" && metric != "both") {
        throw ConfigError("run.metric must be rmse, mae or both");
    }
    if (f == 0) throw ConfigError("model.f must be >= 1");
    if (!(init_scale > 0.0)) throw ConfigError("model.init_scale must be > 0");
    sgd.validate();
    adam.validate();
    const bool refines = std::ranges::any_of(models, [](const std::string& m) { return m == "hpl" || m == "dhpl"; });
    if (refines) {
        refine.validate();
        hpl_baseline(refine).validate();
    }
}

KeyValues ExperimentConfig::to_kv() const {
    KeyValues kv;
    kv.set("data.path", data_path);
    kv.set("data.format", format_name(format.separator));
    kv.set("data.columns", std::to_string(format.user_column) + "," + std::to_string(format.item_column) + "," +
                               std::to_string(format.rating_column));
    kv.set("data.name", dataset_name);
    kv.set("split.ratios", format_double(ratios[0]) + "," + format_double(ratios[1]) + "," + format_double(ratios[2]));
    kv.set("split.seed", std::to_string(split_seed));
    kv.set("model.f", std::to_string(f));
    kv.set("model.init_scale", format_double(init_scale));
    kv.set("model.seed", std::to_string(seed));
    kv.set("sgd.eta", format_double(sgd.eta));
    kv.set("sgd.lambda", format_double(sgd.lambda));
    kv.set("sgd.max_epochs", std::to_string(sgd.max_epochs));
    kv.set("sgd.convergence_tol", format_double(sgd.convergence_tol));
    kv.set("adam.alpha", format_double(adam.alpha));
    kv.set("adam.beta1", format_double(adam.beta1));
    kv.set("adam.beta2", format_double(adam.beta2));
    kv.set("adam.epsilon", format_double(adam.epsilon));
    kv.set("adam.lambda", format_double(adam.lambda));
    const KeyValues refine_kv = refine.to_kv();
    for (const auto& [k, v] : refine_kv.entries()) kv.set("refine." + k, v);
    std::string joined;
    for (const std::string& m : models) joined += (joined.empty() ? "" : ",") + m;
    kv.set("run.models", joined);
    kv.set("run.out", out_dir);
    kv.set("run.metric", metric);
    kv.set("run.threads", std::to_string(threads));
    kv.set("run.timing", timing ? "true" : "false");
    return kv;
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValues& kv) {
    const ExperimentConfig d;
    const KeyValues defaults = d.to_kv();
    for (const auto& [k, v] : kv.entries()) {
        if (!defaults.contains(k)) throw ConfigError("unknown config key '" + k + "'");
    }

    ExperimentConfig c;
    c.data_path = kv.get("data.path", d.data_path);
    c.format.separator = parse_separator(kv.get("data.format", std::string("::")));
    if (kv.contains("data.columns")) {
        const auto cols = kv.get_list("data.columns", {});
        if (cols.size() != 3 || std::ranges::any_of(cols, [](double x) { return x < 0 || x != std::floor(x); })) {
            throw ConfigError("data.columns must list three column positions: user,item,rating");
        }
        c.format.user_column = static_cast<std::size_t>(cols[0]);
        c.format.item_column = static_cast<std::size_t>(cols[1]);
        c.format.rating_column = static_cast<std::size_t>(cols[2]);
    }
    c.dataset_name = kv.get("data.name", d.dataset_name);
    const auto ratios = kv.get_list("split.ratios", {d.ratios[0], d.ratios[1], d.ratios[2]});
    if (ratios.size() != 3) throw ConfigError("split.ratios needs three values");
    c.ratios = {ratios[0], ratios[1], ratios[2]};
    c.split_seed = kv.get("split.seed", d.split_seed);
    c.f = kv.get_size("model.f", d.f);
    c.init_scale = kv.get("model.init_scale", d.init_scale);
    c.seed = kv.get("model.seed", d.seed);
    c.sgd.eta = kv.get("sgd.eta", d.sgd.eta);
    c.sgd.lambda = kv.get("sgd.lambda", d.sgd.lambda);
    c.sgd.max_epochs = kv.get_size("sgd.max_epochs", d.sgd.max_epochs);
    c.sgd.convergence_tol = kv.get("sgd.convergence_tol", d.sgd.convergence_tol);
    c.adam.alpha = kv.get("adam.alpha", d.adam.alpha);
    c.adam.beta1 = kv.get("adam.beta1", d.adam.beta1);
    c.adam.beta2 = kv.get("adam.beta2", d.adam.beta2);
    c.adam.epsilon = kv.get("adam.epsilon", d.adam.epsilon);
    c.adam.lambda = kv.get("adam.lambda", d.adam.lambda);
    c.refine = RefineConfig::from_kv(kv.section("refine"));
    c.models = kv.get_words("run.models", d.models);
    c.out_dir = kv.get("run.out", d.out_dir);
    c.metric = kv.get("run.metric", d.metric);
    c.threads = kv.get_size("run.threads", d.threads);
    c.timing = kv.get("run.timing", d.timing);
    return c;
}

RefineConfig hpl_baseline(const RefineConfig& dhpl) {
    RefineConfig c = dhpl;
    c.update_rule = UpdateRule::Standard;
    c.gamma3 = 0.0;
    c.schedule = dhpl.schedule.midpoint_constant();
    return c;
}

DataSplit load_experiment_data(const ExperimentConfig& config) {
    const fs::path path = config.data_path;
    if (path.empty()) throw InputError("no dataset given (data.path)");
    if (!fs::exists(path)) throw InputError("dataset not found: " + path.string());
    if (fs::is_directory(path)) {
        const KeyValues manifest = KeyValues::load((path / "manifest.txt").string());
        const std::size_t users = manifest.get_size("users", 0);
        const std::size_t items = manifest.get_size("items", 0);
        DataSplit split;
        split.seed = manifest.get("seed", std::uint64_t{0});
        split.train = read_canonical_file(path / "train.tsv", users, items);
        split.validation = read_canonical_file(path / "valid.tsv", users, items);
        split.test = read_canonical_file(path / "test.tsv", users, items);
        return split;
    }
    std::ifstream in(path);
    if (!in) throw InputError("cannot open dataset " + path.string());
    const ParsedRatings parsed = parse_ratings(in, config.format);
    return split(parsed.matrix, config.ratios, config.split_seed);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const DataSplit& data) {
    config.validate();
    if (data.train.empty()) throw InputError("training set is empty");

    const std::string dataset = !config.dataset_name.empty()
                                    ? config.dataset_name
                                    : (config.data_path.empty() ? std::string("dataset")
                                                                : fs::path(config.data_path).stem().string());
    const std::size_t users = data.train.user_count();
    const std::size_t items = data.train.item_count();
    const FactorModel initial = init_model(users, items, config.f, config.seed, config.init_scale);
    const std::string snapshot = config.to_kv().str();

    ExperimentResult result;
    const auto record = [&](RunReport report, const FactorModel* model) {
        report.dataset_name = dataset;
        report.config_snapshot = snapshot;
        if (model) result.models[report.model_name] = *model;
        result.reports.push_back(std::move(report));
    };
    const auto wants = [&](const char* m) { return std::ranges::find(config.models, m) != config.models.end(); };

    if (wants("sgd")) {
        try {
            const EpochFn epoch = [&](FactorModel& m, std::size_t n) {
                sgd_epoch(m, data.train, config.sgd, derive_seed(config.seed, {0x56d, n}));
            };
            TrainResult r = train_loop(initial, data, epoch,
                                       {config.sgd.max_epochs, config.sgd.convergence_tol, false}, "sgd");
            record(std::move(r.report), &r.model);
        } catch (const DivergenceError& e) {
            record(failed_report("sgd", e.what()), nullptr);
        }
    }
    if (wants("adam")) {
        try {
            AdamState state(initial);
            const EpochFn epoch = [&](FactorModel& m, std::size_t n) {
                adam_epoch(m, state, data.train, config.adam, derive_seed(config.seed, {0xada, n}));
            };
            TrainResult r = train_loop(initial, data, epoch,
                                       {config.sgd.max_epochs, config.sgd.convergence_tol, false}, "adam");
            record(std::move(r.report), &r.model);
        } catch (const DivergenceError& e) {
            record(failed_report("adam", e.what()), nullptr);
        }
    }

    const bool refines = wants("hpl") || wants("dhpl");
    if (!wants("pretrain-only") && !refines) {
        result.table = result.reports.size() == 1 ? single_model_table(result.reports.front())
                                                  : compare(result.reports, result.reports.front().model_name);
        return result;
    }

    std::optional<TrainResult> pre;
    try {
        pre = pretrain(initial, data, config.sgd, config.seed);
    } catch (const DivergenceError& e) {
        for (const char* m : {"pretrain-only", "hpl", "dhpl"}) {
            if (wants(m)) record(failed_report(m, e.what()), nullptr);
        }
    }
    if (pre && wants("pretrain-only")) {
        RunReport r = pre->report;
        r.model_name = "pretrain-only";
        record(std::move(r), &pre->model);
    }

    std::vector<FitnessKind> kinds;
    if (config.metric != "mae") kinds.push_back(FitnessKind::Rmse);
    if (config.metric != "rmse") kinds.push_back(FitnessKind::Mae);
    const bool suffix = kinds.size() > 1;
    for (const char* base : {"hpl", "dhpl"}) {
        if (!pre || !wants(base)) continue;
        for (FitnessKind kind : kinds) {
            const std::string name = std::string(base) + (suffix ? "-" + to_string(kind) : "");
            RefineConfig rc = std::string(base) == "hpl" ? hpl_baseline(config.refine) : config.refine;
            rc.fitness_kind = kind;
            try {
                RefineResult r = refine_model(pre->model, data, rc, {config.threads, false});
                r.report.model_name = name;
                r.report.seconds += pre->report.seconds;
                record(std::move(r.report), &r.model);
            } catch (const DivergenceError& e) {
                record(failed_report(name, e.what()), nullptr);
            }
        }
    }

    std::string reference = result.reports.front().model_name;
    for (const char* pick : {"dhpl", "dhpl-rmse"}) {
        if (std::ranges::any_of(result.reports, [&](const RunReport& r) { return r.model_name == pick; })) {
            reference = pick;
            break;
        }
    }
    result.table = result.reports.size() == 1 ? single_model_table(result.reports.front())
                                              : compare(result.reports, reference);
    return result;
}

void write_experiment(const ExperimentConfig& config, const ExperimentResult& result) {
    const fs::path dir = config.out_dir;
    fs::create_directories(dir);
    for (const RunReport& r : result.reports) {
        auto out = open_out(dir / ("history_" + r.model_name + ".csv"));
        write_history_csv(out, r, config.timing);
    }
    for (const auto& [name, model] : result.models) {
        auto out = open_out(dir / ("model_" + name + ".txt"));
        save_model(out, model);
    }
    {
        auto out = open_out(dir / "comparison.csv");
        write_comparison_csv(out, result.table, config.timing);
    }
    {
        auto out = open_out(dir / "summary.csv");
        write_summary_csv(out, result.table);
    }
    auto out = open_out(dir / "config.txt");
    config.to_kv().write(out);
}

double sample_std(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

SweepResult sweep_k(const ExperimentConfig& config, const DataSplit& data, const std::vector<std::size_t>& k_values) {
    if (k_values.empty()) throw ConfigError("K list is empty");
    for (std::size_t k : k_values) {
        if (k < 4) throw ConfigError("every K must be >= 4, got " + std::to_string(k));
    }
    config.sgd.validate();
    const FactorModel initial =
        init_model(data.train.user_count(), data.train.item_count(), config.f, config.seed, config.init_scale);
    const TrainResult pre = pretrain(initial, data, config.sgd, config.seed);
    const HdiMatrix& eval = data.test.empty() ? (data.validation.empty() ? data.train : data.validation) : data.test;

    SweepResult result;
    std::vector<double> rmses, maes;
    for (std::size_t k : k_values) {
        RefineConfig rc = config.refine;
        rc.K = k;
        if (config.metric == "mae") rc.fitness_kind = FitnessKind::Mae;
        Stopwatch clock;
        const RefineResult r = refine_model(pre.model, data, rc, {config.threads, false});
        const double seconds = clock.seconds();
        SweepRow row{k, rmse(r.model, eval), mae(r.model, eval), r.mean_iterations(), seconds};
        rmses.push_back(row.rmse);
        maes.push_back(row.mae);
        result.rows.push_back(row);
    }
    result.rmse_std = sample_std(rmses);
    result.mae_std = sample_std(maes);
    return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result, bool include_timing) {
    out << "k,rmse,mae,iterations,seconds\n";
    char buf[160];
    for (const SweepRow& r : result.rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.3f,%.6f\n", r.K, r.rmse, r.mae, r.iterations,
                      include_timing ? r.seconds : 0.0);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "std,%.6e,%.6e,,\n", result.rmse_std, result.mae_std);
    out << buf;
}

}  // namespace swarmlfa
