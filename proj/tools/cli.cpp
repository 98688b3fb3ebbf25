#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "swarmlfa/errors.hpp"
#include "swarmlfa/experiment.hpp"
#include "swarmlfa/factor_model.hpp"
#include "swarmlfa/hdi_data.hpp"
#include "swarmlfa/metrics.hpp"
#include "swarmlfa/synthetic.hpp"

namespace swarmlfa::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> threads;
    bool no_timing = false;
};

std::ifstream open_in(const std::string& path, const char* what) {
    if (!fs::exists(path)) throw InputError(std::string(what) + " not found: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(std::string("cannot open ") + what + " " + path);
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

/// "auto" sniffs the first non-blank line: "::", then tab, then comma.
Separator resolve_format(const std::string& name, const std::string& path) {
    if (name != "auto") return parse_separator(name);
    std::ifstream in = open_in(path, "input file");
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (line.find("::") != std::string::npos) return Separator::DoubleColon;
        if (line.find('\t') != std::string::npos) return Separator::Tab;
        return Separator::Comma;
    }
    return Separator::DoubleColon;
}

std::string format_name(Separator sep) {
    switch (sep) {
        case Separator::Tab: return "tab";
        case Separator::Comma: return "comma";
        case Separator::DoubleColon: break;
    }
    return "::";
}

std::array<double, 3> parse_ratios(const std::string& text) {
    const auto parts = split_list(text);
    if (parts.size() != 3) throw ConfigError("--ratios needs three comma-separated values");
    std::array<double, 3> r{};
    for (std::size_t i = 0; i < 3; ++i) {
        try {
            std::size_t used = 0;
            r[i] = std::stod(parts[i], &used);
            if (used != parts[i].size()) throw std::invalid_argument("trailing");
        } catch (const std::logic_error&) {
            throw ConfigError("--ratios: '" + parts[i] + "' is not a number");
        }
    }
    return r;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

ExperimentConfig load_config(const Globals& g) {
    ExperimentConfig c;
    if (!g.config.empty()) {
        if (!fs::exists(g.config)) throw InputError("config file not found: " + g.config);
        c = ExperimentConfig::from_kv(KeyValues::load(g.config));
    }
    if (g.seed) {
        c.seed = *g.seed;
        c.refine.seed = *g.seed;
    }
    if (!g.out.empty()) c.out_dir = g.out;
    if (g.threads) c.threads = *g.threads;
    if (g.no_timing) c.timing = false;
    return c;
}

struct IngestArgs {
    std::string input;
    std::string format = "auto";
    std::string ratios = "0.7,0.1,0.2";
    std::uint64_t seed = 42;
};

int cmd_ingest(const IngestArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    RatingFormat format;
    format.separator = resolve_format(a.format, a.input);
    std::ifstream in = open_in(a.input, "input file");
    const ParsedRatings parsed = parse_ratings(in, format);
    if (parsed.duplicates > 0) {
        err << "swarmlfa: warning: " << parsed.duplicates << " duplicate (user, item) lines, last rating kept\n";
    }
    const auto ratios = parse_ratios(a.ratios);
    const std::uint64_t seed = g.seed.value_or(a.seed);
    const DataSplit s = split(parsed.matrix, ratios, seed);

    const fs::path dir = g.out.empty() ? fs::path("ingested") : fs::path(g.out);
    fs::create_directories(dir);
    {
        auto f = open_out(dir / "train.tsv");
        write_ratings(f, s.train);
    }
    {
        auto f = open_out(dir / "valid.tsv");
        write_ratings(f, s.validation);
    }
    {
        auto f = open_out(dir / "test.tsv");
        write_ratings(f, s.test);
    }
    {
        auto f = open_out(dir / "user_ids.tsv");
        write_id_map(f, parsed.users);
    }
    {
        auto f = open_out(dir / "item_ids.tsv");
        write_id_map(f, parsed.items);
    }

    KeyValues manifest;
    manifest.set("seed", std::to_string(seed));
    manifest.set("ratios", format_double(ratios[0]) + "," + format_double(ratios[1]) + "," + format_double(ratios[2]));
    manifest.set("format", format_name(format.separator));
    manifest.set("lines", std::to_string(parsed.lines_read));
    manifest.set("duplicates", std::to_string(parsed.duplicates));
    manifest.set("users", std::to_string(parsed.matrix.user_count()));
    manifest.set("items", std::to_string(parsed.matrix.item_count()));
    manifest.set("entries", std::to_string(parsed.matrix.size()));
    manifest.set("density", format_double(parsed.matrix.density()));
    manifest.set("train", std::to_string(s.train.size()));
    manifest.set("valid", std::to_string(s.validation.size()));
    manifest.set("test", std::to_string(s.test.size()));
    auto f = open_out(dir / "manifest.txt");
    manifest.write(f);

    out << "users " << parsed.matrix.user_count() << " items " << parsed.matrix.item_count() << " entries "
        << parsed.matrix.size() << "\n"
        << "train " << s.train.size() << " valid " << s.validation.size() << " test " << s.test.size() << "\n";
    return Ok;
}

struct RunArgs {
    std::string data;
    std::string models;
    std::string metric;
};

ExperimentConfig run_config(const RunArgs& a, const Globals& g) {
    ExperimentConfig c = load_config(g);
    if (!a.data.empty()) c.data_path = a.data;
    if (!a.models.empty()) c.models = split_list(a.models);
    if (!a.metric.empty()) c.metric = a.metric;
    c.validate();
    return c;
}

int cmd_run(const RunArgs& a, const Globals& g, std::ostream& out) {
    const ExperimentConfig c = run_config(a, g);
    const DataSplit data = load_experiment_data(c);
    const ExperimentResult result = run_experiment(c, data);
    write_experiment(c, result);
    for (const ComparisonCell& cell : result.table.cells) {
        out << cell.model << " ";
        if (cell.failed) {
            out << "failed\n";
        } else {
            out << "rmse " << fixed6(cell.rmse) << " mae " << fixed6(cell.mae) << "\n";
        }
    }
    for (const RunReport& r : result.reports) {
        if (r.failed) out << r.model_name << ": " << r.failure << "\n";
    }
    return Ok;
}

int cmd_sweep(const RunArgs& a, const std::vector<std::size_t>& ks, const Globals& g, std::ostream& out) {
    RunArgs only = a;
    only.models = "dhpl";
    const ExperimentConfig c = run_config(only, g);
    const DataSplit data = load_experiment_data(c);
    const SweepResult result = sweep_k(c, data, ks);
    fs::create_directories(c.out_dir);
    auto f = open_out(fs::path(c.out_dir) / "sweep_k.csv");
    write_sweep_csv(f, result, c.timing);
    write_sweep_csv(out, result, c.timing);
    return Ok;
}

struct SweepArgs {
    std::string key;
    std::vector<std::string> values;
};

/// One run per value of an arbitrary config key, e.g. refine.lambda or refine.M.
int cmd_param_sweep(const RunArgs& a, const SweepArgs& s, const Globals& g, std::ostream& out) {
    const ExperimentConfig base = run_config(a, g);
    const DataSplit data = load_experiment_data(base);
    std::ostringstream csv;
    csv << "value,model,rmse,mae,seconds\n";
    for (const std::string& value : s.values) {
        KeyValues kv = base.to_kv();
        kv.set(s.key, value);
        const ExperimentConfig c = ExperimentConfig::from_kv(kv);
        const ExperimentResult result = run_experiment(c, data);
        for (const RunReport& r : result.reports) {
            csv << value << ',' << r.model_name << ',';
            if (r.failed) {
                csv << "failed,failed,";
            } else {
                csv << fixed6(r.test_rmse) << ',' << fixed6(r.test_mae) << ',';
            }
            csv << fixed6(base.timing ? r.seconds : 0.0) << '\n';
        }
    }
    fs::create_directories(base.out_dir);
    auto f = open_out(fs::path(base.out_dir) / ("sweep_" + s.key + ".csv"));
    f << csv.str();
    out << csv.str();
    return Ok;
}

struct EvalArgs {
    std::string model;
    std::string data;
    std::string csv;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    std::ifstream snap = open_in(a.model, "model snapshot");
    const FactorModel model = load_model(snap);
    std::ifstream in = open_in(a.data, "evaluation file");
    const HdiMatrix data = read_canonical(in);
    model.check_compatible(data);
    const double r = rmse(model, data);
    const double m = mae(model, data);
    out << "rmse " << fixed6(r) << "\n"
        << "mae " << fixed6(m) << "\n";
    if (!a.csv.empty()) {
        auto f = open_out(a.csv);
        f << "rmse,mae,entries\n" << fixed6(r) << "," << fixed6(m) << "," << data.size() << "\n";
    }
    return Ok;
}

int cmd_gen(const SynthSpec& spec, const std::string& format, const Globals& g, std::ostream& out) {
    SynthSpec s = spec;
    if (g.seed) s.seed = *g.seed;
    const HdiMatrix m = generate_synthetic(s);
    const std::string path = g.out.empty() ? "synthetic.tsv" : g.out;
    auto f = open_out(path);
    write_ratings(f, m, parse_separator(format));
    out << "wrote " << m.size() << " ratings (" << s.users << "x" << s.items << ") to " << path << "\n";
    return Ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Swarm-refined latent factor analysis on sparse rating matrices", "swarmlfa"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "key=value experiment config");
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out", g.out, "output directory (or file for gen-synth)");
    app.add_option("--threads", g.threads, "refinement workers, 0 = hardware concurrency");
    app.add_flag("--no-timing", g.no_timing, "write 0 for wall-clock columns so CSVs are byte-stable");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "parse, remap and split a rating file");
    ingest_cmd->add_option("input", ingest.input, "rating file")->required();
    ingest_cmd->add_option("--format", ingest.format, "auto | :: | tab | comma")->capture_default_str();
    ingest_cmd->add_option("--ratios", ingest.ratios, "train,valid,test")->capture_default_str();
    ingest_cmd->add_option("--split-seed", ingest.seed, "split seed when --seed is not given")->capture_default_str();

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "train and compare the configured models");
    run_cmd->add_option("--data", run_args.data, "rating file or ingest directory");
    run_cmd->add_option("--models", run_args.models, "comma list of sgd, adam, pretrain-only, hpl, dhpl");
    run_cmd->add_option("--metric", run_args.metric, "rmse | mae | both");

    RunArgs sweep_args;
    std::vector<std::size_t> ks{5, 10, 15, 20, 25, 30};
    auto* sweep_cmd = app.add_subcommand("sweep-k", "DHPL over several swarm sizes with shared pretraining");
    sweep_cmd->add_option("--data", sweep_args.data, "rating file or ingest directory");
    sweep_cmd->add_option("--metric", sweep_args.metric, "rmse | mae");
    sweep_cmd->add_option("--k", ks, "swarm sizes")->delimiter(',')->capture_default_str();

    RunArgs param_args{.data = "", .models = "dhpl", .metric = ""};
    SweepArgs param;
    auto* param_cmd = app.add_subcommand("sweep", "rerun the models once per value of one config key");
    param_cmd->add_option("--data", param_args.data, "rating file or ingest directory");
    param_cmd->add_option("--models", param_args.models, "comma list of models")->capture_default_str();
    param_cmd->add_option("--key", param.key, "config key, e.g. refine.lambda")->required();
    param_cmd->add_option("--values", param.values, "comma list of values")->delimiter(',')->required();

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "score a model snapshot on a canonical rating file");
    eval_cmd->add_option("--model", eval.model, "snapshot written by run")->required();
    eval_cmd->add_option("--data", eval.data, "canonical user<TAB>item<TAB>rating file")->required();
    eval_cmd->add_option("--csv", eval.csv, "also write the metrics here");

    SynthSpec synth;
    std::string synth_format = "tab";
    auto* gen_cmd = app.add_subcommand("gen-synth", "write a rank-r synthetic rating matrix");
    gen_cmd->add_option("--users", synth.users)->capture_default_str();
    gen_cmd->add_option("--items", synth.items)->capture_default_str();
    gen_cmd->add_option("--rank", synth.rank)->capture_default_str();
    gen_cmd->add_option("--density", synth.density)->capture_default_str();
    gen_cmd->add_option("--noise", synth.noise, "Gaussian noise sd")->capture_default_str();
    gen_cmd->add_option("--offset", synth.offset)->capture_default_str();
    gen_cmd->add_option("--scale", synth.scale)->capture_default_str();
    gen_cmd->add_option("--format", synth_format, ":: | tab | comma")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << "swarmlfa: " << e.what() << "\n";
        return BadConfig;
    }

    try {
        if (*ingest_cmd) return cmd_ingest(ingest, g, out, err);
        if (*run_cmd) return cmd_run(run_args, g, out);
        if (*sweep_cmd) return cmd_sweep(sweep_args, ks, g, out);
        if (*param_cmd) return cmd_param_sweep(param_args, param, g, out);
        if (*eval_cmd) return cmd_eval(eval, out);
        if (*gen_cmd) return cmd_gen(synth, synth_format, g, out);
    } catch (const InputError& e) {
        err << "swarmlfa: " << e.what() << "\n";
        return BadInput;
    } catch (const ConfigError& e) {
        err << "swarmlfa: " << e.what() << "\n";
        return BadConfig;
    } catch (const DivergenceError& e) {
        err << "swarmlfa: " << e.what() << "\n";
        return Diverged;
    } catch (const fs::filesystem_error& e) {
        err << "swarmlfa: " << e.what() << "\n";
        return BadInput;
    }
    return BadConfig;
}

}  // namespace swarmlfa::cli
