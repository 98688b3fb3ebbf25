#include "swarmlfa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "swarmlfa/errors.hpp"

namespace swarmlfa {

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string real17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require_nonempty(std::size_t n) {
    if (n == 0) throw InputError("evaluation set is empty");
}

}  // namespace

double rmse(const FactorModel& model, std::span<const RatingEntry> eval_set) {
    require_nonempty(eval_set.size());
    double sum = 0.0;
    for (const RatingEntry& e : eval_set) {
        const double err = e.rating - predict(model, e.user, e.item);
        sum += err * err;
    }
    return std::sqrt(sum / static_cast<double>(eval_set.size()));
}

double rmse(const FactorModel& model, const HdiMatrix& eval_set) { return rmse(model, eval_set.entries()); }

double mae(const FactorModel& model, std::span<const RatingEntry> eval_set) {
    require_nonempty(eval_set.size());
    double sum = 0.0;
    for (const RatingEntry& e : eval_set) sum += std::abs(e.rating - predict(model, e.user, e.item));
    return sum / static_cast<double>(eval_set.size());
}

double mae(const FactorModel& model, const HdiMatrix& eval_set) { return mae(model, eval_set.entries()); }

double rmse_of_residuals(std::span<const double> residuals) {
    require_nonempty(residuals.size());
    double sum = 0.0;
    for (double r : residuals) sum += r * r;
    return std::sqrt(sum / static_cast<double>(residuals.size()));
}

double mae_of_residuals(std::span<const double> residuals) {
    require_nonempty(residuals.size());
    double sum = 0.0;
    for (double r : residuals) sum += std::abs(r);
    return sum / static_cast<double>(residuals.size());
}

std::optional<std::size_t> converged(std::span<const double> history, double tol) {
    for (std::size_t n = 1; n < history.size(); ++n) {
        if (std::abs(history[n] - history[n - 1]) < tol) return n;
    }
    return std::nullopt;
}

void write_history_csv(std::ostream& out, const RunReport& report, bool include_timing) {
    out << "epoch_or_round,rmse,mae,seconds\n";
    for (const MetricPoint& p : report.history) {
        out << p.epoch_or_round << ',' << real17(p.rmse) << ',' << real17(p.mae) << ','
            << fixed6(include_timing ? p.wall_seconds : 0.0) << '\n';
    }
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start + 1;
        while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
        // positions start..end-1 share the mean of ranks start+1..end
        const double shared = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t k = start; k < end; ++k) ranks[order[k]] = shared;
        start = end;
    }
    return ranks;
}

ComparisonTable compare(std::span<const RunReport> reports, const std::string& reference_model) {
    std::set<std::string> datasets;
    std::set<std::string> models;
    std::map<std::pair<std::string, std::string>, const RunReport*> cell_of;
    for (const RunReport& r : reports) {
        datasets.insert(r.dataset_name);
        models.insert(r.model_name);
        if (!cell_of.emplace(std::pair{r.dataset_name, r.model_name}, &r).second) {
            throw ConfigError("duplicate report for (" + r.dataset_name + ", " + r.model_name + ")");
        }
    }
    if (datasets.empty()) throw ConfigError("comparison needs at least one dataset");
    if (models.size() < 2) throw ConfigError("comparison needs at least two models");
    if (!models.contains(reference_model)) throw ConfigError("reference model '" + reference_model + "' has no reports");

    ComparisonTable table;
    table.reference_model = reference_model;
    table.datasets.assign(datasets.begin(), datasets.end());
    table.models.assign(models.begin(), models.end());

    constexpr double kInf = std::numeric_limits<double>::infinity();
    const auto effective = [&](const RunReport& r) { return r.failed ? kInf : r.test_rmse; };

    std::map<std::string, double> rank_sum;
    std::map<std::string, std::size_t> wins;
    std::map<std::string, std::size_t> losses;
    for (const std::string& ds : table.datasets) {
        std::vector<double> keyed;
        std::vector<double> keyed_mae;
        for (const std::string& m : table.models) {
            auto it = cell_of.find({ds, m});
            if (it == cell_of.end()) throw ConfigError("missing report for (" + ds + ", " + m + ")");
            keyed.push_back(effective(*it->second));
            keyed_mae.push_back(it->second->failed ? kInf : it->second->test_mae);
        }
        const auto ranks = average_ranks(keyed);
        const auto mae_ranks = average_ranks(keyed_mae);
        const double ref = effective(*cell_of.at({ds, reference_model}));
        for (std::size_t k = 0; k < table.models.size(); ++k) {
            const std::string& m = table.models[k];
            const RunReport& r = *cell_of.at({ds, m});
            table.cells.push_back({ds, m, r.test_rmse, r.test_mae, r.seconds, ranks[k], r.failed, mae_ranks[k]});
            rank_sum[m] += ranks[k];
            if (m == reference_model) continue;
            if (ref < keyed[k]) ++wins[m];
            if (ref > keyed[k]) ++losses[m];
        }
    }
    for (const std::string& m : table.models) {
        ModelSummary s{m, rank_sum[m] / static_cast<double>(table.datasets.size()), std::nullopt, std::nullopt};
        if (m != reference_model) {
            s.wins = wins[m];
            s.losses = losses[m];
        }
        table.summary.push_back(s);
    }
    return table;
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& table, bool include_timing) {
    out << "dataset,model,rmse,mae,seconds,rank\n";
    for (const ComparisonCell& c : table.cells) {
        out << c.dataset << ',' << c.model << ',';
        if (c.failed) {
            out << "failed,failed,";
        } else {
            out << fixed6(c.rmse) << ',' << fixed6(c.mae) << ',';
        }
        out << fixed6(include_timing ? c.seconds : 0.0) << ',' << c.rank << '\n';
    }
}

void write_summary_csv(std::ostream& out, const ComparisonTable& table) {
    out << "model,mean_rank,wins,losses\n";
    for (const ModelSummary& s : table.summary) {
        out << s.model << ',' << s.mean_rank << ',';
        if (s.wins) out << *s.wins;
        out << ',';
        if (s.losses) out << *s.losses;
        out << '\n';
    }
}

}  // namespace swarmlfa
