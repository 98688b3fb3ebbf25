#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swarmlfa/factor_model.hpp"
#include "swarmlfa/hdi_data.hpp"

namespace swarmlfa {

/// sqrt(sum(r - r_hat)^2 / |set|). Throws InputError on an empty set.
double rmse(const FactorModel& model, std::span<const RatingEntry> eval_set);
double rmse(const FactorModel& model, const HdiMatrix& eval_set);
/// sum|r - r_hat| / |set|. Throws InputError on an empty set.
double mae(const FactorModel& model, std::span<const RatingEntry> eval_set);
double mae(const FactorModel& model, const HdiMatrix& eval_set);

double rmse_of_residuals(std::span<const double> residuals);
double mae_of_residuals(std::span<const double> residuals);

/// Smallest n >= 1 with |h[n] - h[n-1]| < tol, if any.
std::optional<std::size_t> converged(std::span<const double> history, double tol);

struct MetricPoint {
    std::size_t epoch_or_round = 0;
    double rmse = 0.0;
    double mae = 0.0;
    double wall_seconds = 0.0;  ///< cumulative since the start of training
};

struct RunReport {
    std::string model_name;
    std::string dataset_name;
    std::vector<MetricPoint> history;  ///< validation metrics per epoch or round
    std::optional<std::size_t> converged_at;
    std::string config_snapshot;  ///< key=value lines
    double test_rmse = 0.0;
    double test_mae = 0.0;
    double seconds = 0.0;  ///< training/refinement wall time, loading excluded
    bool failed = false;
    std::string failure;
};

/// CSV "epoch_or_round,rmse,mae,seconds". Timings are written as 0 when
/// include_timing is false so that reruns are byte-identical.
void write_history_csv(std::ostream& out, const RunReport& report, bool include_timing = true);

struct ComparisonCell {
    std::string dataset;
    std::string model;
    double rmse = 0.0;
    double mae = 0.0;
    double seconds = 0.0;
    double rank = 0.0;  ///< per dataset by ascending RMSE, ties averaged
    bool failed = false;
    double mae_rank = 0.0;  ///< same rule on MAE; not exported to CSV
};

struct ModelSummary {
    std::string model;
    double mean_rank = 0.0;
    /// Datasets where the reference has strictly lower / higher RMSE than this
    /// model. Absent for the reference itself.
    std::optional<std::size_t> wins;
    std::optional<std::size_t> losses;
};

struct ComparisonTable {
    std::string reference_model;
    std::vector<std::string> datasets;  ///< sorted
    std::vector<std::string> models;    ///< sorted
    std::vector<ComparisonCell> cells;  ///< dataset-major, then model
    std::vector<ModelSummary> summary;  ///< same order as models
};

/// Builds the cross-model table. Failed runs rank as +inf RMSE.
/// Throws ConfigError with fewer than two models, no datasets, a missing
/// (dataset, model) cell, a duplicate cell, or an unknown reference model.
ComparisonTable compare(std::span<const RunReport> reports, const std::string& reference_model);

/// "dataset,model,rmse,mae,seconds,rank"
void write_comparison_csv(std::ostream& out, const ComparisonTable& table, bool include_timing = true);
/// "model,mean_rank,wins,losses"
void write_summary_csv(std::ostream& out, const ComparisonTable& table);

/// Average-rank (1-based) of each value in ascending order.
std::vector<double> average_ranks(std::span<const double> values);

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace swarmlfa
