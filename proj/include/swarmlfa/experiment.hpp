#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "swarmlfa/factor_model.hpp"
#include "swarmlfa/hdi_data.hpp"
#include "swarmlfa/kv_config.hpp"
#include "swarmlfa/metrics.hpp"
#include "swarmlfa/refine.hpp"
#include "swarmlfa/training.hpp"

namespace swarmlfa {

/// Everything one benchmark invocation needs. Serialized as flat key=value
/// text with section prefixes: data.*, split.*, model.*, sgd.*, adam.*,
/// refine.*, run.*.
struct ExperimentConfig {
    std::string data_path;  ///< rating file, or a directory written by `ingest`
    RatingFormat format;
    std::string dataset_name;  ///< defaults to the file stem
    std::array<double, 3> ratios{0.7, 0.1, 0.2};
    std::uint64_t split_seed = 42;

    std::size_t f = 20;
    double init_scale = 0.1;
    std::uint64_t seed = 1;  ///< master seed for initialization, shuffles, swarms

    SgdConfig sgd;
    AdamConfig adam;
    RefineConfig refine;

    std::vector<std::string> models{"sgd", "adam", "pretrain-only", "hpl", "dhpl"};
    std::string out_dir = "out";
    std::string metric = "rmse";  ///< rmse | mae | both: refinement fitness kind(s)
    std::size_t threads = 1;
    bool timing = true;

    /// Throws ConfigError on an unknown model, metric or key.
    void validate() const;
    KeyValues to_kv() const;
    static ExperimentConfig from_kv(const KeyValues& kv);
};

/// Configuration of the standard-update baseline used for "hpl": the same
/// engine with the neighbor term off and every coefficient fixed at its
/// schedule midpoint.
RefineConfig hpl_baseline(const RefineConfig& dhpl);

/// Loads config.data_path (raw file or ingest directory) and splits it.
DataSplit load_experiment_data(const ExperimentConfig& config);

struct ExperimentResult {
    std::vector<RunReport> reports;
    std::map<std::string, FactorModel> models;  ///< successful runs only
    ComparisonTable table;
};

/// Runs every requested model on one split. A diverging model is reported as
/// failed without aborting the others.
ExperimentResult run_experiment(const ExperimentConfig& config, const DataSplit& data);

/// Writes history_<model>.csv, model_<model>.txt, comparison.csv, summary.csv
/// and config.txt into config.out_dir.
void write_experiment(const ExperimentConfig& config, const ExperimentResult& result);

struct SweepRow {
    std::size_t K = 0;
    double rmse = 0.0;
    double mae = 0.0;
    double iterations = 0.0;  ///< mean swarm iterations
    double seconds = 0.0;     ///< refinement time only
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double rmse_std = 0.0;  ///< sample standard deviation across K
    double mae_std = 0.0;
};

/// DHPL per K with one shared pretraining. Throws ConfigError on any K < 4.
SweepResult sweep_k(const ExperimentConfig& config, const DataSplit& data, const std::vector<std::size_t>& k_values);

/// CSV "k,rmse,mae,iterations,seconds" plus a final "std,<rmse std>,<mae std>,," row.
void write_sweep_csv(std::ostream& out, const SweepResult& result, bool include_timing = true);

double sample_std(const std::vector<double>& values);

}  // namespace swarmlfa
