#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "swarmlfa/factor_model.hpp"
#include "swarmlfa/hdi_data.hpp"
#include "swarmlfa/metrics.hpp"

namespace swarmlfa {

struct SgdConfig {
    double eta = 0.01;
    double lambda = 0.03;
    std::size_t max_epochs = 500;
    double convergence_tol = 1e-4;

    /// Throws ConfigError on eta <= 0, lambda < 0, max_epochs == 0 or tol <= 0.
    void validate() const;
};

/// One pass of plain SGD over train in an order shuffled by epoch_seed. Each
/// entry's four parameter blocks are updated from their pre-update values.
/// Throws DivergenceError naming the parameter and entry on a non-finite value.
void sgd_epoch(FactorModel& model, const HdiMatrix& train, const SgdConfig& config, std::uint64_t epoch_seed);

struct AdamConfig {
    double alpha = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double lambda = 0.03;

    void validate() const;
};

/// First/second moment accumulators, persisted across adam_epoch calls.
///
/// Bias correction uses a per-row step count: every user (item) row advances its
/// own counter when one of its entries is processed, and the row's bias shares it.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(const FactorModel& model);

    bool matches(const FactorModel& model) const noexcept;

private:
    friend void adam_epoch(FactorModel&, AdamState&, const HdiMatrix&, const AdamConfig&, std::uint64_t);

    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
        void resize(std::size_t n) {
            m.assign(n, 0.0);
            v.assign(n, 0.0);
        }
    };
    Moments P_, Q_, b_, c_;
    std::vector<std::uint64_t> user_steps_;
    std::vector<std::uint64_t> item_steps_;
};

/// One pass of per-entry Adam updates over train, shuffled by epoch_seed.
void adam_epoch(FactorModel& model, AdamState& state, const HdiMatrix& train, const AdamConfig& config,
                std::uint64_t epoch_seed);

/// Runs one epoch of some optimizer; the argument is the 1-based epoch number.
using EpochFn = std::function<void(FactorModel&, std::size_t)>;

struct TrainLoopOptions {
    std::size_t max_epochs = 500;
    double convergence_tol = 1e-4;
    /// Return the best-validation-RMSE epoch's model instead of the last one.
    bool keep_best = true;
};

struct TrainResult {
    FactorModel model;
    RunReport report;
    std::size_t best_epoch = 0;  ///< 1-based
};

/// Repeats epoch_fn until validation RMSE changes by less than the tolerance
/// between adjacent epochs, or max_epochs is reached. Monitors train RMSE when
/// the validation set is empty. report.test_* are filled from split.test when it
/// is nonempty.
TrainResult train_loop(FactorModel model, const DataSplit& split, const EpochFn& epoch_fn,
                       const TrainLoopOptions& options, std::string model_name);

/// SGD pretraining: train_loop over sgd_epoch keeping the best-validation
/// snapshot. Epoch m shuffles with derive_seed(seed, m).
TrainResult pretrain(FactorModel model, const DataSplit& split, const SgdConfig& config, std::uint64_t seed);

}  // namespace swarmlfa
