#include "swarmlfa/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "swarmlfa/errors.hpp"
#include "swarmlfa/random.hpp"

namespace swarmlfa {

namespace {

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {0x5959}));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

[[noreturn]] void diverged(const char* block, Index row, std::size_t k, const RatingEntry& e, std::size_t pos) {
    throw DivergenceError(std::string("non-finite ") + block + "[" + std::to_string(row) + "][" + std::to_string(k) +
                          "] after entry " + std::to_string(pos) + " (" + std::to_string(e.user) + ", " +
                          std::to_string(e.item) + ")");
}

void check_entry_finite(const FactorModel& model, const RatingEntry& e, std::size_t pos) {
    const auto p = model.p(e.user);
    const auto q = model.q(e.item);
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (!std::isfinite(p[k])) diverged("p", e.user, k, e, pos);
        if (!std::isfinite(q[k])) diverged("q", e.item, k, e, pos);
    }
    if (!std::isfinite(model.b(e.user))) diverged("b", e.user, 0, e, pos);
    if (!std::isfinite(model.c(e.item))) diverged("c", e.item, 0, e, pos);
}

}  // namespace

void SgdConfig::validate() const {
    if (!(eta > 0.0)) throw ConfigError("sgd.eta must be > 0");
    if (!(lambda >= 0.0)) throw ConfigError("sgd.lambda must be >= 0");
    if (max_epochs == 0) throw ConfigError("sgd.max_epochs must be >= 1");
    if (!(convergence_tol > 0.0)) throw ConfigError("sgd.convergence_tol must be > 0");
}

void sgd_epoch(FactorModel& model, const HdiMatrix& train, const SgdConfig& config, std::uint64_t epoch_seed) {
    if (train.empty()) throw InputError("training set is empty");
    if (!(config.eta >= 0.0) || !(config.lambda >= 0.0)) throw ConfigError("sgd.eta and sgd.lambda must be >= 0");
    model.check_compatible(train);

    const double eta = config.eta;
    const double lambda = config.lambda;
    const auto entries = train.entries();
    for (std::size_t pos : shuffled_order(entries.size(), epoch_seed)) {
        const RatingEntry& e = entries[pos];
        auto p = model.p(e.user);
        auto q = model.q(e.item);
        const double err = e.rating - predict_unchecked(model, e.user, e.item);
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double pk = p[k];
            const double qk = q[k];
            p[k] = pk - eta * (-err * qk + lambda * pk);
            q[k] = qk - eta * (-err * pk + lambda * qk);
        }
        double& bu = model.b(e.user);
        double& ci = model.c(e.item);
        bu -= eta * (-err + lambda * bu);
        ci -= eta * (-err + lambda * ci);
        check_entry_finite(model, e, pos);
    }
}

void AdamConfig::validate() const {
    if (!(alpha > 0.0)) throw ConfigError("adam.alpha must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam.beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam.beta2 must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam.epsilon must be > 0");
    if (!(lambda >= 0.0)) throw ConfigError("adam.lambda must be >= 0");
}

AdamState::AdamState(const FactorModel& model)
    : user_steps_(model.user_count(), 0), item_steps_(model.item_count(), 0) {
    P_.resize(model.P().size());
    Q_.resize(model.Q().size());
    b_.resize(model.user_count());
    c_.resize(model.item_count());
}

bool AdamState::matches(const FactorModel& model) const noexcept {
    return P_.m.size() == model.P().size() && Q_.m.size() == model.Q().size() &&
           user_steps_.size() == model.user_count() && item_steps_.size() == model.item_count();
}

void adam_epoch(FactorModel& model, AdamState& state, const HdiMatrix& train, const AdamConfig& config,
                std::uint64_t epoch_seed) {
    config.validate();
    if (train.empty()) throw InputError("training set is empty");
    model.check_compatible(train);
    if (!state.matches(model)) state = AdamState(model);

    const std::size_t f = model.dim();
    const auto entries = train.entries();

    const auto step = [&](double& theta, double& m, double& v, double g, double correct1, double correct2) {
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g * g;
        theta -= config.alpha * (m / correct1) / (std::sqrt(v / correct2) + config.epsilon);
    };

    std::vector<double> g_p(f), g_q(f);
    for (std::size_t pos : shuffled_order(entries.size(), epoch_seed)) {
        const RatingEntry& e = entries[pos];
        auto p = model.p(e.user);
        auto q = model.q(e.item);
        const double err = e.rating - predict_unchecked(model, e.user, e.item);
        for (std::size_t k = 0; k < f; ++k) {
            g_p[k] = -err * q[k] + config.lambda * p[k];
            g_q[k] = -err * p[k] + config.lambda * q[k];
        }
        const double g_b = -err + config.lambda * model.b(e.user);
        const double g_c = -err + config.lambda * model.c(e.item);

        const double tu = static_cast<double>(++state.user_steps_[e.user]);
        const double ti = static_cast<double>(++state.item_steps_[e.item]);
        const double u1 = 1.0 - std::pow(config.beta1, tu), u2 = 1.0 - std::pow(config.beta2, tu);
        const double i1 = 1.0 - std::pow(config.beta1, ti), i2 = 1.0 - std::pow(config.beta2, ti);

        const std::size_t po = std::size_t{e.user} * f;
        const std::size_t qo = std::size_t{e.item} * f;
        for (std::size_t k = 0; k < f; ++k) {
            step(p[k], state.P_.m[po + k], state.P_.v[po + k], g_p[k], u1, u2);
            step(q[k], state.Q_.m[qo + k], state.Q_.v[qo + k], g_q[k], i1, i2);
        }
        step(model.b(e.user), state.b_.m[e.user], state.b_.v[e.user], g_b, u1, u2);
        step(model.c(e.item), state.c_.m[e.item], state.c_.v[e.item], g_c, i1, i2);
        check_entry_finite(model, e, pos);
    }
}

TrainResult train_loop(FactorModel model, const DataSplit& split, const EpochFn& epoch_fn,
                       const TrainLoopOptions& options, std::string model_name) {
    if (split.train.empty()) throw InputError("training set is empty");
    if (options.max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
    if (!(options.convergence_tol > 0.0)) throw ConfigError("convergence_tol must be > 0");
    model.check_compatible(split.train);

    const HdiMatrix& monitor = split.validation.empty() ? split.train : split.validation;
    TrainResult result;
    result.report.model_name = std::move(model_name);

    Stopwatch clock;
    std::vector<double> monitored;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
        epoch_fn(model, epoch);
        const double v_rmse = rmse(model, monitor);
        result.report.history.push_back({epoch, v_rmse, mae(model, monitor), clock.seconds()});
        monitored.push_back(v_rmse);
        if (!options.keep_best || v_rmse < best || result.best_epoch == 0) {
            if (v_rmse < best) best = v_rmse;
            result.best_epoch = epoch;
            result.model = model;
        }
        if (epoch >= 2 && std::abs(monitored[epoch - 1] - monitored[epoch - 2]) < options.convergence_tol) {
            result.report.converged_at = epoch - 1;
            break;
        }
    }
    result.report.seconds = clock.seconds();
    if (!split.test.empty()) {
        result.report.test_rmse = rmse(result.model, split.test);
        result.report.test_mae = mae(result.model, split.test);
    }
    return result;
}

TrainResult pretrain(FactorModel model, const DataSplit& split, const SgdConfig& config, std::uint64_t seed) {
    config.validate();
    const EpochFn epoch = [&](FactorModel& m, std::size_t n) {
        sgd_epoch(m, split.train, config, derive_seed(seed, {n}));
    };
    return train_loop(std::move(model), split, epoch,
                      {.max_epochs = config.max_epochs, .convergence_tol = config.convergence_tol, .keep_best = true},
                      "pretrain");
}

}  // namespace swarmlfa
