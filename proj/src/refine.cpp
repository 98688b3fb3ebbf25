#include "swarmlfa/refine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <thread>

#include "swarmlfa/errors.hpp"

namespace swarmlfa {

namespace {

/// Runs fn(index) for every index in [0, count) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t k = next++; k < count && !failed; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    }
    workers.clear();
    if (failure) std::rethrow_exception(failure);
}

FitnessKind parse_fitness_kind(const std::string& s) {
    if (s == "rmse") return FitnessKind::Rmse;
    if (s == "mae") return FitnessKind::Mae;
    throw ConfigError("fitness_kind must be rmse or mae, got '" + s + "'");
}

UpdateRule parse_update_rule(const std::string& s) {
    if (s == "neighbor" || s == "dhpl") return UpdateRule::NeighborCooperative;
    if (s == "standard" || s == "hpl") return UpdateRule::Standard;
    throw ConfigError("update_rule must be neighbor or standard, got '" + s + "'");
}

Gamma2Rule parse_gamma2_rule(const std::string& s) {
    if (s == "increasing") return Gamma2Rule::Increasing;
    if (s == "as_printed") return Gamma2Rule::AsPrinted;
    throw ConfigError("gamma2_rule must be increasing or as_printed, got '" + s + "'");
}

const HdiMatrix& monitor_set(const DataSplit& split) {
    return split.validation.empty() ? split.train : split.validation;
}

}  // namespace

std::string to_string(FitnessKind kind) { return kind == FitnessKind::Rmse ? "rmse" : "mae"; }
std::string to_string(UpdateRule rule) { return rule == UpdateRule::NeighborCooperative ? "neighbor" : "standard"; }
std::string to_string(Gamma2Rule rule) { return rule == Gamma2Rule::Increasing ? "increasing" : "as_printed"; }

void RefineConfig::validate() const {
    if (K == 0) throw ConfigError("K must be >= 1");
    if (update_rule == UpdateRule::NeighborCooperative && K < 4) {
        throw ConfigError("K must be >= 4 for the neighbor-cooperative update, got " + std::to_string(K));
    }
    if (N == 0) throw ConfigError("N must be >= 1");
    schedule.validate();
    if (schedule.G < N) throw ConfigError("schedule.G must be >= N");
    if (!(beta_max > 0.0)) throw ConfigError("beta_max must be > 0");
    if (!(beta_min <= 0.0)) throw ConfigError("beta_min must be <= 0");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(init_noise >= 0.0)) throw ConfigError("init_noise must be >= 0");
    if (!(convergence_tol >= 0.0)) throw ConfigError("convergence_tol must be >= 0");
    if (stall_iterations == 0) throw ConfigError("stall_iterations must be >= 1");
    if (!(epsilon_floor > 0.0)) throw ConfigError("epsilon_floor must be > 0");
    if (!std::isfinite(gamma3)) throw ConfigError("gamma3 must be finite");
}

KeyValues RefineConfig::to_kv() const {
    KeyValues kv;
    kv.set("K", std::to_string(K));
    kv.set("N", std::to_string(N));
    kv.set("M", std::to_string(M));
    kv.set("schedule.omega_max", format_double(schedule.omega_max));
    kv.set("schedule.omega_min", format_double(schedule.omega_min));
    kv.set("schedule.gamma_max", format_double(schedule.gamma_max));
    kv.set("schedule.gamma_min", format_double(schedule.gamma_min));
    kv.set("schedule.G", std::to_string(schedule.G));
    kv.set("gamma3", format_double(gamma3));
    kv.set("beta_max", format_double(beta_max));
    kv.set("beta_min", format_double(beta_min));
    kv.set("lambda", format_double(lambda));
    kv.set("fitness_kind", to_string(fitness_kind));
    kv.set("init_noise", format_double(init_noise));
    kv.set("seed", std::to_string(seed));
    kv.set("update_rule", to_string(update_rule));
    kv.set("gamma2_rule", to_string(gamma2_rule));
    kv.set("convergence_tol", format_double(convergence_tol));
    kv.set("stall_iterations", std::to_string(stall_iterations));
    kv.set("epsilon_floor", format_double(epsilon_floor));
    return kv;
}

RefineConfig RefineConfig::from_kv(const KeyValues& kv) {
    const RefineConfig d;
    const std::set<std::string> known = [&] {
        std::set<std::string> keys;
        const KeyValues defaults = d.to_kv();
        for (const auto& [k, v] : defaults.entries()) keys.insert(k);
        return keys;
    }();
    for (const auto& [k, v] : kv.entries()) {
        if (!known.contains(k)) throw ConfigError("unknown refine config key '" + k + "'");
    }
    RefineConfig c;
    c.K = kv.get_size("K", d.K);
    c.N = kv.get_size("N", d.N);
    c.M = kv.get_size("M", d.M);
    c.schedule.omega_max = kv.get("schedule.omega_max", d.schedule.omega_max);
    c.schedule.omega_min = kv.get("schedule.omega_min", d.schedule.omega_min);
    c.schedule.gamma_max = kv.get("schedule.gamma_max", d.schedule.gamma_max);
    c.schedule.gamma_min = kv.get("schedule.gamma_min", d.schedule.gamma_min);
    // G tracks N unless pinned explicitly.
    c.schedule.G = kv.get_size("schedule.G", kv.contains("N") ? c.N : d.schedule.G);
    c.gamma3 = kv.get("gamma3", d.gamma3);
    c.beta_max = kv.get("beta_max", d.beta_max);
    c.beta_min = kv.get("beta_min", -c.beta_max);
    c.lambda = kv.get("lambda", d.lambda);
    c.fitness_kind = parse_fitness_kind(kv.get("fitness_kind", to_string(d.fitness_kind)));
    c.init_noise = kv.get("init_noise", d.init_noise);
    c.seed = kv.get("seed", d.seed);
    c.update_rule = parse_update_rule(kv.get("update_rule", to_string(d.update_rule)));
    c.gamma2_rule = parse_gamma2_rule(kv.get("gamma2_rule", to_string(d.gamma2_rule)));
    c.convergence_tol = kv.get("convergence_tol", d.convergence_tol);
    c.stall_iterations = kv.get_size("stall_iterations", d.stall_iterations);
    c.epsilon_floor = kv.get("epsilon_floor", d.epsilon_floor);
    return c;
}

void write_refine_config(std::ostream& out, const RefineConfig& config) { config.to_kv().write(out); }

RefineConfig read_refine_config(std::istream& in) { return RefineConfig::from_kv(KeyValues::parse(in)); }

SwarmRng::SwarmRng(std::uint64_t stream_seed)
    : motion(derive_seed(stream_seed, {1})), neighbors(derive_seed(stream_seed, {2})) {}

SwarmRng SwarmRng::for_swarm(std::uint64_t master, SubVectorKind kind, Index index, std::size_t round) {
    return SwarmRng(derive_seed(master, {kind == SubVectorKind::Row ? 0u : 1u, index, round}));
}

Swarm init_swarm(const SubVector& initial, const FitnessContext& context, const RefineConfig& config,
                 SwarmRng& rng) {
    const std::size_t d = initial.dim();
    Swarm swarm;
    swarm.particles.resize(config.K);
    const double noise = config.init_noise;
    for (std::size_t k = 0; k < config.K; ++k) {
        Particle& p = swarm.particles[k];
        p.position = initial.values;
        p.velocity.assign(d, 0.0);
        if (k > 0 && noise > 0.0) {
            for (std::size_t j = 0; j < d; ++j) {
                const double sd = noise * (1.0 + std::abs(initial.values[j]));
                p.position[j] += std::normal_distribution<double>(0.0, sd)(rng.motion);
            }
            for (double& v : p.velocity) v = noise * (2.0 * uniform01(rng.motion) - 1.0);
        }
        p.fitness = fitness(p.position, context, config.lambda, config.fitness_kind);
        if (!std::isfinite(p.fitness)) {
            throw DivergenceError("non-finite fitness for particle " + std::to_string(k) + " at initialization");
        }
        p.best_position = p.position;
        p.best_fitness = p.fitness;
    }
    update_bests(swarm);
    return swarm;
}

void step_swarm(Swarm& swarm, std::size_t n, const FitnessContext& context, const RefineConfig& config,
                SwarmRng& rng) {
    const std::size_t K = swarm.particles.size();
    const Coefficients coef = schedule_coefficients(n, config.schedule, config.gamma2_rule);
    const bool cooperative = config.update_rule == UpdateRule::NeighborCooperative;

    std::vector<std::vector<double>> next(K);
    for (std::size_t k = 0; k < K; ++k) {
        const Particle& p = swarm.particles[k];
        Draws draws;
        draws.r1 = uniform01(rng.motion);
        draws.r2 = uniform01(rng.motion);
        if (cooperative) {
            const auto [rd1, rd2] = draw_neighbors(k, K, rng.neighbors);
            draws.r3 = uniform01(rng.neighbors);
            next[k] = dn_velocity_update(p, swarm.global_best, swarm.particles[rd1].position,
                                         swarm.particles[rd2].position, coef, config.gamma3, draws);
        } else {
            next[k] = hpl_velocity_update(p, swarm.global_best, coef, draws);
        }
        clamp_velocity(next[k], p.position, config.beta_max, config.beta_min, config.epsilon_floor);
    }
    for (std::size_t k = 0; k < K; ++k) {
        Particle& p = swarm.particles[k];
        p.velocity = std::move(next[k]);
        for (std::size_t j = 0; j < p.position.size(); ++j) p.position[j] += p.velocity[j];
        p.fitness = fitness(p.position, context, config.lambda, config.fitness_kind);
        if (!std::isfinite(p.fitness)) {
            throw DivergenceError("non-finite fitness for particle " + std::to_string(k) + " at iteration " +
                                  std::to_string(n));
        }
    }
    update_bests(swarm);
    swarm.iteration = n;
}

SubVectorOutcome refine_subvector(const SubVector& initial, const FitnessContext& context, const RefineConfig& config,
                                  SwarmRng& rng) {
    config.validate();
    SubVectorOutcome out;
    out.best = initial;
    out.initial_fitness = fitness(initial.values, context, config.lambda, config.fitness_kind);
    out.final_fitness = out.initial_fitness;
    if (context.empty()) return out;

    Swarm swarm = init_swarm(initial, context, config, rng);
    out.history.push_back(swarm.global_best_fitness);
    std::size_t stalled = 0;
    for (std::size_t n = 1; n <= config.N; ++n) {
        step_swarm(swarm, n, context, config, rng);
        out.history.push_back(swarm.global_best_fitness);
        out.iterations = n;
        if (config.convergence_tol > 0.0 && std::abs(out.history[n] - out.history[n - 1]) < config.convergence_tol) {
            if (++stalled >= config.stall_iterations) break;
        } else {
            stalled = 0;
        }
    }
    out.best.values = swarm.global_best;
    out.final_fitness = swarm.global_best_fitness;
    return out;
}

RefineResult refine_model(FactorModel model, const DataSplit& split, const RefineConfig& config,
                          const RefineOptions& options) {
    config.validate();
    if (split.train.empty()) throw InputError("training set is empty");
    model.check_compatible(split.train);

    const HdiMatrix& monitor = monitor_set(split);
    RefineResult result;
    result.report.model_name = "refine";
    result.report.config_snapshot = config.to_kv().str();

    Stopwatch clock;
    result.report.history.push_back({0, rmse(model, monitor), mae(model, monitor), 0.0});

    struct Slot {
        bool refined = false;
        std::size_t iterations = 0;
        double initial_fitness = 0.0;
        std::vector<double> history;
    };

    const auto run_phase = [&](SubVectorKind kind, std::size_t round) {
        const bool rows = kind == SubVectorKind::Row;
        const std::size_t count = rows ? model.user_count() : model.item_count();
        std::vector<Slot> slots(count);
        parallel_for(count, options.threads, [&](std::size_t idx) {
            const auto index = static_cast<Index>(idx);
            const FitnessContext context = rows ? FitnessContext::for_row(model, split.train, index)
                                                : FitnessContext::for_column(model, split.train, index);
            if (context.empty()) return;
            SwarmRng rng = SwarmRng::for_swarm(config.seed, kind, index, round);
            const SubVector initial = rows ? row_subvector(model, index) : column_subvector(model, index);
            SubVectorOutcome out = refine_subvector(initial, context, config, rng);
            write_back(model, out.best, index);
            Slot& slot = slots[idx];
            slot.refined = true;
            slot.iterations = out.iterations;
            slot.initial_fitness = out.initial_fitness;
            if (options.record_traces) slot.history = std::move(out.history);
        });
        for (std::size_t idx = 0; idx < count; ++idx) {
            Slot& slot = slots[idx];
            if (!slot.refined) {
                ++result.swarms_skipped;
                continue;
            }
            ++result.swarms_refined;
            result.total_iterations += slot.iterations;
            if (options.record_traces) {
                result.traces.push_back(
                    {round, kind, static_cast<Index>(idx), slot.initial_fitness, std::move(slot.history)});
            }
        }
    };

    for (std::size_t round = 1; round <= config.M; ++round) {
        run_phase(SubVectorKind::Row, round);
        run_phase(SubVectorKind::Column, round);
        result.report.history.push_back({round, rmse(model, monitor), mae(model, monitor), clock.seconds()});
    }
    result.report.seconds = clock.seconds();

    std::vector<double> monitored;
    for (const MetricPoint& p : result.report.history) monitored.push_back(p.rmse);
    result.report.converged_at = converged(monitored, 1e-4);
    if (!split.test.empty()) {
        result.report.test_rmse = rmse(model, split.test);
        result.report.test_mae = mae(model, split.test);
    }
    result.model = std::move(model);
    return result;
}

void write_traces_csv(std::ostream& out, const std::vector<SwarmTrace>& traces) {
    out << "round,kind,index,iteration,global_best_fitness\n";
    for (const SwarmTrace& t : traces) {
        const char* kind = t.kind == SubVectorKind::Row ? "row" : "column";
        for (std::size_t n = 0; n < t.history.size(); ++n) {
            out << t.round << ',' << kind << ',' << t.index << ',' << n << ',' << format_double(t.history[n]) << '\n';
        }
    }
}

}  // namespace swarmlfa
