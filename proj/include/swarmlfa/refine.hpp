#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "swarmlfa/factor_model.hpp"
#include "swarmlfa/hdi_data.hpp"
#include "swarmlfa/kv_config.hpp"
#include "swarmlfa/metrics.hpp"
#include "swarmlfa/random.hpp"
#include "swarmlfa/swarm.hpp"

namespace swarmlfa {

/// NeighborCooperative adds the two-random-neighbor term to the velocity
/// update; Standard is the plain cognitive + social update.
enum class UpdateRule { NeighborCooperative, Standard };

struct RefineConfig {
    std::size_t K = 5;  ///< particles per swarm
    std::size_t N = 50; ///< max swarm iterations per sub-vector
    std::size_t M = 1;  ///< outer rounds over all rows then all columns
    ScheduleBounds schedule;
    double gamma3 = 0.5;
    double beta_max = 1.0;
    double beta_min = -1.0;
    double lambda = 0.03;
    FitnessKind fitness_kind = FitnessKind::Rmse;
    double init_noise = 0.01;
    std::uint64_t seed = 1;
    UpdateRule update_rule = UpdateRule::NeighborCooperative;
    Gamma2Rule gamma2_rule = Gamma2Rule::Increasing;
    /// A swarm stops once |F(g)_n - F(g)_{n-1}| < convergence_tol has held for
    /// stall_iterations consecutive iterations. convergence_tol = 0 disables it.
    double convergence_tol = 1e-4;
    std::size_t stall_iterations = 1;
    double epsilon_floor = 1e-6;

    /// Throws ConfigError on K == 0, K < 4 with the neighbor rule, N == 0,
    /// G < N, beta_max <= 0, beta_min > 0, negative lambda/noise/tol.
    void validate() const;

    /// Flat key=value form; keys are the field names, schedule fields prefixed
    /// "schedule.".
    KeyValues to_kv() const;
    /// Unknown keys are rejected. Missing keys keep their defaults; when only
    /// beta_max is given, beta_min follows as -beta_max.
    static RefineConfig from_kv(const KeyValues& kv);
};

void write_refine_config(std::ostream& out, const RefineConfig& config);
RefineConfig read_refine_config(std::istream& in);

/// Per-swarm random streams. motion drives particle initialization and r1, r2;
/// neighbors drives rd1, rd2 and r3. Keeping them apart means the standard and
/// neighbor rules consume identical motion draws.
struct SwarmRng {
    Rng motion;
    Rng neighbors;

    explicit SwarmRng(std::uint64_t stream_seed);
    /// stream seed = hash(master, kind, index, round)
    static SwarmRng for_swarm(std::uint64_t master, SubVectorKind kind, Index index, std::size_t round);
};

struct SubVectorOutcome {
    SubVector best;
    std::size_t iterations = 0;
    double initial_fitness = 0.0;
    double final_fitness = 0.0;
    /// F(g) after initialization, then after each iteration.
    std::vector<double> history;
};

/// Swarm refinement of one sub-vector. Particle 0 starts at initial with zero
/// velocity, so final_fitness <= initial_fitness. An empty slice returns the
/// input unchanged with 0 iterations.
/// Throws DivergenceError (particle, iteration) on a non-finite fitness.
SubVectorOutcome refine_subvector(const SubVector& initial, const FitnessContext& context, const RefineConfig& config,
                                  SwarmRng& rng);

/// Builds the K-particle swarm seeded from initial and evaluates it.
Swarm init_swarm(const SubVector& initial, const FitnessContext& context, const RefineConfig& config, SwarmRng& rng);
/// One synchronous iteration n (1-based): every velocity is computed from the
/// iteration n-1 state, then all particles move, then bests refresh.
void step_swarm(Swarm& swarm, std::size_t n, const FitnessContext& context, const RefineConfig& config,
                SwarmRng& rng);

struct SwarmTrace {
    std::size_t round = 0;
    SubVectorKind kind = SubVectorKind::Row;
    Index index = 0;
    double initial_fitness = 0.0;
    std::vector<double> history;
};

struct RefineOptions {
    std::size_t threads = 1;  ///< 0 = hardware concurrency
    bool record_traces = false;
};

struct RefineResult {
    FactorModel model;
    RunReport report;  ///< round 0 is the input model
    std::vector<SwarmTrace> traces;
    std::size_t swarms_refined = 0;
    std::size_t swarms_skipped = 0;
    std::size_t total_iterations = 0;

    double mean_iterations() const noexcept {
        return swarms_refined ? static_cast<double>(total_iterations) / static_cast<double>(swarms_refined) : 0.0;
    }
};

/// M rounds: refine all rows against frozen (Q, c), write back, then all
/// columns against frozen (P, b). Records validation RMSE/MAE per round.
/// Results do not depend on the thread count.
RefineResult refine_model(FactorModel model, const DataSplit& split, const RefineConfig& config,
                          const RefineOptions& options = {});

/// CSV "round,kind,index,iteration,global_best_fitness".
void write_traces_csv(std::ostream& out, const std::vector<SwarmTrace>& traces);

std::string to_string(FitnessKind kind);
std::string to_string(UpdateRule rule);
std::string to_string(Gamma2Rule rule);

}  // namespace swarmlfa
