#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "swarmlfa/factor_model.hpp"
#include "swarmlfa/hdi_data.hpp"
#include "swarmlfa/random.hpp"

namespace swarmlfa {

/// Row kind houses [p_u, b_u]; column kind houses [q_i, c_i].
enum class SubVectorKind { Row, Column };

/// A particle-space point of dimension D = f + 1: latent factors then bias.
struct SubVector {
    std::vector<double> values;
    SubVectorKind kind = SubVectorKind::Row;

    std::size_t dim() const noexcept { return values.size(); }
    friend bool operator==(const SubVector&, const SubVector&) = default;
};

struct SubVectorSet {
    std::vector<SubVector> rows;     ///< rows[u] = [p_u, b_u]
    std::vector<SubVector> columns;  ///< columns[i] = [q_i, c_i]
};

SubVector row_subvector(const FactorModel& model, Index u);
SubVector column_subvector(const FactorModel& model, Index i);
SubVectorSet build_subvectors(const FactorModel& model);
/// Exact inverse of row_subvector / column_subvector, chosen by sub.kind.
/// Throws ConfigError when sub.dim() != f + 1 or index is out of range.
void write_back(FactorModel& model, const SubVector& sub, Index index);

struct ScheduleBounds {
    double omega_max = 0.9;
    double omega_min = 0.4;
    double gamma_max = 2.0;
    double gamma_min = 0.5;
    std::size_t G = 50;

    void validate() const;
    /// Every bound collapsed onto its midpoint: constant coefficients.
    ScheduleBounds midpoint_constant() const;
};

/// How the social coefficient moves with n. Increasing runs gamma_min up to
/// gamma_max; AsPrinted is gamma_min - (gamma_max - gamma_min) n / G.
enum class Gamma2Rule { Increasing, AsPrinted };

struct Coefficients {
    double omega = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
};

/// Linearly varying (omega, gamma1, gamma2) at iteration n of G.
/// Throws ConfigError when n > G.
Coefficients schedule_coefficients(std::size_t n, const ScheduleBounds& bounds,
                                   Gamma2Rule rule = Gamma2Rule::Increasing);

/// Per-call scalar uniform draws, each in [0, 1], shared by all components.
struct Draws {
    double r1 = 0.0;
    double r2 = 0.0;
    double r3 = 0.0;
};

struct Particle {
    std::vector<double> position;
    std::vector<double> velocity;
    std::vector<double> best_position;
    double fitness = 0.0;  ///< of position
    double best_fitness = 0.0;
};

/// v' = w v + g1 r1 (pbest - l) + g2 r2 (gbest - l) + g3 r3 (l_rd1 - l_rd2).
/// Throws ConfigError on a dimension mismatch.
std::vector<double> dn_velocity_update(const Particle& particle, std::span<const double> global_best,
                                       std::span<const double> neighbor1, std::span<const double> neighbor2,
                                       const Coefficients& coef, double gamma3, const Draws& draws);

/// v' = w v + g1 r1 (pbest - l) + g2 r2 (gbest - l).
std::vector<double> hpl_velocity_update(const Particle& particle, std::span<const double> global_best,
                                        const Coefficients& coef, const Draws& draws);

/// Componentwise clamp of v against the position magnitude:
/// lower_d = min(beta_min |l_d|, -floor), upper_d = max(beta_max |l_d|, floor).
/// beta_min <= 0 is expected; the default configuration uses -beta_max.
void clamp_velocity(std::span<double> velocity, std::span<const double> position, double beta_max, double beta_min,
                    double epsilon_floor);

/// Frozen data a sub-vector swarm is scored against: the opposite side's
/// factors and biases plus the row (or column) slice of known entries.
class FitnessContext {
public:
    FitnessContext(SubVectorKind kind, std::size_t dim, std::span<const double> opposite_factors,
                   std::span<const double> opposite_bias, std::vector<SliceEntry> slice);

    /// Row u scored against the model's (Q, c).
    static FitnessContext for_row(const FactorModel& model, const HdiMatrix& train, Index u);
    /// Column i scored against the model's (P, b).
    static FitnessContext for_column(const FactorModel& model, const HdiMatrix& train, Index i);

    SubVectorKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return slice_.empty(); }
    std::span<const SliceEntry> slice() const noexcept { return slice_; }
    std::span<const double> opposite_factors(Index other) const noexcept {
        return opposite_factors_.subspan(std::size_t{other} * dim_, dim_);
    }
    double opposite_bias(Index other) const noexcept { return opposite_bias_[other]; }

private:
    SubVectorKind kind_;
    std::size_t dim_;
    std::span<const double> opposite_factors_;
    std::span<const double> opposite_bias_;
    std::vector<SliceEntry> slice_;
};

/// Rmse kind: sum (r - x.y - bias - bias_o)^2 + lambda (|x|^2 + bias^2).
/// Mae kind:  sum |r - x.y - bias - bias_o| + lambda (|x| + |bias|), |x| the
/// Euclidean norm. x is the scored sub-vector's factor part. With an empty
/// slice only the regularizer remains; the orchestrator skips such swarms.
enum class FitnessKind { Rmse, Mae };

double fitness(std::span<const double> position, const FitnessContext& context, double lambda, FitnessKind kind);

struct Swarm {
    std::vector<Particle> particles;
    std::vector<double> global_best;
    double global_best_fitness = 0.0;
    std::size_t global_best_index = 0;
    std::size_t iteration = 0;
};

/// Personal bests replaced on strictly lower fitness; global best is the
/// lowest-index argmin of personal bests. Requires every particle's fitness to
/// be current.
void update_bests(Swarm& swarm);

/// Two distinct uniform picks from {0..K-1} \ {k}. Requires K >= 3.
std::pair<std::size_t, std::size_t> draw_neighbors(std::size_t k, std::size_t swarm_size, Rng& rng);

}  // namespace swarmlfa
