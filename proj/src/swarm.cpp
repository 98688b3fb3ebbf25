#include "swarmlfa/swarm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "swarmlfa/errors.hpp"

namespace swarmlfa {

namespace {

void require_dim(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got) {
        throw ConfigError(std::string(what) + " has dimension " + std::to_string(got) + ", expected " +
                          std::to_string(expected));
    }
}

void check_particle(const Particle& p) {
    require_dim(p.position.size(), p.velocity.size(), "velocity");
    require_dim(p.position.size(), p.best_position.size(), "personal best");
}

}  // namespace

SubVector row_subvector(const FactorModel& model, Index u) {
    SubVector sub{{}, SubVectorKind::Row};
    const auto p = model.p(u);
    sub.values.reserve(p.size() + 1);
    sub.values.assign(p.begin(), p.end());
    sub.values.push_back(model.b(u));
    return sub;
}

SubVector column_subvector(const FactorModel& model, Index i) {
    SubVector sub{{}, SubVectorKind::Column};
    const auto q = model.q(i);
    sub.values.reserve(q.size() + 1);
    sub.values.assign(q.begin(), q.end());
    sub.values.push_back(model.c(i));
    return sub;
}

SubVectorSet build_subvectors(const FactorModel& model) {
    SubVectorSet set;
    set.rows.reserve(model.user_count());
    set.columns.reserve(model.item_count());
    for (Index u = 0; u < model.user_count(); ++u) set.rows.push_back(row_subvector(model, u));
    for (Index i = 0; i < model.item_count(); ++i) set.columns.push_back(column_subvector(model, i));
    return set;
}

void write_back(FactorModel& model, const SubVector& sub, Index index) {
    require_dim(model.dim() + 1, sub.dim(), "sub-vector");
    const bool row = sub.kind == SubVectorKind::Row;
    if (index >= (row ? model.user_count() : model.item_count())) {
        throw ConfigError("sub-vector index " + std::to_string(index) + " out of range");
    }
    auto factors = row ? model.p(index) : model.q(index);
    std::copy_n(sub.values.begin(), factors.size(), factors.begin());
    (row ? model.b(index) : model.c(index)) = sub.values.back();
}

void ScheduleBounds::validate() const {
    if (!(omega_max >= omega_min && omega_min > 0.0)) throw ConfigError("schedule needs omega_max >= omega_min > 0");
    if (!(gamma_max >= gamma_min && gamma_min >= 0.0)) throw ConfigError("schedule needs gamma_max >= gamma_min >= 0");
    if (G == 0) throw ConfigError("schedule.G must be >= 1");
}

ScheduleBounds ScheduleBounds::midpoint_constant() const {
    const double omega = 0.5 * (omega_max + omega_min);
    const double gamma = 0.5 * (gamma_max + gamma_min);
    return {omega, omega, gamma, gamma, G};
}

Coefficients schedule_coefficients(std::size_t n, const ScheduleBounds& bounds, Gamma2Rule rule) {
    if (n > bounds.G) {
        throw ConfigError("schedule iteration " + std::to_string(n) + " exceeds G = " + std::to_string(bounds.G));
    }
    const double t = static_cast<double>(n) / static_cast<double>(bounds.G);
    const double gamma_span = bounds.gamma_max - bounds.gamma_min;
    Coefficients c;
    c.omega = bounds.omega_max - (bounds.omega_max - bounds.omega_min) * t;
    c.gamma1 = bounds.gamma_max - gamma_span * t;
    c.gamma2 = rule == Gamma2Rule::Increasing ? bounds.gamma_min + gamma_span * t : bounds.gamma_min - gamma_span * t;
    return c;
}

std::vector<double> dn_velocity_update(const Particle& particle, std::span<const double> global_best,
                                       std::span<const double> neighbor1, std::span<const double> neighbor2,
                                       const Coefficients& coef, double gamma3, const Draws& draws) {
    check_particle(particle);
    const std::size_t d = particle.position.size();
    require_dim(d, global_best.size(), "global best");
    require_dim(d, neighbor1.size(), "neighbor 1");
    require_dim(d, neighbor2.size(), "neighbor 2");

    const double a1 = coef.gamma1 * draws.r1;
    const double a2 = coef.gamma2 * draws.r2;
    const double a3 = gamma3 * draws.r3;
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double l = particle.position[k];
        v[k] = coef.omega * particle.velocity[k] + a1 * (particle.best_position[k] - l) + a2 * (global_best[k] - l) +
               a3 * (neighbor1[k] - neighbor2[k]);
    }
    return v;
}

std::vector<double> hpl_velocity_update(const Particle& particle, std::span<const double> global_best,
                                        const Coefficients& coef, const Draws& draws) {
    check_particle(particle);
    const std::size_t d = particle.position.size();
    require_dim(d, global_best.size(), "global best");

    const double a1 = coef.gamma1 * draws.r1;
    const double a2 = coef.gamma2 * draws.r2;
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double l = particle.position[k];
        v[k] = coef.omega * particle.velocity[k] + a1 * (particle.best_position[k] - l) + a2 * (global_best[k] - l);
    }
    return v;
}

void clamp_velocity(std::span<double> velocity, std::span<const double> position, double beta_max, double beta_min,
                    double epsilon_floor) {
    require_dim(position.size(), velocity.size(), "velocity");
    for (std::size_t d = 0; d < velocity.size(); ++d) {
        const double mag = std::abs(position[d]);
        const double upper = std::max(beta_max * mag, epsilon_floor);
        const double lower = std::min(beta_min * mag, -epsilon_floor);
        velocity[d] = std::min(upper, std::max(lower, velocity[d]));
    }
}

FitnessContext::FitnessContext(SubVectorKind kind, std::size_t dim, std::span<const double> opposite_factors,
                               std::span<const double> opposite_bias, std::vector<SliceEntry> slice)
    : kind_(kind),
      dim_(dim),
      opposite_factors_(opposite_factors),
      opposite_bias_(opposite_bias),
      slice_(std::move(slice)) {
    for (const SliceEntry& s : slice_) {
        if (s.other >= opposite_bias_.size() || (std::size_t{s.other} + 1) * dim_ > opposite_factors_.size()) {
            throw ConfigError("fitness slice refers to index " + std::to_string(s.other) + " outside frozen factors");
        }
    }
}

FitnessContext FitnessContext::for_row(const FactorModel& model, const HdiMatrix& train, Index u) {
    model.check_compatible(train);
    return {SubVectorKind::Row, model.dim(), model.Q(), model.item_bias(), train.row_slice(u)};
}

FitnessContext FitnessContext::for_column(const FactorModel& model, const HdiMatrix& train, Index i) {
    model.check_compatible(train);
    return {SubVectorKind::Column, model.dim(), model.P(), model.user_bias(), train.col_slice(i)};
}

double fitness(std::span<const double> position, const FitnessContext& context, double lambda, FitnessKind kind) {
    const std::size_t f = context.dim();
    require_dim(f + 1, position.size(), "position");
    const auto factors = position.first(f);
    const double bias = position[f];

    double data = 0.0;
    for (const SliceEntry& s : context.slice()) {
        const double err = s.rating - dot(factors, context.opposite_factors(s.other)) - bias -
                           context.opposite_bias(s.other);
        data += kind == FitnessKind::Rmse ? err * err : std::abs(err);
    }
    const double sq = dot(factors, factors);
    const double reg = kind == FitnessKind::Rmse ? sq + bias * bias : std::sqrt(sq) + std::abs(bias);
    return data + lambda * reg;
}

void update_bests(Swarm& swarm) {
    if (swarm.particles.empty()) return;
    for (Particle& p : swarm.particles) {
        if (p.fitness < p.best_fitness) {
            p.best_fitness = p.fitness;
            p.best_position = p.position;
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < swarm.particles.size(); ++k) {
        if (swarm.particles[k].best_fitness < swarm.particles[best].best_fitness) best = k;
    }
    swarm.global_best_index = best;
    swarm.global_best = swarm.particles[best].best_position;
    swarm.global_best_fitness = swarm.particles[best].best_fitness;
}

std::pair<std::size_t, std::size_t> draw_neighbors(std::size_t k, std::size_t swarm_size, Rng& rng) {
    if (swarm_size < 3) throw ConfigError("neighbor draw needs at least 3 particles");
    std::size_t a = std::uniform_int_distribution<std::size_t>(0, swarm_size - 2)(rng);
    if (a >= k) ++a;
    std::size_t b = std::uniform_int_distribution<std::size_t>(0, swarm_size - 3)(rng);
    const std::size_t lo = std::min(a, k);
    const std::size_t hi = std::max(a, k);
    if (b >= lo) ++b;
    if (b >= hi) ++b;
    return {a, b};
}

}  // namespace swarmlfa
