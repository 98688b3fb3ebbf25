#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "swarmlfa/hdi_data.hpp"

namespace swarmlfa {

/// Biased latent factor model: r_hat(u, i) = p_u . q_i + b_u + c_i.
///
/// P and Q are stored row-major (|U| x f and |I| x f).
class FactorModel {
public:
    FactorModel() = default;
    FactorModel(std::size_t user_count, std::size_t item_count, std::size_t dim);

    std::size_t user_count() const noexcept { return b_.size(); }
    std::size_t item_count() const noexcept { return c_.size(); }
    std::size_t dim() const noexcept { return dim_; }

    std::span<double> p(Index u) noexcept { return {P_.data() + std::size_t{u} * dim_, dim_}; }
    std::span<const double> p(Index u) const noexcept { return {P_.data() + std::size_t{u} * dim_, dim_}; }
    std::span<double> q(Index i) noexcept { return {Q_.data() + std::size_t{i} * dim_, dim_}; }
    std::span<const double> q(Index i) const noexcept { return {Q_.data() + std::size_t{i} * dim_, dim_}; }
    double& b(Index u) noexcept { return b_[u]; }
    double b(Index u) const noexcept { return b_[u]; }
    double& c(Index i) noexcept { return c_[i]; }
    double c(Index i) const noexcept { return c_[i]; }

    std::span<double> P() noexcept { return P_; }
    std::span<const double> P() const noexcept { return P_; }
    std::span<double> Q() noexcept { return Q_; }
    std::span<const double> Q() const noexcept { return Q_; }
    std::span<double> user_bias() noexcept { return b_; }
    std::span<const double> user_bias() const noexcept { return b_; }
    std::span<double> item_bias() noexcept { return c_; }
    std::span<const double> item_bias() const noexcept { return c_; }

    /// Throws ConfigError unless the model covers matrix's dimensions.
    void check_compatible(const HdiMatrix& matrix) const;
    bool all_finite() const noexcept;

    friend bool operator==(const FactorModel&, const FactorModel&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> P_;
    std::vector<double> Q_;
    std::vector<double> b_;
    std::vector<double> c_;
};

/// P and Q uniform on (0, scale], biases zero. Deterministic per seed.
FactorModel init_model(std::size_t user_count, std::size_t item_count, std::size_t dim, std::uint64_t seed,
                       double scale = 0.1);

double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// Unchecked prediction used by inner loops.
inline double predict_unchecked(const FactorModel& m, Index u, Index i) noexcept {
    return dot(m.p(u), m.q(i)) + m.b(u) + m.c(i);
}

/// p_u . q_i + b_u + c_i, unclipped. Throws ConfigError on out-of-range ids.
double predict(const FactorModel& model, Index u, Index i);

/// 1/2 sum (r - r_hat)^2 + lambda/2 sum (|p_u|^2 + |q_i|^2 + b_u^2 + c_i^2),
/// with the regularizer summed once per known entry.
/// Throws InputError on an empty entry set.
double loss(const FactorModel& model, std::span<const RatingEntry> entries, double lambda);

/// Gradient of one entry's term of loss() with respect to p_u, q_i, b_u, c_i.
struct EntryGradient {
    std::vector<double> g_p;
    std::vector<double> g_q;
    double g_b = 0.0;
    double g_c = 0.0;
};

EntryGradient entry_gradient(const FactorModel& model, const RatingEntry& entry, double lambda);

/// Text snapshot: a header line "swarmlfa-model 1 <users> <items> <f>", then
/// one line per P row, per Q row, then b and c, each value in %.17g.
void save_model(std::ostream& out, const FactorModel& model);
/// Throws InputError on a truncated or malformed snapshot.
FactorModel load_model(std::istream& in);

}  // namespace swarmlfa
