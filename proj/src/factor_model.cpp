#include "swarmlfa/factor_model.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "swarmlfa/errors.hpp"
#include "swarmlfa/random.hpp"

namespace swarmlfa {

namespace {

constexpr const char* kSnapshotMagic = "swarmlfa-model";
constexpr int kSnapshotVersion = 1;

void write_row(std::ostream& out, std::span<const double> values) {
    char buf[32];
    for (std::size_t k = 0; k < values.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", values[k]);
        if (k) out << ' ';
        out << buf;
    }
    out << '\n';
}

void read_values(std::istream& in, std::span<double> dest, const char* what) {
    for (double& v : dest) {
        std::string token;
        if (!(in >> token)) throw InputError(std::string("model snapshot truncated in ") + what);
        try {
            std::size_t used = 0;
            v = std::stod(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw InputError(std::string("model snapshot has malformed value '") + token + "' in " + what);
        }
    }
}

}  // namespace

FactorModel::FactorModel(std::size_t user_count, std::size_t item_count, std::size_t dim)
    : dim_(dim), P_(user_count * dim), Q_(item_count * dim), b_(user_count), c_(item_count) {}

void FactorModel::check_compatible(const HdiMatrix& matrix) const {
    if (matrix.user_count() > user_count() || matrix.item_count() > item_count()) {
        throw ConfigError("data is " + std::to_string(matrix.user_count()) + "x" +
                          std::to_string(matrix.item_count()) + " but model is " + std::to_string(user_count()) +
                          "x" + std::to_string(item_count()));
    }
}

bool FactorModel::all_finite() const noexcept {
    for (const auto* v : {&P_, &Q_, &b_, &c_}) {
        for (double x : *v) {
            if (!std::isfinite(x)) return false;
        }
    }
    return true;
}

FactorModel init_model(std::size_t user_count, std::size_t item_count, std::size_t dim, std::uint64_t seed,
                       double scale) {
    if (dim == 0) throw ConfigError("latent dimension f must be >= 1");
    if (user_count == 0 || item_count == 0) throw ConfigError("user and item counts must be >= 1");
    if (!(scale > 0.0)) throw ConfigError("init scale must be > 0");

    FactorModel model(user_count, item_count, dim);
    Rng rng(derive_seed(seed, {0x1a17}));
    // 1 - U[0,1) lies in (0, 1].
    for (double& v : model.P()) v = scale * (1.0 - uniform01(rng));
    for (double& v : model.Q()) v = scale * (1.0 - uniform01(rng));
    return model;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double predict(const FactorModel& model, Index u, Index i) {
    if (u >= model.user_count() || i >= model.item_count()) {
        throw ConfigError("prediction index (" + std::to_string(u) + ", " + std::to_string(i) + ") out of range");
    }
    return predict_unchecked(model, u, i);
}

double loss(const FactorModel& model, std::span<const RatingEntry> entries, double lambda) {
    if (entries.empty()) throw InputError("loss over an empty entry set");
    double squared = 0.0;
    double reg = 0.0;
    for (const RatingEntry& e : entries) {
        const double err = e.rating - predict(model, e.user, e.item);
        squared += err * err;
        reg += dot(model.p(e.user), model.p(e.user)) + dot(model.q(e.item), model.q(e.item)) +
               model.b(e.user) * model.b(e.user) + model.c(e.item) * model.c(e.item);
    }
    return 0.5 * squared + 0.5 * lambda * reg;
}

EntryGradient entry_gradient(const FactorModel& model, const RatingEntry& entry, double lambda) {
    const double err = entry.rating - predict(model, entry.user, entry.item);
    const auto p = model.p(entry.user);
    const auto q = model.q(entry.item);
    EntryGradient g;
    g.g_p.resize(model.dim());
    g.g_q.resize(model.dim());
    for (std::size_t k = 0; k < model.dim(); ++k) {
        g.g_p[k] = -err * q[k] + lambda * p[k];
        g.g_q[k] = -err * p[k] + lambda * q[k];
    }
    g.g_b = -err + lambda * model.b(entry.user);
    g.g_c = -err + lambda * model.c(entry.item);
    return g;
}

void save_model(std::ostream& out, const FactorModel& model) {
    out << kSnapshotMagic << ' ' << kSnapshotVersion << ' ' << model.user_count() << ' ' << model.item_count()
        << ' ' << model.dim() << '\n';
    for (Index u = 0; u < model.user_count(); ++u) write_row(out, model.p(u));
    for (Index i = 0; i < model.item_count(); ++i) write_row(out, model.q(i));
    write_row(out, model.user_bias());
    write_row(out, model.item_bias());
}

FactorModel load_model(std::istream& in) {
    std::string magic;
    int version = 0;
    std::size_t users = 0, items = 0, dim = 0;
    if (!(in >> magic >> version >> users >> items >> dim) || magic != kSnapshotMagic) {
        throw InputError("not a model snapshot");
    }
    if (version != kSnapshotVersion) throw InputError("unsupported snapshot version " + std::to_string(version));
    if (dim == 0) throw InputError("model snapshot has f = 0");
    FactorModel model(users, items, dim);
    read_values(in, model.P(), "P");
    read_values(in, model.Q(), "Q");
    read_values(in, model.user_bias(), "b");
    read_values(in, model.item_bias(), "c");
    return model;
}

}  // namespace swarmlfa
