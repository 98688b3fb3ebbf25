#include "swarmlfa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "swarmlfa/errors.hpp"
#include "swarmlfa/random.hpp"

namespace swarmlfa {

void SynthSpec::validate() const {
    if (users == 0 || items == 0) throw ConfigError("synthetic matrix needs users, items >= 1");
    if (rank == 0) throw ConfigError("synthetic rank must be >= 1");
    if (!(density > 0.0 && density <= 1.0)) throw ConfigError("synthetic density must be in (0, 1]");
    if (!(noise >= 0.0)) throw ConfigError("synthetic noise must be >= 0");
}

HdiMatrix generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, {0x5e7}));

    std::vector<double> U(spec.users * spec.rank), V(spec.items * spec.rank);
    for (double& x : U) x = uniform01(rng);
    for (double& x : V) x = uniform01(rng);

    const std::size_t cells = spec.users * spec.items;
    const auto wanted = std::max<std::size_t>(
        1, std::min(cells, static_cast<std::size_t>(std::llround(spec.density * static_cast<double>(cells)))));

    // Floyd's sampling: `wanted` distinct cells, then sorted for a stable order.
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(wanted * 2);
    for (std::size_t j = cells - wanted; j < cells; ++j) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::size_t> picked(chosen.begin(), chosen.end());
    std::sort(picked.begin(), picked.end());
    std::shuffle(picked.begin(), picked.end(), rng);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<RatingEntry> entries;
    entries.reserve(picked.size());
    for (std::size_t cell : picked) {
        const auto u = static_cast<Index>(cell / spec.items);
        const auto i = static_cast<Index>(cell % spec.items);
        double s = 0.0;
        for (std::size_t k = 0; k < spec.rank; ++k) s += U[u * spec.rank + k] * V[i * spec.rank + k];
        const double r = spec.offset + spec.scale * s / static_cast<double>(spec.rank) + spec.noise * gauss(rng);
        entries.push_back({u, i, r});
    }
    return HdiMatrix(spec.users, spec.items, std::move(entries));
}

}  // namespace swarmlfa
