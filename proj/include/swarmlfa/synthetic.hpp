#pragma once

#include <cstddef>
#include <cstdint>

#include "swarmlfa/hdi_data.hpp"

namespace swarmlfa {

/// Rank-r ground truth: factors uniform on [0, 1), rating =
/// offset + scale * (u . v) / rank + N(0, noise^2). Exactly
/// round(density * users * items) distinct cells are sampled.
struct SynthSpec {
    std::size_t users = 200;
    std::size_t items = 300;
    std::size_t rank = 5;
    double density = 0.05;
    double noise = 0.1;
    double offset = 1.0;
    double scale = 4.0;
    std::uint64_t seed = 1;

    void validate() const;
};

HdiMatrix generate_synthetic(const SynthSpec& spec);

}  // namespace swarmlfa
