#pragma once

#include <cstddef>
#include <vector>

#include "ajepa/rng.hpp"

namespace ajepa {

// Disjoint visible/masked partition of patch indices 0..num_patches-1.
// Both index lists are sorted ascending; |masked| = round(ratio * num_patches)
// with half-up rounding.
struct MaskSpec {
    std::vector<size_t> masked;
    std::vector<size_t> visible;
    size_t num_patches = 0;
    double ratio = 0.0;

    void validate() const;
};

// Uniform draw in [lo, hi]; one call per training batch. Requires
// 0 < lo <= hi < 1.
double sample_batch_ratio(Rng& rng, double lo, double hi);

// Uniform random subset of size round(ratio * num_patches) via partial
// Fisher-Yates shuffle. Degenerate partitions (nothing masked or nothing
// visible) are rejected.
MaskSpec sample_mask(Rng& rng, size_t num_patches, double ratio);

}  // namespace ajepa
