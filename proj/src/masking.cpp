#include "ajepa/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ajepa/errors.hpp"

namespace ajepa {

void MaskSpec::validate() const {
    if (masked.empty() || visible.empty())
        throw Error("mask spec: both masked and visible must be non-empty");
    if (masked.size() + visible.size() != num_patches)
        throw Error("mask spec: partition does not cover all patches");
    std::vector<bool> seen(num_patches, false);
    for (const auto* list : {&masked, &visible}) {
        for (size_t i = 0; i < list->size(); ++i) {
            const size_t idx = (*list)[i];
            if (idx >= num_patches || seen[idx])
                throw Error("mask spec: duplicate or out-of-range index");
            if (i > 0 && (*list)[i - 1] >= idx)
                throw Error("mask spec: index lists must be sorted ascending");
            seen[idx] = true;
        }
    }
}

double sample_batch_ratio(Rng& rng, double lo, double hi) {
    if (!(lo > 0.0) || !(hi < 1.0) || lo > hi)
        throw Error("mask ratio bounds must satisfy 0 < lo <= hi < 1, got [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
    if (lo == hi) return lo;
    return rng.uniform(lo, hi);
}

MaskSpec sample_mask(Rng& rng, size_t num_patches, double ratio) {
    if (num_patches < 2)
        throw Error("sample_mask: need at least 2 patches, got " +
                    std::to_string(num_patches));
    if (!(ratio > 0.0) || !(ratio < 1.0))
        throw Error("sample_mask: ratio must lie in (0, 1), got " +
                    std::to_string(ratio));
    const size_t n_masked = static_cast<size_t>(
        std::llround(ratio * static_cast<double>(num_patches)));
    if (n_masked < 1 || n_masked >= num_patches)
        throw Error("sample_mask: round(ratio * num_patches) = " +
                    std::to_string(n_masked) + " leaves a degenerate partition");

    // Partial Fisher-Yates: the first n_masked slots become the masked set.
    std::vector<size_t> perm(num_patches);
    std::iota(perm.begin(), perm.end(), size_t{0});
    for (size_t i = 0; i < n_masked; ++i) {
        const size_t j = i + static_cast<size_t>(rng.uniform_index(num_patches - i));
        std::swap(perm[i], perm[j]);
    }

    MaskSpec spec;
    spec.num_patches = num_patches;
    spec.ratio = ratio;
    spec.masked.assign(perm.begin(), perm.begin() + static_cast<long>(n_masked));
    spec.visible.assign(perm.begin() + static_cast<long>(n_masked), perm.end());
    std::sort(spec.masked.begin(), spec.masked.end());
    std::sort(spec.visible.begin(), spec.visible.end());
    return spec;
}

}  // namespace ajepa
