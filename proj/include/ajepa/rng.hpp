#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

namespace ajepa {

// Deterministic random number generator used everywhere in the project.
//
// Engine: xoshiro256++ seeded through splitmix64. Both algorithms are fully
// specified here (no reliance on standard-library distribution internals),
// so a given seed produces the same stream on every platform. The seed and
// the draw order are part of the reproducibility contract: any change to
// either is a breaking change for checkpoints and golden files.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) {
        // splitmix64 expansion of the seed into the 256-bit state.
        uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    // xoshiro256++ next().
    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1), 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi].
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    uint64_t uniform_index(uint64_t n) {
        // Rejection sampling to remove modulo bias.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller (cosine branch; two uniforms per draw).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Standard normal truncated to [-2, 2] (rejection sampling), rescaled so
    // the resulting distribution has unit standard deviation again.
    double truncated_normal() {
        double z = normal();
        while (z < -2.0 || z > 2.0) z = normal();
        return z / kTruncStd;
    }

    // Derives an independent child generator. The derivation hashes the
    // parent seed material with the stream id through splitmix64, so
    // split(a) and split(b) give uncorrelated streams for a != b and the
    // parent stream is left untouched.
    Rng split(uint64_t stream) const {
        uint64_t x = state_[0] ^ rotl(state_[2], 29);
        x ^= 0x9e3779b97f4a7c15ULL * (stream + 1);
        Rng child(0);
        uint64_t s = splitmix64(x);
        for (auto& word : child.state_) word = splitmix64(s);
        return child;
    }

    Rng split(uint64_t stream_a, uint64_t stream_b) const {
        return split(stream_a).split(stream_b);
    }

    std::array<uint64_t, 4> state() const { return state_; }
    void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

private:
    static constexpr double kPi = 3.14159265358979323846;
    // Std of a standard normal truncated at two sigma.
    static constexpr double kTruncStd = 0.87962566103423978;

    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::array<uint64_t, 4> state_{};
};

}  // namespace ajepa
