#include <doctest.h>

#include <cmath>
#include <set>

#include "ajepa/rng.hpp"

using namespace ajepa;

TEST_CASE("same seed gives identical streams") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
    Rng a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++equal;
    CHECK(equal == 0);
}

TEST_CASE("uniform stays in range and covers it") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("normal moments") {
    Rng rng(11);
    double sum = 0.0, sumsq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("truncated normal stays within rescaled bounds and has unit std") {
    Rng rng(13);
    double sumsq = 0.0;
    const int n = 100000;
    const double bound = 2.0 / 0.87962566103423978 + 1e-9;
    for (int i = 0; i < n; ++i) {
        const double z = rng.truncated_normal();
        CHECK(std::abs(z) <= bound);
        sumsq += z * z;
    }
    CHECK(std::abs(std::sqrt(sumsq / n) - 1.0) < 0.02);
}

TEST_CASE("split streams are independent of parent and each other") {
    const Rng parent(99);
    Rng a = parent.split(0);
    Rng a2 = parent.split(0);
    CHECK(a.next_u64() == a2.next_u64());
    Rng c = parent.split(0);
    Rng d = parent.split(1);
    int equal = 0;
    for (int i = 0; i < 64; ++i)
        if (c.next_u64() == d.next_u64()) ++equal;
    CHECK(equal == 0);
}

TEST_CASE("uniform_index is unbiased over small ranges") {
    Rng rng(5);
    int counts[7] = {0};
    const int n = 70000;
    for (int i = 0; i < n; ++i) counts[rng.uniform_index(7)]++;
    for (int c : counts) CHECK(std::abs(c - n / 7) < 600);
}

TEST_CASE("state round trip") {
    Rng rng(3);
    rng.next_u64();
    const auto saved = rng.state();
    const uint64_t expected = rng.next_u64();
    Rng restored(0);
    restored.set_state(saved);
    CHECK(restored.next_u64() == expected);
}
