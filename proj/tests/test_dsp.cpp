#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ajepa/dsp.hpp"
#include "ajepa/errors.hpp"
#include "ajepa/rng.hpp"

using namespace ajepa;

namespace {

constexpr double kPi = 3.14159265358979323846;

AudioClip make_tone(double freq, int rate, double seconds, double amp = 0.5) {
    AudioClip clip;
    clip.sample_rate = rate;
    const size_t n = static_cast<size_t>(std::llround(seconds * rate));
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i)
        clip.samples[i] =
            static_cast<float>(amp * std::sin(2.0 * kPi * freq * i / rate));
    return clip;
}

// Independent HTK mel helpers for the filterbank-center oracle.
double oracle_hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double oracle_mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

TEST_CASE("fft matches brute-force dft") {
    Rng rng(1);
    const size_t n = 64;
    std::vector<std::complex<double>> input(n);
    for (auto& x : input) x = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

    std::vector<std::complex<double>> expected(n);
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * kPi * static_cast<double>(k * j) / n;
            acc += input[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        expected[k] = acc;
    }

    std::vector<std::complex<double>> actual = input;
    fft_radix2(actual);
    for (size_t k = 0; k < n; ++k) CHECK(std::abs(actual[k] - expected[k]) < 1e-9);

    fft_radix2(actual, /*inverse=*/true);
    for (size_t k = 0; k < n; ++k) CHECK(std::abs(actual[k] - input[k]) < 1e-12);
}

TEST_CASE("fft rejects non-power-of-two sizes") {
    std::vector<std::complex<double>> bad(12);
    CHECK_THROWS_AS(fft_radix2(bad), Error);
}

TEST_CASE("resample at the same rate is the identity") {
    const AudioClip clip = make_tone(440.0, 32000, 0.25);
    const AudioClip out = resample(clip, 32000);
    REQUIRE(out.samples.size() == clip.samples.size());
    for (size_t i = 0; i < out.samples.size(); ++i)
        CHECK(out.samples[i] == clip.samples[i]);
}

TEST_CASE("resample length arithmetic") {
    const AudioClip clip = make_tone(440.0, 16000, 1.0);
    const size_t n = clip.samples.size();
    const AudioClip up = resample(clip, 32000);
    CHECK(std::llabs(static_cast<long long>(up.samples.size()) -
                     2ll * static_cast<long long>(n)) <= 1);
}

TEST_CASE("resample preserves tone frequency upward") {
    const AudioClip clip = make_tone(440.0, 16000, 1.0);
    const AudioClip out = resample(clip, 32000);
    CHECK(out.sample_rate == 32000);
    CHECK(std::abs(fft_peak_frequency(out.samples, out.sample_rate) - 440.0) < 1.0);
}

TEST_CASE("resample preserves tone frequency downward") {
    const AudioClip clip = make_tone(1000.0, 32000, 1.0);
    const AudioClip out = resample(clip, 16000);
    CHECK(std::abs(fft_peak_frequency(out.samples, out.sample_rate) - 1000.0) < 1.0);
}

TEST_CASE("resample input validation") {
    AudioClip empty;
    empty.sample_rate = 16000;
    CHECK_THROWS_AS(resample(empty, 32000), Error);

    AudioClip bad = make_tone(100.0, 16000, 0.01);
    bad.samples[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(resample(bad, 32000), Error);

    const AudioClip ok = make_tone(100.0, 16000, 0.01);
    CHECK_THROWS_AS(resample(ok, 0), Error);
}

TEST_CASE("fit_duration: exact length is unchanged") {
    const AudioClip clip = make_tone(440.0, 32000, 10.0);
    const AudioClip out = fit_duration(clip, 10.0);
    CHECK(out.samples == clip.samples);
}

TEST_CASE("fit_duration pads short clips with trailing zeros") {
    const AudioClip clip = make_tone(440.0, 32000, 5.0);
    const AudioClip out = fit_duration(clip, 10.0);
    REQUIRE(out.samples.size() == 320000);
    for (size_t i = 160000; i < 320000; ++i) CHECK(out.samples[i] == 0.0f);
    for (size_t i = 0; i < 160000; ++i) CHECK(out.samples[i] == clip.samples[i]);
}

TEST_CASE("fit_duration keeps the first samples of long clips") {
    const AudioClip clip = make_tone(440.0, 32000, 12.0);
    const AudioClip out = fit_duration(clip, 10.0);
    REQUIRE(out.samples.size() == 320000);
    for (size_t i = 0; i < 320000; ++i) CHECK(out.samples[i] == clip.samples[i]);
}

TEST_CASE("default mel config has the reference geometry") {
    const MelConfig cfg = make_mel_config(32000, 10.0, 128, 256);
    CHECK(cfg.hop == 1250);
    CHECK(cfg.win == 3125);
    CHECK(cfg.fft_size == 4096);
    CHECK(static_cast<double>(cfg.win) / cfg.hop == doctest::Approx(2.5));
    CHECK(cfg.clip_samples() == 320000);
}

TEST_CASE("mel spectrogram frame count equals n_time_bins") {
    const MelConfig cfg = make_mel_config(16000, 1.0, 64, 64);
    CHECK(cfg.hop == 250);
    const AudioClip clip = make_tone(700.0, 16000, 1.0);
    const MelSpectrogram spec = mel_spectrogram(clip, cfg);
    CHECK(spec.values.rows() == 64);
    CHECK(spec.values.cols() == 64);

    // Frame-count identity: floor((L + win - hop - win) / hop) + 1 == L / hop.
    const int64_t padded = cfg.clip_samples() + cfg.win - cfg.hop;
    CHECK((padded - cfg.win) / cfg.hop + 1 == cfg.n_time_bins);
}

TEST_CASE("mel spectrogram rejects wrong lengths") {
    const MelConfig cfg = make_mel_config(16000, 1.0, 64, 64);
    const AudioClip clip = make_tone(700.0, 16000, 0.9);
    CHECK_THROWS_AS(mel_spectrogram(clip, cfg), Error);
}

TEST_CASE("all-zero clip normalizes to zeros with silent flag") {
    const MelConfig cfg = make_mel_config(16000, 1.0, 64, 64);
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.assign(16000, 0.0f);
    const MelSpectrogram spec = mel_spectrogram(clip, cfg);
    CHECK(spec.silent);
    for (size_t i = 0; i < spec.values.size(); ++i) CHECK(spec.values[i] == 0.0f);
}

TEST_CASE("non-silent clip is standardized") {
    const MelConfig cfg = make_mel_config(16000, 1.0, 64, 64);
    const AudioClip clip = make_tone(1234.0, 16000, 1.0);
    const MelSpectrogram spec = mel_spectrogram(clip, cfg);
    CHECK_FALSE(spec.silent);
    double mean = 0.0;
    for (size_t i = 0; i < spec.values.size(); ++i) mean += spec.values[i];
    mean /= static_cast<double>(spec.values.size());
    double var = 0.0;
    for (size_t i = 0; i < spec.values.size(); ++i) {
        const double d = spec.values[i] - mean;
        var += d * d;
    }
    const double stddev = std::sqrt(var / static_cast<double>(spec.values.size()));
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(stddev - 1.0) < 1e-5);
}

TEST_CASE("pure tone activates the mel band nearest its frequency") {
    const MelConfig cfg = make_mel_config(32000, 10.0, 128, 256);
    const AudioClip clip = make_tone(1000.0, 32000, 10.0);
    const MelSpectrogram spec = mel_spectrogram(clip, cfg);

    // Nearest filter center from an independent re-derivation.
    const double mel_lo = oracle_hz_to_mel(cfg.fmin);
    const double mel_hi = oracle_hz_to_mel(cfg.fmax);
    int expected_band = 0;
    double best = 1e18;
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double center =
            oracle_mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1));
        if (std::abs(center - 1000.0) < best) {
            best = std::abs(center - 1000.0);
            expected_band = m;
        }
    }

    for (size_t t = 0; t < spec.values.cols(); ++t) {
        size_t argmax = 0;
        for (size_t m = 1; m < spec.values.rows(); ++m)
            if (spec.values(m, t) > spec.values(argmax, t)) argmax = m;
        CHECK(argmax == static_cast<size_t>(expected_band));
    }
}

TEST_CASE("filterbank structure invariants") {
    const MelConfig cfg = make_mel_config(32000, 10.0, 128, 256);
    const Tensor<float> fb = mel_filterbank(cfg);
    REQUIRE(fb.rows() == 128);
    for (size_t m = 0; m < fb.rows(); ++m) {
        bool has_positive = false;
        for (size_t k = 0; k < fb.cols(); ++k) {
            CHECK(fb(m, k) >= 0.0f);
            if (fb(m, k) > 0.0f) has_positive = true;
        }
        CHECK(has_positive);
    }
    const std::vector<double> centers = mel_filter_centers(cfg);
    for (size_t m = 1; m < centers.size(); ++m) CHECK(centers[m] > centers[m - 1]);
}

TEST_CASE("patchify reference geometry") {
    Tensor<float> spec({128, 256});
    for (size_t i = 0; i < spec.size(); ++i) spec[i] = static_cast<float>(i % 97);
    const PatchGrid grid = patchify(spec, 16);
    CHECK(grid.num_patches() == 128);
    CHECK(grid.grid_h == 8);
    CHECK(grid.grid_w == 16);
    CHECK(grid.patches.cols() == 256);
}

TEST_CASE("patchify top-left block") {
    Tensor<float> spec({32, 32});
    for (size_t i = 0; i < 32; ++i)
        for (size_t j = 0; j < 32; ++j) spec(i, j) = static_cast<float>(i * 100 + j);
    const PatchGrid grid = patchify(spec, 16);
    REQUIRE(grid.num_patches() == 4);
    for (size_t r = 0; r < 16; ++r)
        for (size_t c = 0; c < 16; ++c)
            CHECK(grid.patches(0, r * 16 + c) == spec(r, c));
    // Patch 1 is the top-right block (row-major patch order).
    CHECK(grid.patches(1, 0) == spec(0, 16));
}

TEST_CASE("patchify rejects non-divisible dimensions") {
    Tensor<float> spec({120, 256});
    try {
        patchify(spec, 16);
        CHECK(false);
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("120") != std::string::npos);
        CHECK(msg.find("16") != std::string::npos);
    }
}

TEST_CASE("patchify round trip is bit-exact on random shapes") {
    Rng rng(42);
    for (int iter = 0; iter < 20; ++iter) {
        const size_t side = 1 + rng.uniform_index(8);
        const size_t h = side * (1 + rng.uniform_index(6));
        const size_t w = side * (1 + rng.uniform_index(6));
        Tensor<float> spec({h, w});
        for (auto& x : spec.v) x = static_cast<float>(rng.uniform(-10.0, 10.0));
        const Tensor<float> back = unpatchify(patchify(spec, side));
        REQUIRE(back.shape == spec.shape);
        for (size_t i = 0; i < spec.size(); ++i) CHECK(back[i] == spec[i]);
    }
}

TEST_CASE("single-patch and constant grids") {
    Tensor<float> spec({16, 16});
    for (size_t i = 0; i < spec.size(); ++i) spec[i] = static_cast<float>(i);
    const PatchGrid grid = patchify(spec, 16);
    REQUIRE(grid.num_patches() == 1);
    for (size_t i = 0; i < 256; ++i) CHECK(grid.patches[i] == spec[i]);

    PatchGrid constant;
    constant.grid_h = 2;
    constant.grid_w = 3;
    constant.patch_side = 4;
    constant.patches = Tensor<float>({6, 16});
    constant.patches.fill(3.25f);
    const Tensor<float> back = unpatchify(constant);
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == 3.25f);
}

TEST_CASE("spectrogram golden file round trip") {
    const MelConfig cfg = make_mel_config(16000, 1.0, 64, 64);
    const MelSpectrogram spec = mel_spectrogram(make_tone(500.0, 16000, 1.0), cfg);
    const std::string path =
        (std::filesystem::temp_directory_path() / "ajepa_spec_test.bin").string();
    save_spectrogram(path, spec);
    const Tensor<float> loaded = load_spectrogram(path);
    REQUIRE(loaded.shape == spec.values.shape);
    for (size_t i = 0; i < loaded.size(); ++i) CHECK(loaded[i] == spec.values[i]);
    std::remove(path.c_str());
}
