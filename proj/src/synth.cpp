#include "ajepa/synth.hpp"

#include <cmath>
#include <filesystem>

#include "ajepa/errors.hpp"
#include "ajepa/wav.hpp"

namespace ajepa {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Class frequency bands (Hz). Chirps share one band and differ only in
// sweep direction, which keeps them hard for untrained features.
constexpr double kToneLowBand[2] = {200.0, 400.0};
constexpr double kToneHighBand[2] = {2000.0, 4000.0};
constexpr double kChirpBand[2] = {400.0, 3600.0};

}  // namespace

AudioClip synth_clip(int class_id, const SynthSpec& spec, Rng& rng) {
    if (class_id < 0 || class_id >= static_cast<int>(synth_class_names().size()))
        throw Error("synth_clip: unknown class id " + std::to_string(class_id));

    const size_t n = static_cast<size_t>(std::llround(spec.duration * spec.sample_rate));
    AudioClip clip;
    clip.sample_rate = spec.sample_rate;
    clip.samples.resize(n, 0.0f);

    const double amp = rng.uniform(0.25, 0.7);
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    // Tonal classes get a noise floor so that raw spectral energy alone
    // does not identify them.
    const double noise_amp = rng.uniform(0.05, 0.15);

    auto tone = [&](double lo, double hi) {
        const double freq = rng.uniform(lo, hi);
        for (size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / spec.sample_rate;
            clip.samples[i] = static_cast<float>(
                amp * std::sin(2.0 * kPi * freq * t + phase) +
                noise_amp * (2.0 * rng.uniform() - 1.0));
        }
    };
    auto chirp = [&](double f_start, double f_end) {
        const double rate = (f_end - f_start) / spec.duration;
        for (size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / spec.sample_rate;
            const double arg = 2.0 * kPi * (f_start * t + 0.5 * rate * t * t) + phase;
            clip.samples[i] = static_cast<float>(
                amp * std::sin(arg) + noise_amp * (2.0 * rng.uniform() - 1.0));
        }
    };

    switch (class_id) {
        case 0:
            tone(kToneLowBand[0], kToneLowBand[1]);
            break;
        case 1:
            tone(kToneHighBand[0], kToneHighBand[1]);
            break;
        case 2: {
            const double lo = rng.uniform(kChirpBand[0], kChirpBand[0] + 200.0);
            const double hi = rng.uniform(kChirpBand[1] - 400.0, kChirpBand[1]);
            chirp(lo, hi);
            break;
        }
        case 3: {
            const double lo = rng.uniform(kChirpBand[0], kChirpBand[0] + 200.0);
            const double hi = rng.uniform(kChirpBand[1] - 400.0, kChirpBand[1]);
            chirp(hi, lo);
            break;
        }
        case 4:
            for (size_t i = 0; i < n; ++i)
                clip.samples[i] = static_cast<float>(amp * (2.0 * rng.uniform() - 1.0));
            break;
    }

    for (float& s : clip.samples) s = std::clamp(s, -0.95f, 0.95f);
    return clip;
}

std::vector<ManifestRow> synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.train_per_class < 1 || spec.test_per_class < 1)
        throw Error("synth_dataset: per-class counts must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir))
        throw Error("synth_dataset: cannot create output dir: " + out_dir);

    const Rng root(spec.seed);
    std::vector<ManifestRow> rows;
    const int per_class = spec.train_per_class + spec.test_per_class;
    for (int cls = 0; cls < static_cast<int>(synth_class_names().size()); ++cls) {
        for (int i = 0; i < per_class; ++i) {
            Rng clip_rng = root.split(static_cast<uint64_t>(cls), static_cast<uint64_t>(i));
            const AudioClip clip = synth_clip(cls, spec, clip_rng);

            const bool is_train = i < spec.train_per_class;
            const std::string name = synth_class_names()[static_cast<size_t>(cls)] + "_" +
                                     (is_train ? "train" : "test") + "_" +
                                     std::to_string(is_train ? i : i - spec.train_per_class) +
                                     ".wav";
            const std::string path = (std::filesystem::path(out_dir) / name).string();
            write_wav(path, clip);

            ManifestRow row;
            row.path = name;  // relative to the manifest location
            row.label = cls;
            row.split = is_train ? "train" : "test";
            rows.push_back(std::move(row));
        }
    }
    save_manifest((std::filesystem::path(out_dir) / "manifest.tsv").string(), rows);
    return rows;
}

}  // namespace ajepa
