#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ajepa/config.hpp"

namespace ajepa {

// Five synthetic classes with per-clip frequency/phase/amplitude jitter.
// Labels are the indices into this list.
inline const std::vector<std::string>& synth_class_names() {
    static const std::vector<std::string> names = {"tone_low", "tone_high", "chirp_up",
                                                   "chirp_down", "noise"};
    return names;
}

struct SynthSpec {
    int sample_rate = 16000;
    double duration = 1.0;
    int train_per_class = 40;
    int test_per_class = 20;
    uint64_t seed = 0;
};

// Synthesizes one clip of the given class (0..4) from its own generator.
AudioClip synth_clip(int class_id, const SynthSpec& spec, Rng& rng);

// Writes WAV files plus `manifest.tsv` under out_dir; returns the manifest
// rows. Deterministic given the seed (byte-identical files across runs).
std::vector<ManifestRow> synth_dataset(const SynthSpec& spec, const std::string& out_dir);

}  // namespace ajepa
