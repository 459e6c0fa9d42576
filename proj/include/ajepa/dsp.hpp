#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ajepa/tensor.hpp"

namespace ajepa {

// Raw mono waveform. Samples are nominally in [-1, 1]; the WAV reader clamps
// on ingestion, later stages only require finiteness.
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 0;
};

// Throws Error if the clip is empty, has non-finite samples or a
// non-positive sample rate.
void validate_clip(const AudioClip& clip);

// Spectrogram geometry. hop/win/fft are tied to the rest of the fields:
//   win      = round(2.5 * hop)
//   hop      = duration * sample_rate / n_time_bins   (must divide exactly)
//   fft_size = next power of two >= win
// make_mel_config derives them; validate() re-checks the full invariant set.
struct MelConfig {
    int sample_rate = 32000;
    double duration = 10.0;
    int n_mels = 128;
    int n_time_bins = 256;
    int hop = 1250;
    int win = 3125;
    int fft_size = 4096;
    double fmin = 0.0;
    double fmax = 16000.0;
    double log_floor = 1e-8;

    int64_t clip_samples() const { return static_cast<int64_t>(hop) * n_time_bins; }
    void validate() const;
};

// Derives hop/win/fft from the geometry (fmax < 0 means Nyquist).
MelConfig make_mel_config(int sample_rate, double duration, int n_mels,
                          int n_time_bins, double fmin = 0.0, double fmax = -1.0,
                          double log_floor = 1e-8);

// Normalized log-mel spectrogram, values [n_mels x n_time_bins].
// `silent` marks clips whose bins had std below 1e-12 before normalization
// (the divide was skipped).
struct MelSpectrogram {
    Tensor<float> values;
    MelConfig config;
    bool silent = false;
};

// Flattened non-overlapping patches in frequency-major order: patch
// (i, j) covers mel rows [s*i, s*i+s) and frames [s*j, s*j+s) and sits at
// index i * grid_w + j. Within a patch, values are row-major over
// (mel row, frame).
struct PatchGrid {
    Tensor<float> patches;  // [grid_h * grid_w x patch_side^2]
    size_t grid_h = 0;
    size_t grid_w = 0;
    size_t patch_side = 0;

    size_t num_patches() const { return grid_h * grid_w; }
};

// Band-limited windowed-sinc resampling. Output length is
// round(input_length * target_rate / input_rate); a tone below both Nyquist
// limits keeps its frequency. Same-rate input is returned unchanged.
AudioClip resample(const AudioClip& clip, int target_rate);

// Forces the clip to round(seconds * sample_rate) samples: shorter inputs
// are zero-padded at the end, longer inputs keep their first N samples.
AudioClip fit_duration(const AudioClip& clip, double seconds);

// STFT (symmetric Hann of length win, zero-padding of win - hop split
// symmetrically across the ends so that frame count == n_time_bins), power
// spectrum, HTK-mel triangular filterbank, natural log with additive floor,
// then per-instance standardization over all bins.
MelSpectrogram mel_spectrogram(const AudioClip& clip, const MelConfig& config);

// Triangular HTK-mel filterbank, rows [n_mels x (fft_size/2 + 1)].
Tensor<float> mel_filterbank(const MelConfig& config);

// Center frequency (Hz) of each mel filter.
std::vector<double> mel_filter_centers(const MelConfig& config);

PatchGrid patchify(const Tensor<float>& spec_values, size_t patch_side);
PatchGrid patchify(const MelSpectrogram& spec, size_t patch_side);

// Exact inverse of patchify (bit-exact round trip).
Tensor<float> unpatchify(const PatchGrid& grid);

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse = false);

// Frequency (Hz) of the dominant spectral peak, estimated from a Hann-
// windowed power-of-two FFT with parabolic interpolation of the peak bin.
double fft_peak_frequency(const std::vector<float>& samples, int sample_rate);

// Golden-file container: magic, dims, row-major 32-bit floats.
void save_spectrogram(const std::string& path, const MelSpectrogram& spec);
Tensor<float> load_spectrogram(const std::string& path);

}  // namespace ajepa
