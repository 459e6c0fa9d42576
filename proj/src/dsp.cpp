#include "ajepa/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ajepa/errors.hpp"

namespace ajepa {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_power_of_two(int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

int next_power_of_two(int n) {
    int p = 1;
    while (p < n) p *= 2;
    return p;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = kPi * x;
    return std::sin(px) / px;
}

}  // namespace

void validate_clip(const AudioClip& clip) {
    if (clip.samples.empty()) throw Error("audio clip is empty");
    if (clip.sample_rate <= 0)
        throw Error("audio clip sample rate must be positive, got " +
                    std::to_string(clip.sample_rate));
    for (float s : clip.samples) {
        if (!std::isfinite(s)) throw Error("audio clip contains non-finite samples");
    }
}

void MelConfig::validate() const {
    if (sample_rate <= 0) throw Error("mel config: sample_rate must be positive");
    if (duration <= 0.0) throw Error("mel config: duration must be positive");
    if (n_mels <= 0 || n_time_bins <= 0)
        throw Error("mel config: n_mels and n_time_bins must be positive");
    if (hop <= 0) throw Error("mel config: hop must be positive");
    if (win != static_cast<int>(std::llround(2.5 * hop)))
        throw Error("mel config: win must equal round(2.5 * hop), got win=" +
                    std::to_string(win) + " hop=" + std::to_string(hop));
    if (fft_size < win)
        throw Error("mel config: fft_size must be >= win");
    if (!is_power_of_two(fft_size))
        throw Error("mel config: fft_size must be a power of two, got " +
                    std::to_string(fft_size));
    if (std::llround(duration * sample_rate) != clip_samples())
        throw Error("mel config: duration * sample_rate must equal hop * n_time_bins (" +
                    std::to_string(std::llround(duration * sample_rate)) + " vs " +
                    std::to_string(clip_samples()) + ")");
    if (fmin < 0.0 || fmax <= fmin || fmax > sample_rate / 2.0 + 1e-9)
        throw Error("mel config: need 0 <= fmin < fmax <= sample_rate / 2");
    if (log_floor <= 0.0) throw Error("mel config: log_floor must be positive");
}

MelConfig make_mel_config(int sample_rate, double duration, int n_mels,
                          int n_time_bins, double fmin, double fmax,
                          double log_floor) {
    MelConfig cfg;
    cfg.sample_rate = sample_rate;
    cfg.duration = duration;
    cfg.n_mels = n_mels;
    cfg.n_time_bins = n_time_bins;
    if (n_time_bins <= 0) throw Error("mel config: n_time_bins must be positive");
    const int64_t total = std::llround(duration * static_cast<double>(sample_rate));
    if (total % n_time_bins != 0)
        throw Error("mel config: duration * sample_rate (" + std::to_string(total) +
                    ") is not divisible by n_time_bins (" + std::to_string(n_time_bins) + ")");
    cfg.hop = static_cast<int>(total / n_time_bins);
    cfg.win = static_cast<int>(std::llround(2.5 * cfg.hop));
    cfg.fft_size = next_power_of_two(cfg.win);
    cfg.fmin = fmin;
    cfg.fmax = fmax < 0.0 ? sample_rate / 2.0 : fmax;
    cfg.log_floor = log_floor;
    cfg.validate();
    return cfg;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    validate_clip(clip);
    if (target_rate <= 0)
        throw Error("resample: target rate must be positive, got " +
                    std::to_string(target_rate));
    if (target_rate == clip.sample_rate) return clip;

    const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
    const int64_t in_len = static_cast<int64_t>(clip.samples.size());
    const int64_t out_len = std::llround(static_cast<double>(in_len) * ratio);

    // Cutoff at the lower of the two Nyquist limits, in cycles per input
    // sample. The kernel widens by the decimation factor when downsampling.
    const double fc = 0.5 * std::min(1.0, ratio);
    const double half_width = 32.0 / std::min(1.0, ratio);

    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(static_cast<size_t>(out_len));

    for (int64_t n = 0; n < out_len; ++n) {
        const double t = static_cast<double>(n) / ratio;
        const int64_t k_lo = static_cast<int64_t>(std::ceil(t - half_width));
        const int64_t k_hi = static_cast<int64_t>(std::floor(t + half_width));
        double acc = 0.0;
        double wsum = 0.0;
        for (int64_t k = k_lo; k <= k_hi; ++k) {
            const double u = t - static_cast<double>(k);
            // Blackman window over [-half_width, half_width].
            const double wu = u / half_width;
            const double window =
                0.42 + 0.5 * std::cos(kPi * wu) + 0.08 * std::cos(2.0 * kPi * wu);
            const double h = 2.0 * fc * sinc(2.0 * fc * u) * window;
            wsum += h;
            if (k >= 0 && k < in_len) acc += static_cast<double>(clip.samples[k]) * h;
        }
        out.samples[static_cast<size_t>(n)] =
            static_cast<float>(wsum != 0.0 ? acc / wsum : acc);
    }
    return out;
}

AudioClip fit_duration(const AudioClip& clip, double seconds) {
    validate_clip(clip);
    if (seconds <= 0.0) throw Error("fit_duration: seconds must be positive");
    const size_t target =
        static_cast<size_t>(std::llround(seconds * clip.sample_rate));
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples = clip.samples;
    out.samples.resize(target, 0.0f);  // crops the tail or zero-pads the end
    return out;
}

Tensor<float> mel_filterbank(const MelConfig& config) {
    const int n_bins = config.fft_size / 2 + 1;
    Tensor<float> fb({static_cast<size_t>(config.n_mels), static_cast<size_t>(n_bins)});

    const double mel_lo = hz_to_mel(config.fmin);
    const double mel_hi = hz_to_mel(config.fmax);
    std::vector<double> hz_points(config.n_mels + 2);
    for (int i = 0; i < config.n_mels + 2; ++i) {
        const double mel = mel_lo + (mel_hi - mel_lo) * i / (config.n_mels + 1);
        hz_points[i] = mel_to_hz(mel);
    }

    for (int m = 0; m < config.n_mels; ++m) {
        const double left = hz_points[m];
        const double center = hz_points[m + 1];
        const double right = hz_points[m + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double freq =
                static_cast<double>(k) * config.sample_rate / config.fft_size;
            double w = 0.0;
            if (freq > left && freq <= center) {
                w = (freq - left) / (center - left);
            } else if (freq > center && freq < right) {
                w = (right - freq) / (right - center);
            }
            fb(static_cast<size_t>(m), static_cast<size_t>(k)) = static_cast<float>(w);
        }
    }
    return fb;
}

std::vector<double> mel_filter_centers(const MelConfig& config) {
    const double mel_lo = hz_to_mel(config.fmin);
    const double mel_hi = hz_to_mel(config.fmax);
    std::vector<double> centers(config.n_mels);
    for (int m = 0; m < config.n_mels; ++m) {
        const double mel = mel_lo + (mel_hi - mel_lo) * (m + 1) / (config.n_mels + 1);
        centers[m] = mel_to_hz(mel);
    }
    return centers;
}

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (!is_power_of_two(static_cast<int64_t>(n)))
        throw Error("fft: size must be a power of two, got " + std::to_string(n));

    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

double fft_peak_frequency(const std::vector<float>& samples, int sample_rate) {
    if (samples.size() < 16) throw Error("fft_peak_frequency: too few samples");
    size_t n = 1;
    while (n * 2 <= samples.size() && n < (1u << 20)) n *= 2;

    std::vector<std::complex<double>> buf(n);
    for (size_t i = 0; i < n; ++i) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * kPi * i / (n - 1)));
        buf[i] = std::complex<double>(samples[i] * w, 0.0);
    }
    fft_radix2(buf);

    size_t peak = 1;
    double peak_mag = 0.0;
    for (size_t k = 1; k < n / 2; ++k) {
        const double mag = std::norm(buf[k]);
        if (mag > peak_mag) {
            peak_mag = mag;
            peak = k;
        }
    }

    // Parabolic interpolation on log-magnitude around the peak bin.
    double delta = 0.0;
    if (peak > 0 && peak + 1 < n / 2) {
        const double l0 = 0.5 * std::log(std::norm(buf[peak - 1]) + 1e-300);
        const double l1 = 0.5 * std::log(std::norm(buf[peak]) + 1e-300);
        const double l2 = 0.5 * std::log(std::norm(buf[peak + 1]) + 1e-300);
        const double denom = l0 - 2.0 * l1 + l2;
        if (denom != 0.0) delta = 0.5 * (l0 - l2) / denom;
        delta = std::clamp(delta, -0.5, 0.5);
    }
    return (static_cast<double>(peak) + delta) * sample_rate / static_cast<double>(n);
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, const MelConfig& config) {
    validate_clip(clip);
    config.validate();
    const int64_t expected = config.clip_samples();
    if (static_cast<int64_t>(clip.samples.size()) != expected)
        throw Error("mel_spectrogram: clip length " + std::to_string(clip.samples.size()) +
                    " does not match config duration * sample_rate = " +
                    std::to_string(expected));
    if (clip.sample_rate != config.sample_rate)
        throw Error("mel_spectrogram: clip rate " + std::to_string(clip.sample_rate) +
                    " does not match config rate " + std::to_string(config.sample_rate));

    // Zero-pad win - hop samples, split across the ends (extra sample goes
    // to the right when odd), so that frame count == clip_length / hop.
    const int total_pad = config.win - config.hop;
    const int pad_left = total_pad / 2;
    const int64_t padded_len = expected + total_pad;
    std::vector<double> padded(static_cast<size_t>(padded_len), 0.0);
    for (int64_t i = 0; i < expected; ++i)
        padded[static_cast<size_t>(i + pad_left)] = clip.samples[static_cast<size_t>(i)];

    const int n_frames = config.n_time_bins;
    const int n_bins = config.fft_size / 2 + 1;

    std::vector<double> window(static_cast<size_t>(config.win));
    for (int i = 0; i < config.win; ++i)
        window[static_cast<size_t>(i)] =
            0.5 * (1.0 - std::cos(2.0 * kPi * i / (config.win - 1)));

    const Tensor<float> fb = mel_filterbank(config);

    MelSpectrogram out;
    out.config = config;
    out.values = Tensor<float>(
        {static_cast<size_t>(config.n_mels), static_cast<size_t>(n_frames)});

    std::vector<std::complex<double>> buf(static_cast<size_t>(config.fft_size));
    std::vector<double> power(static_cast<size_t>(n_bins));

    for (int t = 0; t < n_frames; ++t) {
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
        const int64_t start = static_cast<int64_t>(t) * config.hop;
        for (int i = 0; i < config.win; ++i)
            buf[static_cast<size_t>(i)] = padded[static_cast<size_t>(start + i)] *
                                          window[static_cast<size_t>(i)];
        fft_radix2(buf);
        for (int k = 0; k < n_bins; ++k) power[static_cast<size_t>(k)] = std::norm(buf[static_cast<size_t>(k)]);

        for (int m = 0; m < config.n_mels; ++m) {
            double acc = 0.0;
            const float* row = fb.data() + static_cast<size_t>(m) * n_bins;
            for (int k = 0; k < n_bins; ++k) acc += row[k] * power[static_cast<size_t>(k)];
            out.values(static_cast<size_t>(m), static_cast<size_t>(t)) =
                static_cast<float>(std::log(acc + config.log_floor));
        }
    }

    // Per-instance standardization over all bins (double accumulation).
    const size_t count = out.values.size();
    double mean = 0.0;
    for (size_t i = 0; i < count; ++i) mean += out.values[i];
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (size_t i = 0; i < count; ++i) {
        const double d = out.values[i] - mean;
        var += d * d;
    }
    const double std_dev = std::sqrt(var / static_cast<double>(count));
    const double denom = std_dev < 1e-12 ? 1.0 : std_dev;
    out.silent = std_dev < 1e-12;
    for (size_t i = 0; i < count; ++i)
        out.values[i] = static_cast<float>((out.values[i] - mean) / denom);

    return out;
}

PatchGrid patchify(const Tensor<float>& spec_values, size_t patch_side) {
    if (patch_side == 0) throw Error("patchify: patch side must be positive");
    const size_t n_mels = spec_values.rows();
    const size_t n_frames = spec_values.cols();
    if (n_mels % patch_side != 0 || n_frames % patch_side != 0)
        throw Error("patchify: spectrogram dims (" + std::to_string(n_mels) + " x " +
                    std::to_string(n_frames) + ") are not divisible by patch side " +
                    std::to_string(patch_side));

    PatchGrid grid;
    grid.patch_side = patch_side;
    grid.grid_h = n_mels / patch_side;
    grid.grid_w = n_frames / patch_side;
    grid.patches = Tensor<float>({grid.grid_h * grid.grid_w, patch_side * patch_side});

    for (size_t i = 0; i < grid.grid_h; ++i) {
        for (size_t j = 0; j < grid.grid_w; ++j) {
            float* dst = grid.patches.data() + (i * grid.grid_w + j) * patch_side * patch_side;
            for (size_t r = 0; r < patch_side; ++r) {
                const float* src = spec_values.data() +
                                   (i * patch_side + r) * n_frames + j * patch_side;
                std::memcpy(dst + r * patch_side, src, patch_side * sizeof(float));
            }
        }
    }
    return grid;
}

PatchGrid patchify(const MelSpectrogram& spec, size_t patch_side) {
    return patchify(spec.values, patch_side);
}

Tensor<float> unpatchify(const PatchGrid& grid) {
    const size_t s = grid.patch_side;
    if (s == 0 || grid.patches.rows() != grid.grid_h * grid.grid_w ||
        grid.patches.cols() != s * s)
        throw Error("unpatchify: invalid patch grid");

    Tensor<float> out({grid.grid_h * s, grid.grid_w * s});
    const size_t n_frames = grid.grid_w * s;
    for (size_t i = 0; i < grid.grid_h; ++i) {
        for (size_t j = 0; j < grid.grid_w; ++j) {
            const float* src = grid.patches.data() + (i * grid.grid_w + j) * s * s;
            for (size_t r = 0; r < s; ++r) {
                float* dst = out.data() + (i * s + r) * n_frames + j * s;
                std::memcpy(dst, src + r * s, s * sizeof(float));
            }
        }
    }
    return out;
}

namespace {
constexpr char kSpecMagic[8] = {'A', 'J', 'S', 'P', 'E', 'C', '0', '1'};
}

void save_spectrogram(const std::string& path, const MelSpectrogram& spec) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open for writing: " + path);
    f.write(kSpecMagic, sizeof(kSpecMagic));
    const uint32_t dims[2] = {static_cast<uint32_t>(spec.values.rows()),
                              static_cast<uint32_t>(spec.values.cols())};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    f.write(reinterpret_cast<const char*>(spec.values.data()),
            static_cast<std::streamsize>(spec.values.size() * sizeof(float)));
    if (!f) throw Error("write failed: " + path);
}

Tensor<float> load_spectrogram(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open: " + path);
    char magic[8];
    if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kSpecMagic, 8) != 0)
        throw CorruptFileError("not a spectrogram file: " + path);
    uint32_t dims[2];
    if (!f.read(reinterpret_cast<char*>(dims), sizeof(dims)))
        throw CorruptFileError("truncated spectrogram file: " + path);
    Tensor<float> out({dims[0], dims[1]});
    if (!f.read(reinterpret_cast<char*>(out.data()),
                static_cast<std::streamsize>(out.size() * sizeof(float))))
        throw CorruptFileError("truncated spectrogram file: " + path);
    return out;
}

}  // namespace ajepa
