#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ajepa/dsp.hpp"
#include "ajepa/optim.hpp"
#include "ajepa/probes.hpp"
#include "ajepa/trainer.hpp"
#include "ajepa/vit.hpp"

namespace ajepa {

// Fully resolved run configuration. Defaults reproduce the reference
// training setup; every field can be set from a config file (flat dotted
// keys, one `key = value` per line, `#` comments) or --set overrides.
struct RunConfig {
    uint64_t seed = 42;

    int64_t mel_sample_rate = 32000;
    double mel_duration = 10.0;
    int64_t mel_n_mels = 128;
    int64_t mel_n_time_bins = 256;
    double mel_fmin = 0.0;
    double mel_fmax = -1.0;  // -1 = Nyquist
    double mel_log_floor = 1e-8;

    int64_t patch_side = 16;

    double mask_lo = 0.4;
    double mask_hi = 0.6;

    int64_t encoder_embed_dim = 768;
    int64_t encoder_depth = 12;
    int64_t encoder_heads = 12;
    double encoder_mlp_ratio = 4.0;

    int64_t predictor_embed_dim = 384;
    int64_t predictor_depth = 6;
    int64_t predictor_heads = 12;
    double predictor_mlp_ratio = 4.0;

    double optim_beta1 = 0.9;
    double optim_beta2 = 0.95;
    double optim_weight_decay = 0.05;
    double optim_eps = 1e-8;
    double optim_peak_lr = 3e-4;
    double optim_init_lr = 1e-6;
    uint64_t optim_warmup_steps = 1000;
    double optim_tau_base = 0.996;

    int64_t train_batch_size = 256;
    uint64_t train_total_steps = 100000;
    uint64_t train_checkpoint_every = 1000;

    int64_t probe_k = 5;
    std::string probe_metric = "cosine";
    int64_t probe_epochs = 50;
    double probe_lr = 1e-3;
    int64_t probe_batch_size = 64;
    double probe_weight_decay = 0.0;

    int64_t synth_train_per_class = 40;
    int64_t synth_test_per_class = 20;

    std::string paths_manifest;
    std::string paths_out_dir;

    void validate() const;

    MelConfig mel_config() const;
    ViTConfig encoder_config() const;
    ViTConfig predictor_config() const;
    OptimizerConfig optimizer_config() const;
    MaskBounds mask_bounds() const;
    ProbeConfig probe_config() const;
};

// Defaults, then file (if non-empty path), then overrides, then validate.
RunConfig parse_config(const std::string& file_path,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

// Applies `key = value` lines from text onto cfg.
void apply_config_text(RunConfig& cfg, const std::string& text);

// Canonical serialization: sorted keys, round-trip float formatting. This
// is the form echoed to logs and embedded in checkpoints.
std::string serialize_config(const RunConfig& cfg);

// Dataset manifest: one row per clip, tab-separated `path[\tlabel[\tsplit]]`.
// Relative paths resolve against the manifest's directory.
struct ManifestRow {
    std::string path;
    int label = -1;  // -1 = unlabeled
    std::string split = "train";
};

std::vector<ManifestRow> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestRow>& rows);

}  // namespace ajepa
