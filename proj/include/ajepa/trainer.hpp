#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ajepa/dsp.hpp"
#include "ajepa/jepa.hpp"
#include "ajepa/optim.hpp"

namespace ajepa {

struct TrainMetrics {
    double loss = 0.0;
    double lr = 0.0;
    double tau = 0.0;
    double grad_norm = 0.0;
    double target_variance = 0.0;      // mean over embedding dimensions
    double target_variance_min = 0.0;  // worst dimension (collapse monitor)
};

// Everything a resumed run needs: step counter, model, optimizer moments,
// master seed. Batch composition and mask draws are derived statelessly
// from (seed, step), so no generator state beyond the seed is stored.
struct TrainState {
    uint64_t step = 0;
    uint64_t seed = 0;
    JepaModel<float> model;
    ParameterSet<float> m;  // first moments, keyed ctx.* / pred.* / mask_token
    ParameterSet<float> v;  // second moments
    TrainMetrics last;
};

TrainState make_train_state(const ViTConfig& enc_cfg, const ViTConfig& pred_cfg,
                            uint64_t seed);

// AdamW over all trainable tensors with lr as given; uses state.step to
// derive the 1-based bias-correction count. Does not advance state.step.
void adamw_step(TrainState& state, JepaGradients<float>& grads, double lr,
                const OptimizerConfig& cfg);

struct MaskBounds {
    double lo = 0.4;
    double hi = 0.6;
};

// One optimization step over a batch of patch grids (all with identical
// geometry): per-batch ratio, per-example masks, forward/backward,
// AdamW at lr_schedule(step), then the EMA update at tau_schedule(step),
// then step += 1. The rng both seeds the ratio draw and the per-example
// mask generators.
TrainMetrics train_step(TrainState& state, const std::vector<const PatchGrid*>& batch,
                        const MaskBounds& bounds, const OptimizerConfig& cfg, Rng& rng);

// Versioned binary checkpoint: header (magic, version, step, seed, metrics,
// both ViT configurations, UTF-8 config text) followed by named tensor
// records (name, dtype, shape, row-major data). Writes go to a temp file
// that is renamed into place, so an interrupted save never replaces a
// complete checkpoint with a truncated one.
void save_checkpoint(const std::string& path, const TrainState& state,
                     const std::string& config_text);

struct LoadedCheckpoint {
    TrainState state;
    std::string config_text;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace ajepa
