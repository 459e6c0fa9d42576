#pragma once

#include <vector>

#include "ajepa/masking.hpp"
#include "ajepa/vit.hpp"

namespace ajepa {

// Context encoder, EMA target encoder (identical configuration, never
// optimized directly) and the narrow predictor with its learned mask token.
template <typename T>
struct JepaModel {
    ViTConfig enc_cfg;
    ViTConfig pred_cfg;
    ParameterSet<T> ctx;
    ParameterSet<T> tgt;
    ParameterSet<T> pred;
    Tensor<T> mask_token;  // [pred embed_dim]
};

template <typename T>
struct JepaGradients {
    ParameterSet<T> ctx;
    ParameterSet<T> pred;
    Tensor<T> mask_token;
};

inline void validate_jepa_configs(const ViTConfig& enc_cfg, const ViTConfig& pred_cfg) {
    enc_cfg.validate();
    pred_cfg.validate();
    if (enc_cfg.output_dim != 0)
        throw Error("jepa: encoders must not have an output projection");
    if (pred_cfg.input_dim != enc_cfg.embed_dim)
        throw Error("jepa: predictor input_dim must equal encoder embed_dim");
    if (pred_cfg.output_dim != enc_cfg.embed_dim)
        throw Error("jepa: predictor output_dim must equal encoder embed_dim");
}

// Target starts as an exact copy of the context encoder.
template <typename T>
JepaModel<T> make_jepa_model(const ViTConfig& enc_cfg, const ViTConfig& pred_cfg,
                             Rng& rng) {
    validate_jepa_configs(enc_cfg, pred_cfg);
    JepaModel<T> model;
    model.enc_cfg = enc_cfg;
    model.pred_cfg = pred_cfg;
    model.ctx = init_parameters<T>(enc_cfg, rng);
    model.tgt = model.ctx;
    model.pred = init_parameters<T>(pred_cfg, rng);
    model.mask_token = Tensor<T>({pred_cfg.embed_dim});
    for (auto& x : model.mask_token.v) x = static_cast<T>(0.02 * rng.truncated_normal());
    return model;
}

template <typename T>
JepaGradients<T> zero_gradients(const JepaModel<T>& model) {
    JepaGradients<T> g;
    g.ctx = zeros_like(model.ctx);
    g.pred = zeros_like(model.pred);
    g.mask_token = Tensor<T>(model.mask_token.shape);
    return g;
}

// Applies fn(full_name, param, grad) over the trainable tensors in a fixed
// order: context encoder, predictor, mask token. Target tensors never
// appear here.
template <typename T, typename F>
void for_each_trainable(JepaModel<T>& model, JepaGradients<T>& grads, F&& fn) {
    for (auto& e : model.ctx.entries) fn("ctx." + e.name, e.tensor, grads.ctx.at(e.name));
    for (auto& e : model.pred.entries) fn("pred." + e.name, e.tensor, grads.pred.at(e.name));
    fn(std::string("mask_token"), model.mask_token, grads.mask_token);
}

// Trainable parameters: context encoder, predictor, mask token. The target
// encoder is excluded (EMA only).
template <typename T>
size_t jepa_trainable_count(const JepaModel<T>& model) {
    return model.ctx.parameter_count() + model.pred.parameter_count() +
           model.mask_token.size();
}

// Parameters needed at inference: one encoder.
template <typename T>
size_t jepa_inference_count(const JepaModel<T>& model) {
    return model.tgt.parameter_count();
}

inline std::vector<GridPos> grid_positions(size_t grid_h, size_t grid_w,
                                           const std::vector<size_t>& indices) {
    std::vector<GridPos> out;
    out.reserve(indices.size());
    for (size_t idx : indices) {
        if (idx >= grid_h * grid_w) throw Error("patch index outside grid");
        out.push_back({idx / grid_w, idx % grid_w});
    }
    return out;
}

inline std::vector<GridPos> grid_positions(size_t grid_h, size_t grid_w) {
    std::vector<GridPos> out;
    out.reserve(grid_h * grid_w);
    for (size_t r = 0; r < grid_h; ++r)
        for (size_t c = 0; c < grid_w; ++c) out.push_back({r, c});
    return out;
}

template <typename T>
TokenSequence<T> select_tokens(const Tensor<T>& patches, size_t grid_h, size_t grid_w,
                               const std::vector<size_t>& indices) {
    TokenSequence<T> seq;
    seq.positions = grid_positions(grid_h, grid_w, indices);
    seq.tokens = Tensor<T>({indices.size(), patches.cols()});
    for (size_t i = 0; i < indices.size(); ++i)
        std::copy(patches.data() + indices[i] * patches.cols(),
                  patches.data() + (indices[i] + 1) * patches.cols(),
                  seq.tokens.data() + i * patches.cols());
    return seq;
}

// Encodes only the visible patches, at their true grid positions.
template <typename T>
TokenSequence<T> forward_context(const JepaModel<T>& model, const Tensor<T>& patches,
                                 size_t grid_h, size_t grid_w, const MaskSpec& mask,
                                 EncodeCache<T>* cache = nullptr) {
    if (mask.num_patches != patches.rows() || mask.num_patches != grid_h * grid_w)
        throw Error("forward_context: mask does not match patch grid");
    if (mask.visible.empty()) throw Error("forward_context: visible set is empty");
    const TokenSequence<T> input = select_tokens(patches, grid_h, grid_w, mask.visible);
    return vit_encode(model.ctx, model.enc_cfg, input, grid_h, grid_w, cache);
}

// Encodes the full grid with the target encoder. The result is a constant
// for differentiation: no cache exists, so no gradient can flow here.
template <typename T>
TokenSequence<T> forward_target(const JepaModel<T>& model, const Tensor<T>& patches,
                                size_t grid_h, size_t grid_w) {
    if (patches.rows() != grid_h * grid_w)
        throw Error("forward_target: patch count does not match grid");
    std::vector<size_t> all(patches.rows());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    const TokenSequence<T> input = select_tokens(patches, grid_h, grid_w, all);
    return vit_encode(model.tgt, model.enc_cfg, input, grid_h, grid_w);
}

template <typename T>
struct PredictCache {
    Tensor<T> ctx_tokens_in;  // [n_visible x enc embed]
    TrunkCache<T> trunk;      // over [visible tokens; mask tokens]
    size_t n_visible = 0;
    size_t n_masked = 0;
};

// Projects context tokens to predictor width, appends one mask token per
// masked index (learned token + positional encoding of the masked slot),
// runs the predictor trunk over the combined sequence and re-projects the
// mask-slot outputs to encoder width.
template <typename T>
TokenSequence<T> predict_masked(const JepaModel<T>& model, const TokenSequence<T>& context,
                                const MaskSpec& mask, size_t grid_h, size_t grid_w,
                                PredictCache<T>* cache = nullptr) {
    if (context.length() != mask.visible.size())
        throw Error("predict_masked: context length does not match visible set");
    if (context.width() != model.pred_cfg.input_dim)
        throw Error("predict_masked: context width does not match predictor input_dim");

    const size_t pd = model.pred_cfg.embed_dim;
    const size_t nv = context.length();
    const size_t nm = mask.masked.size();
    const Tensor<T> pos_table = sincos_pos_encoding<T>(grid_h, grid_w, pd);

    Tensor<T> embedded_ctx = vit_embed(model.pred, model.pred_cfg, context.tokens,
                                       context.positions, pos_table, grid_w);

    Tensor<T> seq({nv + nm, pd});
    std::copy(embedded_ctx.data(), embedded_ctx.data() + nv * pd, seq.data());
    for (size_t k = 0; k < nm; ++k) {
        const size_t idx = mask.masked[k];
        const T* pe = pos_table.data() + idx * pd;
        T* row = seq.data() + (nv + k) * pd;
        for (size_t j = 0; j < pd; ++j) row[j] = model.mask_token[j] + pe[j];
    }

    if (cache) {
        cache->ctx_tokens_in = context.tokens;
        cache->n_visible = nv;
        cache->n_masked = nm;
    }
    Tensor<T> trunk_out =
        vit_trunk(model.pred, model.pred_cfg, seq, cache ? &cache->trunk : nullptr);
    Tensor<T> projected = vit_output_proj(model.pred, model.pred_cfg, trunk_out);

    TokenSequence<T> out;
    out.positions = grid_positions(grid_h, grid_w, mask.masked);
    out.tokens = Tensor<T>({nm, projected.cols()});
    std::copy(projected.data() + nv * projected.cols(),
              projected.data() + (nv + nm) * projected.cols(), out.tokens.data());
    return out;
}

// L = (1/|M|) sum_{j in M} ||pred_j - target_j||_2^2 with target tokens
// selected at the masked indices.
template <typename T>
T jepa_loss(const TokenSequence<T>& pred, const TokenSequence<T>& target,
            const MaskSpec& mask) {
    if (pred.length() != mask.masked.size())
        throw Error("jepa_loss: prediction count does not match masked set");
    if (target.length() != mask.num_patches)
        throw Error("jepa_loss: target count does not match patch count");
    if (pred.width() != target.width())
        throw Error("jepa_loss: prediction/target width mismatch");

    const size_t w = pred.width();
    double total = 0.0;
    for (size_t k = 0; k < mask.masked.size(); ++k) {
        const T* p = pred.tokens.data() + k * w;
        const T* t = target.tokens.data() + mask.masked[k] * w;
        for (size_t j = 0; j < w; ++j) {
            const double diff = static_cast<double>(p[j]) - static_cast<double>(t[j]);
            total += diff * diff;
        }
    }
    return static_cast<T>(total / static_cast<double>(mask.masked.size()));
}

// Reverse pass for predict_masked. d_pred covers the mask-slot outputs.
// Accumulates predictor and mask-token gradients; returns the gradient with
// respect to the context tokens.
template <typename T>
Tensor<T> predict_masked_backward(const JepaModel<T>& model, const PredictCache<T>& cache,
                                  const Tensor<T>& d_pred, JepaGradients<T>& grads) {
    const size_t nv = cache.n_visible;
    const size_t nm = cache.n_masked;
    const size_t out_w = d_pred.cols();

    Tensor<T> d_projected({nv + nm, out_w});
    std::copy(d_pred.data(), d_pred.data() + nm * out_w, d_projected.data() + nv * out_w);

    Tensor<T> d_trunk = vit_output_proj_backward(model.pred, model.pred_cfg,
                                                 cache.trunk.final_out, d_projected,
                                                 grads.pred);
    Tensor<T> d_seq =
        vit_trunk_backward(model.pred, model.pred_cfg, cache.trunk, d_trunk, grads.pred);

    const size_t pd = model.pred_cfg.embed_dim;
    for (size_t k = 0; k < nm; ++k) {
        const T* row = d_seq.data() + (nv + k) * pd;
        for (size_t j = 0; j < pd; ++j) grads.mask_token[j] += row[j];
    }

    Tensor<T> d_embedded_ctx({nv, pd});
    std::copy(d_seq.data(), d_seq.data() + nv * pd, d_embedded_ctx.data());
    return vit_embed_backward(model.pred, cache.ctx_tokens_in, d_embedded_ctx, grads.pred);
}

// Loss for one example without keeping any intermediate state.
template <typename T>
T jepa_example_loss(const JepaModel<T>& model, const Tensor<T>& patches, size_t grid_h,
                    size_t grid_w, const MaskSpec& mask) {
    const TokenSequence<T> ctx_out = forward_context(model, patches, grid_h, grid_w, mask);
    const TokenSequence<T> tgt_out = forward_target(model, patches, grid_h, grid_w);
    const TokenSequence<T> pred_out = predict_masked(model, ctx_out, mask, grid_h, grid_w);
    return jepa_loss(pred_out, tgt_out, mask);
}

// Forward and reverse pass for one example. Gradients are scaled by `scale`
// (the caller passes 1/batch for a batch mean) and accumulated into `grads`.
// Returns the unscaled loss. Target tokens enter only as constants.
template <typename T>
T jepa_example_grad(const JepaModel<T>& model, const Tensor<T>& patches, size_t grid_h,
                    size_t grid_w, const MaskSpec& mask, JepaGradients<T>& grads,
                    T scale, TokenSequence<T>* target_out = nullptr) {
    EncodeCache<T> ctx_cache;
    PredictCache<T> pred_cache;
    const TokenSequence<T> ctx_out =
        forward_context(model, patches, grid_h, grid_w, mask, &ctx_cache);
    const TokenSequence<T> tgt_out = forward_target(model, patches, grid_h, grid_w);
    const TokenSequence<T> pred_out =
        predict_masked(model, ctx_out, mask, grid_h, grid_w, &pred_cache);
    const T loss = jepa_loss(pred_out, tgt_out, mask);

    const size_t w = pred_out.width();
    const size_t nm = mask.masked.size();
    Tensor<T> d_pred({nm, w});
    const T coeff = scale * static_cast<T>(2.0 / static_cast<double>(nm));
    for (size_t k = 0; k < nm; ++k) {
        const T* p = pred_out.tokens.data() + k * w;
        const T* t = tgt_out.tokens.data() + mask.masked[k] * w;
        T* dp = d_pred.data() + k * w;
        for (size_t j = 0; j < w; ++j) dp[j] = coeff * (p[j] - t[j]);
    }

    Tensor<T> d_ctx_tokens = predict_masked_backward(model, pred_cache, d_pred, grads);
    vit_encode_backward(model.ctx, model.enc_cfg, ctx_cache, d_ctx_tokens, grads.ctx);

    if (target_out) *target_out = tgt_out;
    return loss;
}

}  // namespace ajepa
