#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ajepa/rng.hpp"
#include "ajepa/tensor.hpp"

namespace ajepa {

// Vision-transformer configuration shared by the encoders and the predictor.
// output_dim == 0 means no final re-projection.
struct ViTConfig {
    size_t input_dim = 0;
    size_t embed_dim = 0;
    size_t depth = 0;
    size_t num_heads = 0;
    double mlp_ratio = 4.0;
    size_t output_dim = 0;

    size_t mlp_hidden() const {
        return static_cast<size_t>(std::llround(mlp_ratio * static_cast<double>(embed_dim)));
    }
    size_t head_dim() const { return embed_dim / num_heads; }

    void validate() const {
        if (input_dim == 0 || embed_dim == 0 || num_heads == 0)
            throw Error("vit config: input_dim, embed_dim and num_heads must be positive");
        if (embed_dim % num_heads != 0)
            throw Error("vit config: embed_dim " + std::to_string(embed_dim) +
                        " not divisible by num_heads " + std::to_string(num_heads));
        if (mlp_ratio <= 0.0) throw Error("vit config: mlp_ratio must be positive");
    }
};

struct GridPos {
    size_t row = 0;
    size_t col = 0;
    bool operator==(const GridPos&) const = default;
};

// Tokens with the grid coordinates they came from. Coordinates survive
// encoding so that visible-subset and full-grid encodings agree on positions.
template <typename T>
struct TokenSequence {
    Tensor<T> tokens;  // [n x dim]
    std::vector<GridPos> positions;

    size_t length() const { return tokens.rows(); }
    size_t width() const { return tokens.cols(); }
};

constexpr double kLayerNormEps = 1e-6;

// ── parameter registry ──────────────────────────────────────────────────────

inline std::vector<std::pair<std::string, std::vector<size_t>>> vit_parameter_shapes(
    const ViTConfig& cfg) {
    cfg.validate();
    const size_t d = cfg.embed_dim;
    const size_t h = cfg.mlp_hidden();
    std::vector<std::pair<std::string, std::vector<size_t>>> shapes;
    shapes.emplace_back("input_proj.weight", std::vector<size_t>{cfg.input_dim, d});
    shapes.emplace_back("input_proj.bias", std::vector<size_t>{d});
    for (size_t i = 0; i < cfg.depth; ++i) {
        const std::string p = "block" + std::to_string(i) + ".";
        shapes.emplace_back(p + "ln1.scale", std::vector<size_t>{d});
        shapes.emplace_back(p + "ln1.shift", std::vector<size_t>{d});
        shapes.emplace_back(p + "attn.qkv.weight", std::vector<size_t>{d, 3 * d});
        shapes.emplace_back(p + "attn.qkv.bias", std::vector<size_t>{3 * d});
        shapes.emplace_back(p + "attn.out.weight", std::vector<size_t>{d, d});
        shapes.emplace_back(p + "attn.out.bias", std::vector<size_t>{d});
        shapes.emplace_back(p + "ln2.scale", std::vector<size_t>{d});
        shapes.emplace_back(p + "ln2.shift", std::vector<size_t>{d});
        shapes.emplace_back(p + "mlp.fc1.weight", std::vector<size_t>{d, h});
        shapes.emplace_back(p + "mlp.fc1.bias", std::vector<size_t>{h});
        shapes.emplace_back(p + "mlp.fc2.weight", std::vector<size_t>{h, d});
        shapes.emplace_back(p + "mlp.fc2.bias", std::vector<size_t>{d});
    }
    shapes.emplace_back("final_ln.scale", std::vector<size_t>{d});
    shapes.emplace_back("final_ln.shift", std::vector<size_t>{d});
    if (cfg.output_dim != 0) {
        shapes.emplace_back("output_proj.weight", std::vector<size_t>{d, cfg.output_dim});
        shapes.emplace_back("output_proj.bias", std::vector<size_t>{cfg.output_dim});
    }
    return shapes;
}

inline size_t vit_parameter_count(const ViTConfig& cfg) {
    size_t total = 0;
    for (const auto& [name, shape] : vit_parameter_shapes(cfg))
        total += Tensor<float>::element_count(shape);
    return total;
}

// Truncated-normal (std 0.02) weights, zero biases, LN scale 1 / shift 0.
// Tensors are filled in registry order, so a seed pins every value.
template <typename T>
ParameterSet<T> init_parameters(const ViTConfig& cfg, Rng& rng) {
    ParameterSet<T> params;
    for (const auto& [name, shape] : vit_parameter_shapes(cfg)) {
        Tensor<T>& t = params.add(name, shape);
        if (name.ends_with(".weight")) {
            for (auto& x : t.v) x = static_cast<T>(0.02 * rng.truncated_normal());
        } else if (name.ends_with(".scale")) {
            t.fill(T(1));
        }
        // biases and shifts stay zero
    }
    return params;
}

template <typename T>
ParameterSet<T> zeros_like(const ParameterSet<T>& params) {
    ParameterSet<T> out;
    for (const auto& e : params.entries) out.add(e.name, e.tensor.shape);
    return out;
}

// ── fixed 2D sin-cos positional encodings ───────────────────────────────────

// Table [grid_h*grid_w x dim], row index = row * grid_w + col. The first
// half of each vector encodes the row coordinate, the second half the
// column: [sin(row*w_k) | cos(row*w_k) | sin(col*w_k) | cos(col*w_k)] with
// w_k = 10000^(-k/q), q = dim/4.
template <typename T>
Tensor<T> sincos_pos_encoding(size_t grid_h, size_t grid_w, size_t dim) {
    if (dim == 0 || dim % 4 != 0)
        throw Error("positional encoding dim must be divisible by 4, got " +
                    std::to_string(dim));
    const size_t q = dim / 4;
    Tensor<T> table({grid_h * grid_w, dim});
    for (size_t r = 0; r < grid_h; ++r) {
        for (size_t c = 0; c < grid_w; ++c) {
            T* row = table.data() + (r * grid_w + c) * dim;
            for (size_t k = 0; k < q; ++k) {
                const double omega =
                    std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(q));
                row[k] = static_cast<T>(std::sin(static_cast<double>(r) * omega));
                row[q + k] = static_cast<T>(std::cos(static_cast<double>(r) * omega));
                row[2 * q + k] = static_cast<T>(std::sin(static_cast<double>(c) * omega));
                row[3 * q + k] = static_cast<T>(std::cos(static_cast<double>(c) * omega));
            }
        }
    }
    return table;
}

// ── forward / backward caches ───────────────────────────────────────────────

template <typename T>
struct BlockCache {
    Tensor<T> x_in;       // [n x d] block input
    Tensor<T> ln1_hat;    // normalized pre-scale activations
    std::vector<T> ln1_inv_std;
    Tensor<T> ln1_out;
    Tensor<T> qkv;        // [n x 3d]
    Tensor<T> attn;       // [heads x n x n] softmax probabilities
    Tensor<T> attn_merged;  // [n x d] concatenated head outputs
    Tensor<T> res1;       // [n x d] after attention residual
    Tensor<T> ln2_hat;
    std::vector<T> ln2_inv_std;
    Tensor<T> ln2_out;
    Tensor<T> h1;  // [n x hidden] pre-GELU
    Tensor<T> a1;  // [n x hidden] post-GELU
};

template <typename T>
struct TrunkCache {
    std::vector<BlockCache<T>> blocks;
    Tensor<T> final_in;
    Tensor<T> final_hat;
    std::vector<T> final_inv_std;
    Tensor<T> final_out;  // trunk output, input to the optional out-proj
};

template <typename T>
struct EncodeCache {
    Tensor<T> tokens_in;
    Tensor<T> embedded;
    TrunkCache<T> trunk;
};

// ── primitive layers ────────────────────────────────────────────────────────

template <typename T>
void linear_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                    Tensor<T>& y) {
    const size_t n = x.rows(), m = x.cols(), p = w.cols();
    y = Tensor<T>({n, p});
    matmul_nn(x.data(), w.data(), y.data(), n, m, p);
    for (size_t i = 0; i < n; ++i) {
        T* yi = y.data() + i * p;
        for (size_t j = 0; j < p; ++j) yi[j] += b[j];
    }
}

// dW += x^T dy, db += colsum(dy); returns dx = dy W^T.
template <typename T>
Tensor<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                          Tensor<T>& dw, Tensor<T>& db) {
    const size_t n = x.rows(), m = x.cols(), p = w.cols();
    matmul_tn_accum(x.data(), dy.data(), dw.data(), n, m, p);
    for (size_t i = 0; i < n; ++i) {
        const T* dyi = dy.data() + i * p;
        for (size_t j = 0; j < p; ++j) db[j] += dyi[j];
    }
    Tensor<T> dx({n, m});
    matmul_nt(dy.data(), w.data(), dx.data(), n, p, m);
    return dx;
}

template <typename T>
void layer_norm_forward(const Tensor<T>& x, const Tensor<T>& scale,
                        const Tensor<T>& shift, Tensor<T>& y, Tensor<T>& hat,
                        std::vector<T>& inv_std) {
    const size_t n = x.rows(), d = x.cols();
    y = Tensor<T>({n, d});
    hat = Tensor<T>({n, d});
    inv_std.assign(n, T(0));
    for (size_t i = 0; i < n; ++i) {
        const T* xi = x.data() + i * d;
        double mean = 0.0;
        for (size_t j = 0; j < d; ++j) mean += xi[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) {
            const double c = xi[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[i] = static_cast<T>(is);
        T* hi = hat.data() + i * d;
        T* yi = y.data() + i * d;
        for (size_t j = 0; j < d; ++j) {
            hi[j] = static_cast<T>((xi[j] - mean) * is);
            yi[j] = hi[j] * scale[j] + shift[j];
        }
    }
}

// Accumulates dscale/dshift; returns dx.
template <typename T>
Tensor<T> layer_norm_backward(const Tensor<T>& dy, const Tensor<T>& hat,
                              const std::vector<T>& inv_std, const Tensor<T>& scale,
                              Tensor<T>& dscale, Tensor<T>& dshift) {
    const size_t n = dy.rows(), d = dy.cols();
    Tensor<T> dx({n, d});
    for (size_t i = 0; i < n; ++i) {
        const T* dyi = dy.data() + i * d;
        const T* hi = hat.data() + i * d;
        double m1 = 0.0, m2 = 0.0;
        for (size_t j = 0; j < d; ++j) {
            dscale[j] += dyi[j] * hi[j];
            dshift[j] += dyi[j];
            const double dh = static_cast<double>(dyi[j]) * scale[j];
            m1 += dh;
            m2 += dh * hi[j];
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        T* dxi = dx.data() + i * d;
        for (size_t j = 0; j < d; ++j) {
            const double dh = static_cast<double>(dyi[j]) * scale[j];
            dxi[j] = static_cast<T>(inv_std[i] * (dh - m1 - hi[j] * m2));
        }
    }
    return dx;
}

template <typename T>
T gelu(T x) {
    return static_cast<T>(0.5 * static_cast<double>(x) *
                          (1.0 + std::erf(static_cast<double>(x) / std::sqrt(2.0))));
}

template <typename T>
T gelu_grad(T x) {
    const double xd = static_cast<double>(x);
    const double cdf = 0.5 * (1.0 + std::erf(xd / std::sqrt(2.0)));
    const double pdf = std::exp(-0.5 * xd * xd) / std::sqrt(2.0 * 3.14159265358979323846);
    return static_cast<T>(cdf + xd * pdf);
}

namespace detail {

// Rows of `scores` are replaced by their softmax (numerically stabilized).
template <typename T>
void softmax_rows(T* scores, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        T* row = scores + i * n;
        T mx = row[0];
        for (size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (size_t j = 0; j < n; ++j) {
            row[j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)));
            sum += row[j];
        }
        const T inv = static_cast<T>(1.0 / sum);
        for (size_t j = 0; j < n; ++j) row[j] *= inv;
    }
}

template <typename T>
void extract_head(const Tensor<T>& qkv, size_t section, size_t head, size_t head_dim,
                  size_t embed_dim, Tensor<T>& out) {
    const size_t n = qkv.rows();
    out = Tensor<T>({n, head_dim});
    const size_t offset = section * embed_dim + head * head_dim;
    for (size_t i = 0; i < n; ++i) {
        const T* src = qkv.data() + i * 3 * embed_dim + offset;
        std::copy(src, src + head_dim, out.data() + i * head_dim);
    }
}

template <typename T>
void scatter_head(const Tensor<T>& part, size_t section, size_t head, size_t head_dim,
                  size_t embed_dim, Tensor<T>& dqkv) {
    const size_t n = part.rows();
    const size_t offset = section * embed_dim + head * head_dim;
    for (size_t i = 0; i < n; ++i) {
        const T* src = part.data() + i * head_dim;
        T* dst = dqkv.data() + i * 3 * embed_dim + offset;
        for (size_t j = 0; j < head_dim; ++j) dst[j] += src[j];
    }
}

}  // namespace detail

// ── transformer block ───────────────────────────────────────────────────────

template <typename T>
Tensor<T> block_forward(const ParameterSet<T>& params, const std::string& prefix,
                        const ViTConfig& cfg, const Tensor<T>& x, BlockCache<T>* cache) {
    const size_t n = x.rows();
    const size_t d = cfg.embed_dim;
    const size_t heads = cfg.num_heads;
    const size_t dh = cfg.head_dim();

    BlockCache<T> local;
    BlockCache<T>& c = cache ? *cache : local;
    c.x_in = x;

    layer_norm_forward(x, params.at(prefix + "ln1.scale"), params.at(prefix + "ln1.shift"),
                       c.ln1_out, c.ln1_hat, c.ln1_inv_std);
    linear_forward(c.ln1_out, params.at(prefix + "attn.qkv.weight"),
                   params.at(prefix + "attn.qkv.bias"), c.qkv);

    c.attn = Tensor<T>({heads, n, n});
    c.attn_merged = Tensor<T>({n, d});
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor<T> qh, kh, vh;
    Tensor<T> head_out({n, dh});
    for (size_t h = 0; h < heads; ++h) {
        detail::extract_head(c.qkv, 0, h, dh, d, qh);
        detail::extract_head(c.qkv, 1, h, dh, d, kh);
        detail::extract_head(c.qkv, 2, h, dh, d, vh);
        T* scores = c.attn.data() + h * n * n;
        matmul_nt(qh.data(), kh.data(), scores, n, dh, n);
        for (size_t i = 0; i < n * n; ++i) scores[i] *= scale;
        detail::softmax_rows(scores, n);
        matmul_nn(scores, vh.data(), head_out.data(), n, n, dh);
        for (size_t i = 0; i < n; ++i)
            std::copy(head_out.data() + i * dh, head_out.data() + (i + 1) * dh,
                      c.attn_merged.data() + i * d + h * dh);
    }

    Tensor<T> attn_proj;
    linear_forward(c.attn_merged, params.at(prefix + "attn.out.weight"),
                   params.at(prefix + "attn.out.bias"), attn_proj);

    c.res1 = Tensor<T>({n, d});
    for (size_t i = 0; i < n * d; ++i) c.res1[i] = x[i] + attn_proj[i];

    layer_norm_forward(c.res1, params.at(prefix + "ln2.scale"),
                       params.at(prefix + "ln2.shift"), c.ln2_out, c.ln2_hat,
                       c.ln2_inv_std);
    linear_forward(c.ln2_out, params.at(prefix + "mlp.fc1.weight"),
                   params.at(prefix + "mlp.fc1.bias"), c.h1);
    c.a1 = Tensor<T>(c.h1.shape);
    for (size_t i = 0; i < c.h1.size(); ++i) c.a1[i] = gelu(c.h1[i]);
    Tensor<T> mlp_out;
    linear_forward(c.a1, params.at(prefix + "mlp.fc2.weight"),
                   params.at(prefix + "mlp.fc2.bias"), mlp_out);

    Tensor<T> out({n, d});
    for (size_t i = 0; i < n * d; ++i) out[i] = c.res1[i] + mlp_out[i];
    return out;
}

template <typename T>
Tensor<T> block_backward(const ParameterSet<T>& params, const std::string& prefix,
                         const ViTConfig& cfg, const BlockCache<T>& c,
                         const Tensor<T>& d_out, ParameterSet<T>& grads) {
    const size_t n = c.x_in.rows();
    const size_t d = cfg.embed_dim;
    const size_t heads = cfg.num_heads;
    const size_t dh = cfg.head_dim();

    // MLP branch.
    Tensor<T> d_a1 = linear_backward(c.a1, params.at(prefix + "mlp.fc2.weight"), d_out,
                                     grads.at(prefix + "mlp.fc2.weight"),
                                     grads.at(prefix + "mlp.fc2.bias"));
    Tensor<T> d_h1(d_a1.shape);
    for (size_t i = 0; i < d_h1.size(); ++i) d_h1[i] = d_a1[i] * gelu_grad(c.h1[i]);
    Tensor<T> d_ln2_out = linear_backward(c.ln2_out, params.at(prefix + "mlp.fc1.weight"),
                                          d_h1, grads.at(prefix + "mlp.fc1.weight"),
                                          grads.at(prefix + "mlp.fc1.bias"));
    Tensor<T> d_res1 = layer_norm_backward(d_ln2_out, c.ln2_hat, c.ln2_inv_std,
                                           params.at(prefix + "ln2.scale"),
                                           grads.at(prefix + "ln2.scale"),
                                           grads.at(prefix + "ln2.shift"));
    for (size_t i = 0; i < n * d; ++i) d_res1[i] += d_out[i];  // skip connection

    // Attention branch.
    Tensor<T> d_merged = linear_backward(c.attn_merged, params.at(prefix + "attn.out.weight"),
                                         d_res1, grads.at(prefix + "attn.out.weight"),
                                         grads.at(prefix + "attn.out.bias"));

    Tensor<T> d_qkv({n, 3 * d});
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor<T> qh, kh, vh;
    Tensor<T> dm({n, dh}), d_attn({n, n}), d_scores({n, n});
    Tensor<T> dqh({n, dh}), dkh({n, dh}), dvh({n, dh});
    for (size_t h = 0; h < heads; ++h) {
        detail::extract_head(c.qkv, 0, h, dh, d, qh);
        detail::extract_head(c.qkv, 1, h, dh, d, kh);
        detail::extract_head(c.qkv, 2, h, dh, d, vh);
        for (size_t i = 0; i < n; ++i)
            std::copy(d_merged.data() + i * d + h * dh, d_merged.data() + i * d + (h + 1) * dh,
                      dm.data() + i * dh);
        const T* attn = c.attn.data() + h * n * n;

        matmul_nt(dm.data(), vh.data(), d_attn.data(), n, dh, n);
        dvh.fill(T(0));
        matmul_tn_accum(attn, dm.data(), dvh.data(), n, n, dh);

        // Softmax backward: dS = A * (dA - rowsum(dA * A)), then fold in the
        // 1/sqrt(dh) score scaling.
        for (size_t i = 0; i < n; ++i) {
            const T* ai = attn + i * n;
            const T* dai = d_attn.data() + i * n;
            double dot = 0.0;
            for (size_t j = 0; j < n; ++j) dot += static_cast<double>(dai[j]) * ai[j];
            T* dsi = d_scores.data() + i * n;
            for (size_t j = 0; j < n; ++j)
                dsi[j] = static_cast<T>(ai[j] * (static_cast<double>(dai[j]) - dot)) * scale;
        }

        matmul_nn(d_scores.data(), kh.data(), dqh.data(), n, n, dh);
        dkh.fill(T(0));
        matmul_tn_accum(d_scores.data(), qh.data(), dkh.data(), n, n, dh);

        detail::scatter_head(dqh, 0, h, dh, d, d_qkv);
        detail::scatter_head(dkh, 1, h, dh, d, d_qkv);
        detail::scatter_head(dvh, 2, h, dh, d, d_qkv);
    }

    Tensor<T> d_ln1_out = linear_backward(c.ln1_out, params.at(prefix + "attn.qkv.weight"),
                                          d_qkv, grads.at(prefix + "attn.qkv.weight"),
                                          grads.at(prefix + "attn.qkv.bias"));
    Tensor<T> d_x = layer_norm_backward(d_ln1_out, c.ln1_hat, c.ln1_inv_std,
                                        params.at(prefix + "ln1.scale"),
                                        grads.at(prefix + "ln1.scale"),
                                        grads.at(prefix + "ln1.shift"));
    for (size_t i = 0; i < n * d; ++i) d_x[i] += d_res1[i];  // skip connection
    return d_x;
}

// ── ViT stages ──────────────────────────────────────────────────────────────

// Input projection plus positional encoding looked up by grid coordinate.
template <typename T>
Tensor<T> vit_embed(const ParameterSet<T>& params, const ViTConfig& cfg,
                    const Tensor<T>& tokens, const std::vector<GridPos>& positions,
                    const Tensor<T>& pos_table, size_t grid_w) {
    if (tokens.cols() != cfg.input_dim)
        throw Error("vit: token width " + std::to_string(tokens.cols()) +
                    " does not match input_dim " + std::to_string(cfg.input_dim));
    if (tokens.rows() != positions.size())
        throw Error("vit: token/position count mismatch");
    Tensor<T> out;
    linear_forward(tokens, params.at("input_proj.weight"), params.at("input_proj.bias"), out);
    const size_t d = cfg.embed_dim;
    for (size_t i = 0; i < positions.size(); ++i) {
        const size_t p = positions[i].row * grid_w + positions[i].col;
        if (p >= pos_table.rows()) throw Error("vit: position outside grid");
        const T* pe = pos_table.data() + p * d;
        T* oi = out.data() + i * d;
        for (size_t j = 0; j < d; ++j) oi[j] += pe[j];
    }
    return out;
}

template <typename T>
Tensor<T> vit_embed_backward(const ParameterSet<T>& params, const Tensor<T>& tokens_in,
                             const Tensor<T>& d_embedded, ParameterSet<T>& grads) {
    // The positional table is constant; only the projection has parameters.
    return linear_backward(tokens_in, params.at("input_proj.weight"), d_embedded,
                           grads.at("input_proj.weight"), grads.at("input_proj.bias"));
}

// Pre-norm blocks followed by the final layer norm.
template <typename T>
Tensor<T> vit_trunk(const ParameterSet<T>& params, const ViTConfig& cfg,
                    const Tensor<T>& x, TrunkCache<T>* cache) {
    Tensor<T> cur = x;
    if (cache) cache->blocks.resize(cfg.depth);
    for (size_t i = 0; i < cfg.depth; ++i) {
        const std::string prefix = "block" + std::to_string(i) + ".";
        cur = block_forward(params, prefix, cfg, cur, cache ? &cache->blocks[i] : nullptr);
    }
    TrunkCache<T> local;
    TrunkCache<T>& c = cache ? *cache : local;
    c.final_in = cur;
    layer_norm_forward(c.final_in, params.at("final_ln.scale"), params.at("final_ln.shift"),
                       c.final_out, c.final_hat, c.final_inv_std);
    return c.final_out;
}

template <typename T>
Tensor<T> vit_trunk_backward(const ParameterSet<T>& params, const ViTConfig& cfg,
                             const TrunkCache<T>& cache, const Tensor<T>& d_out,
                             ParameterSet<T>& grads) {
    Tensor<T> d = layer_norm_backward(d_out, cache.final_hat, cache.final_inv_std,
                                      params.at("final_ln.scale"),
                                      grads.at("final_ln.scale"), grads.at("final_ln.shift"));
    for (size_t i = cfg.depth; i-- > 0;) {
        const std::string prefix = "block" + std::to_string(i) + ".";
        d = block_backward(params, prefix, cfg, cache.blocks[i], d, grads);
    }
    return d;
}

template <typename T>
Tensor<T> vit_output_proj(const ParameterSet<T>& params, const ViTConfig& cfg,
                          const Tensor<T>& x) {
    if (cfg.output_dim == 0) return x;
    Tensor<T> out;
    linear_forward(x, params.at("output_proj.weight"), params.at("output_proj.bias"), out);
    return out;
}

template <typename T>
Tensor<T> vit_output_proj_backward(const ParameterSet<T>& params, const ViTConfig& cfg,
                                   const Tensor<T>& proj_in, const Tensor<T>& d_out,
                                   ParameterSet<T>& grads) {
    if (cfg.output_dim == 0) return d_out;
    return linear_backward(proj_in, params.at("output_proj.weight"), d_out,
                           grads.at("output_proj.weight"), grads.at("output_proj.bias"));
}

// Full encoder: projection + positions, trunk, optional re-projection.
// Token count is preserved; width becomes output_dim if set, else embed_dim.
template <typename T>
TokenSequence<T> vit_encode(const ParameterSet<T>& params, const ViTConfig& cfg,
                            const TokenSequence<T>& input, size_t grid_h, size_t grid_w,
                            EncodeCache<T>* cache = nullptr) {
    cfg.validate();
    const Tensor<T> pos_table = sincos_pos_encoding<T>(grid_h, grid_w, cfg.embed_dim);
    Tensor<T> embedded =
        vit_embed(params, cfg, input.tokens, input.positions, pos_table, grid_w);
    if (cache) {
        cache->tokens_in = input.tokens;
        cache->embedded = embedded;
    }
    Tensor<T> trunk_out = vit_trunk(params, cfg, embedded, cache ? &cache->trunk : nullptr);
    TokenSequence<T> out;
    out.tokens = vit_output_proj(params, cfg, trunk_out);
    out.positions = input.positions;
    return out;
}

// Reverse pass of vit_encode. Accumulates into `grads`; returns the
// gradient with respect to the raw input tokens.
template <typename T>
Tensor<T> vit_encode_backward(const ParameterSet<T>& params, const ViTConfig& cfg,
                              const EncodeCache<T>& cache, const Tensor<T>& d_out,
                              ParameterSet<T>& grads) {
    Tensor<T> d_trunk =
        vit_output_proj_backward(params, cfg, cache.trunk.final_out, d_out, grads);
    Tensor<T> d_embedded = vit_trunk_backward(params, cfg, cache.trunk, d_trunk, grads);
    return vit_embed_backward(params, cache.tokens_in, d_embedded, grads);
}

}  // namespace ajepa
