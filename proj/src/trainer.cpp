#include "ajepa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ajepa/errors.hpp"
#include "ajepa/masking.hpp"

namespace ajepa {

TrainState make_train_state(const ViTConfig& enc_cfg, const ViTConfig& pred_cfg,
                            uint64_t seed) {
    TrainState state;
    state.seed = seed;
    Rng rng(seed);
    state.model = make_jepa_model<float>(enc_cfg, pred_cfg, rng);

    JepaGradients<float> grads = zero_gradients(state.model);
    for_each_trainable(state.model, grads,
                       [&](const std::string& name, Tensor<float>& p, Tensor<float>&) {
                           state.m.add(name, p.shape);
                           state.v.add(name, p.shape);
                       });
    return state;
}

void adamw_step(TrainState& state, JepaGradients<float>& grads, double lr,
                const OptimizerConfig& cfg) {
    const uint64_t t = state.step + 1;
    for_each_trainable(state.model, grads,
                       [&](const std::string& name, Tensor<float>& p, Tensor<float>& g) {
                           adamw_update_tensor(name, p, g, state.m.at(name),
                                               state.v.at(name), t, lr, cfg);
                       });
}

TrainMetrics train_step(TrainState& state, const std::vector<const PatchGrid*>& batch,
                        const MaskBounds& bounds, const OptimizerConfig& cfg, Rng& rng) {
    if (batch.empty()) throw Error("train_step: empty batch");
    const size_t grid_h = batch[0]->grid_h;
    const size_t grid_w = batch[0]->grid_w;
    const size_t num_patches = grid_h * grid_w;
    for (const PatchGrid* g : batch) {
        if (g->grid_h != grid_h || g->grid_w != grid_w)
            throw Error("train_step: inconsistent patch geometry within batch");
    }

    const double ratio = sample_batch_ratio(rng, bounds.lo, bounds.hi);
    const size_t width = state.model.enc_cfg.embed_dim;

    JepaGradients<float> grads = zero_gradients(state.model);
    const float scale = 1.0f / static_cast<float>(batch.size());

    double loss_sum = 0.0;
    std::vector<double> dim_sum(width, 0.0), dim_sumsq(width, 0.0);
    size_t token_count = 0;

    for (size_t e = 0; e < batch.size(); ++e) {
        Rng mask_rng = rng.split(e);
        const MaskSpec mask = sample_mask(mask_rng, num_patches, ratio);
        const Tensor<float>& patches = batch[e]->patches;

        TokenSequence<float> tgt_out;
        const float loss = jepa_example_grad(state.model, patches, grid_h, grid_w, mask,
                                             grads, scale, &tgt_out);
        if (!std::isfinite(loss))
            throw Error("train_step: non-finite loss at batch example " + std::to_string(e));
        loss_sum += loss;

        for (size_t i = 0; i < tgt_out.length(); ++i) {
            const float* row = tgt_out.tokens.data() + i * width;
            for (size_t j = 0; j < width; ++j) {
                dim_sum[j] += row[j];
                dim_sumsq[j] += static_cast<double>(row[j]) * row[j];
            }
        }
        token_count += tgt_out.length();
    }

    double grad_sq = 0.0;
    for_each_trainable(state.model, grads,
                       [&](const std::string&, Tensor<float>&, Tensor<float>& g) {
                           for (float x : g.v) grad_sq += static_cast<double>(x) * x;
                       });

    TrainMetrics metrics;
    metrics.loss = loss_sum / static_cast<double>(batch.size());
    metrics.lr = lr_schedule(state.step, cfg);
    metrics.tau = tau_schedule(state.step, cfg.total_steps, cfg.tau_base);
    metrics.grad_norm = std::sqrt(grad_sq);

    double var_sum = 0.0, var_min = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < width; ++j) {
        const double mean = dim_sum[j] / static_cast<double>(token_count);
        const double var = dim_sumsq[j] / static_cast<double>(token_count) - mean * mean;
        var_sum += var;
        var_min = std::min(var_min, var);
    }
    metrics.target_variance = var_sum / static_cast<double>(width);
    metrics.target_variance_min = var_min;

    adamw_step(state, grads, metrics.lr, cfg);
    ema_update(state.model.tgt, state.model.ctx, metrics.tau);
    state.step += 1;
    state.last = metrics;
    return metrics;
}

// ── checkpoint container ─────────────────────────────────────────────────────

namespace {

constexpr char kMagic[8] = {'A', 'J', 'E', 'P', 'A', 'C', 'K', '1'};
constexpr uint32_t kVersion = 1;

void write_bytes(std::ostream& f, const void* p, size_t n) {
    f.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& f, const T& v) {
    write_bytes(f, &v, sizeof(v));
}

void write_string(std::ostream& f, const std::string& s) {
    const uint32_t len = static_cast<uint32_t>(s.size());
    write_pod(f, len);
    write_bytes(f, s.data(), s.size());
}

void write_vit_config(std::ostream& f, const ViTConfig& cfg) {
    write_pod<uint64_t>(f, cfg.input_dim);
    write_pod<uint64_t>(f, cfg.embed_dim);
    write_pod<uint64_t>(f, cfg.depth);
    write_pod<uint64_t>(f, cfg.num_heads);
    write_pod<double>(f, cfg.mlp_ratio);
    write_pod<uint64_t>(f, cfg.output_dim);
}

void write_tensor(std::ostream& f, const std::string& name, const Tensor<float>& t) {
    write_string(f, name);
    write_pod<uint8_t>(f, 0);  // dtype: f32
    write_pod<uint8_t>(f, static_cast<uint8_t>(t.shape.size()));
    for (size_t d : t.shape) write_pod<uint64_t>(f, d);
    write_bytes(f, t.data(), t.size() * sizeof(float));
}

struct Reader {
    std::ifstream f;
    std::string path;

    void read_bytes(void* p, size_t n) {
        if (!f.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n)))
            throw CorruptFileError("truncated checkpoint: " + path);
    }
    template <typename T>
    T read_pod() {
        T v;
        read_bytes(&v, sizeof(v));
        return v;
    }
    std::string read_string() {
        const uint32_t len = read_pod<uint32_t>();
        if (len > (1u << 28)) throw CorruptFileError("implausible string length in: " + path);
        std::string s(len, '\0');
        read_bytes(s.data(), len);
        return s;
    }
    ViTConfig read_vit_config() {
        ViTConfig cfg;
        cfg.input_dim = read_pod<uint64_t>();
        cfg.embed_dim = read_pod<uint64_t>();
        cfg.depth = read_pod<uint64_t>();
        cfg.num_heads = read_pod<uint64_t>();
        cfg.mlp_ratio = read_pod<double>();
        cfg.output_dim = read_pod<uint64_t>();
        return cfg;
    }
    // Reads the next record, which must carry `name` with `expected` shape.
    void read_tensor_into(const std::string& name, Tensor<float>& t) {
        const std::string got = read_string();
        if (got != name)
            throw CorruptFileError("checkpoint record order mismatch: expected " + name +
                                   ", found " + got + " in " + path);
        const uint8_t dtype = read_pod<uint8_t>();
        if (dtype != 0) throw CorruptFileError("unsupported tensor dtype in: " + path);
        const uint8_t ndim = read_pod<uint8_t>();
        std::vector<size_t> dims(ndim);
        for (auto& d : dims) d = static_cast<size_t>(read_pod<uint64_t>());
        if (dims != t.shape)
            throw ShapeMismatchError("checkpoint tensor " + name +
                                     " has unexpected shape in " + path);
        read_bytes(t.data(), t.size() * sizeof(float));
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state,
                     const std::string& config_text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open for writing: " + tmp);
        write_bytes(f, kMagic, sizeof(kMagic));
        write_pod(f, kVersion);
        write_pod<uint64_t>(f, state.step);
        write_pod<uint64_t>(f, state.seed);
        write_pod<double>(f, state.last.loss);
        write_pod<double>(f, state.last.lr);
        write_pod<double>(f, state.last.tau);
        write_pod<double>(f, state.last.grad_norm);
        write_pod<double>(f, state.last.target_variance);
        write_pod<double>(f, state.last.target_variance_min);
        write_vit_config(f, state.model.enc_cfg);
        write_vit_config(f, state.model.pred_cfg);
        write_string(f, config_text);

        uint64_t n_tensors = 0;
        n_tensors += state.model.ctx.size() + state.model.tgt.size() +
                     state.model.pred.size() + 1;
        n_tensors += state.m.size() + state.v.size();
        write_pod(f, n_tensors);

        for (const auto& e : state.model.ctx.entries) write_tensor(f, "ctx." + e.name, e.tensor);
        for (const auto& e : state.model.tgt.entries) write_tensor(f, "tgt." + e.name, e.tensor);
        for (const auto& e : state.model.pred.entries)
            write_tensor(f, "pred." + e.name, e.tensor);
        write_tensor(f, "mask_token", state.model.mask_token);
        for (const auto& e : state.m.entries) write_tensor(f, "adam.m." + e.name, e.tensor);
        for (const auto& e : state.v.entries) write_tensor(f, "adam.v." + e.name, e.tensor);
        if (!f) throw Error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    Reader r;
    r.path = path;
    r.f.open(path, std::ios::binary);
    if (!r.f) throw Error("cannot open checkpoint: " + path);

    char magic[8];
    r.read_bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CorruptFileError("not a checkpoint file: " + path);
    const uint32_t version = r.read_pod<uint32_t>();
    if (version != kVersion)
        throw VersionMismatchError("checkpoint " + path + " has version " +
                                   std::to_string(version) + ", expected " +
                                   std::to_string(kVersion));

    LoadedCheckpoint out;
    TrainState& state = out.state;
    state.step = r.read_pod<uint64_t>();
    state.seed = r.read_pod<uint64_t>();
    state.last.loss = r.read_pod<double>();
    state.last.lr = r.read_pod<double>();
    state.last.tau = r.read_pod<double>();
    state.last.grad_norm = r.read_pod<double>();
    state.last.target_variance = r.read_pod<double>();
    state.last.target_variance_min = r.read_pod<double>();
    const ViTConfig enc_cfg = r.read_vit_config();
    const ViTConfig pred_cfg = r.read_vit_config();
    out.config_text = r.read_string();

    validate_jepa_configs(enc_cfg, pred_cfg);
    state.model.enc_cfg = enc_cfg;
    state.model.pred_cfg = pred_cfg;
    for (const auto& [name, shape] : vit_parameter_shapes(enc_cfg)) {
        state.model.ctx.add(name, shape);
        state.model.tgt.add(name, shape);
    }
    for (const auto& [name, shape] : vit_parameter_shapes(pred_cfg))
        state.model.pred.add(name, shape);
    state.model.mask_token = Tensor<float>({pred_cfg.embed_dim});

    JepaGradients<float> grads = zero_gradients(state.model);
    for_each_trainable(state.model, grads,
                       [&](const std::string& name, Tensor<float>& p, Tensor<float>&) {
                           state.m.add(name, p.shape);
                           state.v.add(name, p.shape);
                       });

    const uint64_t expected_tensors = state.model.ctx.size() + state.model.tgt.size() +
                                      state.model.pred.size() + 1 + state.m.size() +
                                      state.v.size();
    const uint64_t n_tensors = r.read_pod<uint64_t>();
    if (n_tensors != expected_tensors)
        throw CorruptFileError("checkpoint tensor count mismatch in: " + path);

    for (auto& e : state.model.ctx.entries) r.read_tensor_into("ctx." + e.name, e.tensor);
    for (auto& e : state.model.tgt.entries) r.read_tensor_into("tgt." + e.name, e.tensor);
    for (auto& e : state.model.pred.entries) r.read_tensor_into("pred." + e.name, e.tensor);
    r.read_tensor_into("mask_token", state.model.mask_token);
    for (auto& e : state.m.entries) r.read_tensor_into("adam.m." + e.name, e.tensor);
    for (auto& e : state.v.entries) r.read_tensor_into("adam.v." + e.name, e.tensor);

    return out;
}

}  // namespace ajepa
