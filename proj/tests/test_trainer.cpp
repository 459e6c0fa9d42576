#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ajepa/errors.hpp"
#include "ajepa/trainer.hpp"

using namespace ajepa;

namespace {

ViTConfig tiny_encoder() {
    ViTConfig cfg;
    cfg.input_dim = 16;
    cfg.embed_dim = 8;
    cfg.depth = 2;
    cfg.num_heads = 2;
    return cfg;
}

ViTConfig tiny_predictor() {
    ViTConfig cfg;
    cfg.input_dim = 8;
    cfg.embed_dim = 8;
    cfg.depth = 1;
    cfg.num_heads = 2;
    cfg.output_dim = 8;
    return cfg;
}

OptimizerConfig tiny_optim() {
    OptimizerConfig cfg;
    cfg.total_steps = 100;
    cfg.warmup_steps = 5;
    cfg.peak_lr = 1e-3;
    cfg.tau_base = 0.99;
    return cfg;
}

// Deterministic little corpus of patch grids, 2x2 grid of 4x4 patches.
std::vector<PatchGrid> tiny_grids(size_t count, uint64_t seed) {
    std::vector<PatchGrid> grids;
    Rng rng(seed);
    for (size_t i = 0; i < count; ++i) {
        PatchGrid g;
        g.grid_h = 2;
        g.grid_w = 2;
        g.patch_side = 4;
        g.patches = Tensor<float>({4, 16});
        for (auto& x : g.patches.v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
        grids.push_back(std::move(g));
    }
    return grids;
}

std::vector<const PatchGrid*> as_batch(const std::vector<PatchGrid>& grids) {
    std::vector<const PatchGrid*> out;
    for (const auto& g : grids) out.push_back(&g);
    return out;
}

bool states_identical(const TrainState& a, const TrainState& b) {
    if (a.step != b.step || a.seed != b.seed) return false;
    for (size_t i = 0; i < a.model.ctx.entries.size(); ++i)
        if (a.model.ctx.entries[i].tensor.v != b.model.ctx.entries[i].tensor.v)
            return false;
    for (size_t i = 0; i < a.model.tgt.entries.size(); ++i)
        if (a.model.tgt.entries[i].tensor.v != b.model.tgt.entries[i].tensor.v)
            return false;
    for (size_t i = 0; i < a.model.pred.entries.size(); ++i)
        if (a.model.pred.entries[i].tensor.v != b.model.pred.entries[i].tensor.v)
            return false;
    if (a.model.mask_token.v != b.model.mask_token.v) return false;
    for (size_t i = 0; i < a.m.entries.size(); ++i)
        if (a.m.entries[i].tensor.v != b.m.entries[i].tensor.v) return false;
    for (size_t i = 0; i < a.v.entries.size(); ++i)
        if (a.v.entries[i].tensor.v != b.v.entries[i].tensor.v) return false;
    return true;
}

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("train_step smoke contract") {
    TrainState state = make_train_state(tiny_encoder(), tiny_predictor(), 7);
    const std::vector<PatchGrid> grids = tiny_grids(2, 1);
    Rng rng(0);
    const TrainMetrics m =
        train_step(state, as_batch(grids), MaskBounds{0.4, 0.6}, tiny_optim(), rng);
    CHECK(state.step == 1);
    CHECK(std::isfinite(m.loss));
    CHECK(m.loss >= 0.0);
    CHECK(std::isfinite(m.grad_norm));
    CHECK(m.grad_norm > 0.0);
    CHECK(m.lr == 1e-6);  // schedule at step 0
    CHECK(m.target_variance > 0.0);
    CHECK(m.target_variance_min > 0.0);
}

TEST_CASE("after a step the target is the convex combination of old target and new context") {
    TrainState state = make_train_state(tiny_encoder(), tiny_predictor(), 11);
    const std::vector<PatchGrid> grids = tiny_grids(3, 2);
    const OptimizerConfig opt = tiny_optim();

    // A couple of warmup steps so target and context differ.
    for (int s = 0; s < 2; ++s) {
        Rng rng(100 + s);
        train_step(state, as_batch(grids), MaskBounds{0.4, 0.6}, opt, rng);
    }

    const ParameterSet<float> tgt_before = state.model.tgt;
    const uint64_t step_before = state.step;
    Rng rng(55);
    train_step(state, as_batch(grids), MaskBounds{0.4, 0.6}, opt, rng);

    // Optimizer first, EMA second: recompute tau * old_tgt + (1-tau) * new_ctx.
    const double tau = tau_schedule(step_before, opt.total_steps, opt.tau_base);
    for (size_t e = 0; e < state.model.tgt.entries.size(); ++e) {
        const auto& tgt_now = state.model.tgt.entries[e].tensor;
        const auto& tgt_old = tgt_before.entries[e].tensor;
        const auto& ctx_now = state.model.ctx.entries[e].tensor;
        for (size_t i = 0; i < tgt_now.size(); ++i) {
            const double expected = tau * tgt_old[i] + (1.0 - tau) * ctx_now[i];
            CHECK(std::abs(tgt_now[i] - expected) < 1e-6);
            const double lo = std::min<double>(tgt_old[i], ctx_now[i]) - 1e-7;
            const double hi = std::max<double>(tgt_old[i], ctx_now[i]) + 1e-7;
            CHECK(tgt_now[i] >= lo);
            CHECK(tgt_now[i] <= hi);
        }
    }
}

TEST_CASE("loss decreases when overfitting a fixed repeated batch") {
    TrainState state = make_train_state(tiny_encoder(), tiny_predictor(), 21);
    const std::vector<PatchGrid> grids = tiny_grids(2, 3);
    OptimizerConfig opt = tiny_optim();
    opt.peak_lr = 3e-3;
    opt.warmup_steps = 2;
    opt.total_steps = 1000;  // effectively flat lr over 50 steps

    double first = 0.0, last = 0.0;
    for (int s = 0; s < 50; ++s) {
        Rng rng(9);  // identical masks every step: a fixed problem
        const TrainMetrics m =
            train_step(state, as_batch(grids), MaskBounds{0.5, 0.5}, opt, rng);
        if (s == 0) first = m.loss;
        last = m.loss;
    }
    CHECK(last < first);
    CHECK(last < 0.5 * first);
}

TEST_CASE("identical seeds and data give bit-identical trajectories") {
    const std::vector<PatchGrid> grids = tiny_grids(4, 4);
    TrainState a = make_train_state(tiny_encoder(), tiny_predictor(), 33);
    TrainState b = make_train_state(tiny_encoder(), tiny_predictor(), 33);
    for (int s = 0; s < 5; ++s) {
        Rng ra(200 + s), rb(200 + s);
        train_step(a, as_batch(grids), MaskBounds{0.4, 0.6}, tiny_optim(), ra);
        train_step(b, as_batch(grids), MaskBounds{0.4, 0.6}, tiny_optim(), rb);
    }
    CHECK(states_identical(a, b));
}

TEST_CASE("checkpoint save/load/save is byte-identical") {
    TrainState state = make_train_state(tiny_encoder(), tiny_predictor(), 42);
    const std::vector<PatchGrid> grids = tiny_grids(2, 5);
    Rng rng(1);
    train_step(state, as_batch(grids), MaskBounds{0.4, 0.6}, tiny_optim(), rng);

    const std::string path1 = temp_file("ajepa_ckpt_a.bin");
    const std::string path2 = temp_file("ajepa_ckpt_b.bin");
    const std::string config_text = "seed = 42\n";
    save_checkpoint(path1, state, config_text);

    const LoadedCheckpoint loaded = load_checkpoint(path1);
    CHECK(loaded.config_text == config_text);
    CHECK(states_identical(loaded.state, state));
    CHECK(loaded.state.last.loss == state.last.loss);
    save_checkpoint(path2, loaded.state, loaded.config_text);

    std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::remove(path1.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("resume reproduces the uninterrupted run bit-exactly") {
    const std::vector<PatchGrid> grids = tiny_grids(4, 6);
    const OptimizerConfig opt = tiny_optim();
    const MaskBounds bounds{0.4, 0.6};

    // Uninterrupted: 20 steps.
    TrainState full = make_train_state(tiny_encoder(), tiny_predictor(), 77);
    for (int s = 0; s < 20; ++s) {
        Rng rng(500 + s);
        train_step(full, as_batch(grids), bounds, opt, rng);
    }

    // Interrupted at step 10, checkpointed, resumed for 10 more.
    TrainState part = make_train_state(tiny_encoder(), tiny_predictor(), 77);
    for (int s = 0; s < 10; ++s) {
        Rng rng(500 + s);
        train_step(part, as_batch(grids), bounds, opt, rng);
    }
    const std::string path = temp_file("ajepa_ckpt_resume.bin");
    save_checkpoint(path, part, "cfg\n");
    TrainState resumed = load_checkpoint(path).state;
    for (int s = 10; s < 20; ++s) {
        Rng rng(500 + s);
        train_step(resumed, as_batch(grids), bounds, opt, rng);
    }
    CHECK(states_identical(resumed, full));
    std::remove(path.c_str());
}

TEST_CASE("truncated checkpoint raises a corrupt-file error") {
    TrainState state = make_train_state(tiny_encoder(), tiny_predictor(), 1);
    const std::string path = temp_file("ajepa_ckpt_trunc.bin");
    save_checkpoint(path, state, "cfg\n");
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(load_checkpoint(path), CorruptFileError);
    std::remove(path.c_str());
}

TEST_CASE("bad magic and bad version raise distinct errors") {
    TrainState state = make_train_state(tiny_encoder(), tiny_predictor(), 2);
    const std::string path = temp_file("ajepa_ckpt_tamper.bin");

    save_checkpoint(path, state, "cfg\n");
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XX", 2);
    }
    CHECK_THROWS_AS(load_checkpoint(path), CorruptFileError);

    save_checkpoint(path, state, "cfg\n");
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);  // version field follows the magic
        const uint32_t bad_version = 99;
        f.write(reinterpret_cast<const char*>(&bad_version), sizeof(bad_version));
    }
    CHECK_THROWS_AS(load_checkpoint(path), VersionMismatchError);
    std::remove(path.c_str());
}

TEST_CASE("tampered tensor shape raises a shape-mismatch error") {
    TrainState state = make_train_state(tiny_encoder(), tiny_predictor(), 3);
    const std::string path = temp_file("ajepa_ckpt_shape.bin");
    save_checkpoint(path, state, "cfg\n");

    // Locate the first tensor record by its name and bump a dimension.
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::string needle = "ctx.input_proj.weight";
    const size_t at = bytes.find(needle);
    REQUIRE(at != std::string::npos);
    const size_t dims_offset = at + needle.size() + 1 + 1;  // dtype byte + ndim byte
    uint64_t dim0 = 0;
    std::memcpy(&dim0, bytes.data() + dims_offset, sizeof(dim0));
    dim0 += 1;
    f.seekp(static_cast<std::streamoff>(dims_offset));
    f.write(reinterpret_cast<const char*>(&dim0), sizeof(dim0));
    f.flush();
    CHECK_THROWS_AS(load_checkpoint(path), ShapeMismatchError);
    std::remove(path.c_str());
}

TEST_CASE("train_step rejects inconsistent grids and empty batches") {
    TrainState state = make_train_state(tiny_encoder(), tiny_predictor(), 4);
    std::vector<PatchGrid> grids = tiny_grids(2, 7);
    grids[1].grid_w = 1;
    Rng rng(0);
    CHECK_THROWS_AS(
        train_step(state, as_batch(grids), MaskBounds{0.4, 0.6}, tiny_optim(), rng),
        Error);
    std::vector<const PatchGrid*> empty;
    CHECK_THROWS_AS(train_step(state, empty, MaskBounds{0.4, 0.6}, tiny_optim(), rng),
                    Error);
}
