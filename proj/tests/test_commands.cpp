#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ajepa/commands.hpp"
#include "ajepa/errors.hpp"

using namespace ajepa;

namespace {

namespace fs = std::filesystem;

std::string read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

// Small end-to-end configuration: 16 kHz, 0.5 s clips, 32x32 spectrogram,
// patch side 8 -> 16 patches of dim 64.
RunConfig tiny_cfg(const std::string& manifest) {
    return parse_config(
        "", {{"mel.sample_rate", "16000"},
             {"mel.duration", "0.5"},
             {"mel.n_mels", "32"},
             {"mel.n_time_bins", "32"},
             {"patch.side", "8"},
             {"encoder.embed_dim", "16"},
             {"encoder.depth", "1"},
             {"encoder.heads", "2"},
             {"predictor.embed_dim", "8"},
             {"predictor.depth", "1"},
             {"predictor.heads", "2"},
             {"train.batch_size", "4"},
             {"train.total_steps", "12"},
             {"train.checkpoint_every", "6"},
             {"optim.warmup_steps", "3"},
             {"synth.train_per_class", "2"},
             {"synth.test_per_class", "1"},
             {"probe.epochs", "10"},
             {"seed", "31"},
             {"paths.manifest", manifest}});
}

struct Workspace {
    fs::path root;
    std::string manifest;

    explicit Workspace(const std::string& name) {
        root = fs::temp_directory_path() / name;
        fs::remove_all(root);
        fs::create_directories(root);
        manifest = (root / "data" / "manifest.tsv").string();
    }
    ~Workspace() { fs::remove_all(root); }

    std::string dir(const std::string& name) const { return (root / name).string(); }
};

}  // namespace

TEST_CASE("synth + pretrain + embed + probe + inspect work end to end") {
    Workspace ws("ajepa_cmd_e2e");
    RunConfig cfg = tiny_cfg(ws.manifest);
    REQUIRE(cmd_synth_data(cfg, ws.dir("data")) == 0);

    REQUIRE(cmd_pretrain(cfg, ws.dir("run"), "") == 0);
    CHECK(fs::exists(ws.dir("run") + "/checkpoint_final.bin"));
    CHECK(fs::exists(ws.dir("run") + "/checkpoint_last.bin"));

    // Metrics log: one record per step with a monotone step field.
    std::ifstream metrics(ws.dir("run") + "/metrics.jsonl");
    std::string line;
    int64_t prev_step = -1;
    size_t records = 0;
    while (std::getline(metrics, line)) {
        const auto rec = nlohmann::json::parse(line);
        CHECK(rec["step"].get<int64_t>() == prev_step + 1);
        prev_step = rec["step"].get<int64_t>();
        CHECK(rec["loss"].is_number());
        CHECK(rec["lr"].is_number());
        CHECK(rec["tau"].is_number());
        CHECK(rec["grad_norm"].is_number());
        CHECK(rec["target_variance"].is_number());
        ++records;
    }
    CHECK(records == 12);

    const std::string ckpt = ws.dir("run") + "/checkpoint_final.bin";
    REQUIRE(cmd_embed(ckpt, ws.manifest, ws.dir("run") + "/train.emb", "train") == 0);
    REQUIRE(cmd_embed(ckpt, ws.manifest, ws.dir("run") + "/test.emb", "test") == 0);

    // Re-running embed is byte-identical.
    REQUIRE(cmd_embed(ckpt, ws.manifest, ws.dir("run") + "/train2.emb", "train") == 0);
    CHECK(read_bytes(ws.dir("run") + "/train.emb") ==
          read_bytes(ws.dir("run") + "/train2.emb"));

    REQUIRE(cmd_probe(cfg, "knn", ws.dir("run") + "/train.emb",
                      ws.dir("run") + "/test.emb", "", "",
                      ws.dir("run") + "/knn.json") == 0);
    const auto knn_report = nlohmann::json::parse(read_bytes(ws.dir("run") + "/knn.json"));
    CHECK(knn_report["mode"] == "knn");
    CHECK(knn_report["accuracy"].get<double>() >= 0.0);
    CHECK(knn_report["accuracy"].get<double>() <= 1.0);
    CHECK(knn_report["config"]["k"] == 5);

    REQUIRE(cmd_probe(cfg, "linear", ws.dir("run") + "/train.emb",
                      ws.dir("run") + "/test.emb", "", "",
                      ws.dir("run") + "/linear.json") == 0);
    const auto lin_report =
        nlohmann::json::parse(read_bytes(ws.dir("run") + "/linear.json"));
    CHECK(lin_report["mode"] == "linear");
    CHECK(lin_report["config"]["epochs"] == 10);
    CHECK(lin_report["config"]["lr"].get<double>() == cfg.probe_lr);
    CHECK(lin_report["config"]["batch_size"] == 64);

    REQUIRE(cmd_inspect(ckpt) == 0);
}

TEST_CASE("pretraining twice with the same seed gives identical checkpoints") {
    Workspace ws("ajepa_cmd_det");
    RunConfig cfg = tiny_cfg(ws.manifest);
    REQUIRE(cmd_synth_data(cfg, ws.dir("data")) == 0);
    REQUIRE(cmd_pretrain(cfg, ws.dir("run_a"), "") == 0);
    REQUIRE(cmd_pretrain(cfg, ws.dir("run_b"), "") == 0);
    CHECK(read_bytes(ws.dir("run_a") + "/checkpoint_final.bin") ==
          read_bytes(ws.dir("run_b") + "/checkpoint_final.bin"));
}

TEST_CASE("resume from a mid-run checkpoint matches the uninterrupted run") {
    Workspace ws("ajepa_cmd_resume");
    RunConfig cfg = tiny_cfg(ws.manifest);
    REQUIRE(cmd_synth_data(cfg, ws.dir("data")) == 0);
    REQUIRE(cmd_pretrain(cfg, ws.dir("full"), "") == 0);

    // checkpoint_prev.bin holds step 6 of the 12-step run.
    REQUIRE(cmd_pretrain(cfg, ws.dir("resumed"), ws.dir("full") + "/checkpoint_prev.bin") == 0);
    CHECK(read_bytes(ws.dir("full") + "/checkpoint_final.bin") ==
          read_bytes(ws.dir("resumed") + "/checkpoint_final.bin"));
}

TEST_CASE("resume rejects a mismatched configuration") {
    Workspace ws("ajepa_cmd_badresume");
    RunConfig cfg = tiny_cfg(ws.manifest);
    REQUIRE(cmd_synth_data(cfg, ws.dir("data")) == 0);
    REQUIRE(cmd_pretrain(cfg, ws.dir("run"), "") == 0);
    RunConfig other = cfg;
    other.optim_peak_lr = 1e-3;
    CHECK_THROWS_AS(
        cmd_pretrain(other, ws.dir("run2"), ws.dir("run") + "/checkpoint_final.bin"),
        ConfigError);
}

TEST_CASE("embed records and skips unreadable clips with nonzero exit") {
    Workspace ws("ajepa_cmd_skip");
    RunConfig cfg = tiny_cfg(ws.manifest);
    REQUIRE(cmd_synth_data(cfg, ws.dir("data")) == 0);
    REQUIRE(cmd_pretrain(cfg, ws.dir("run"), "") == 0);

    // Append a manifest row pointing at a missing file.
    {
        std::ofstream f(ws.manifest, std::ios::app);
        f << "missing_clip.wav\t0\ttrain\n";
    }
    const int rc = cmd_embed(ws.dir("run") + "/checkpoint_final.bin", ws.manifest,
                             ws.dir("run") + "/partial.emb", "train");
    CHECK(rc != 0);
    const EmbeddingSet set = load_embeddings(ws.dir("run") + "/partial.emb");
    CHECK(set.size() == 10);  // the 10 readable train clips
}

TEST_CASE("duplicated manifest rows give identical embedding records") {
    Workspace ws("ajepa_cmd_dup");
    RunConfig cfg = tiny_cfg(ws.manifest);
    REQUIRE(cmd_synth_data(cfg, ws.dir("data")) == 0);
    REQUIRE(cmd_pretrain(cfg, ws.dir("run"), "") == 0);

    // A second manifest that lists one clip twice under different names
    // is rejected by the duplicate check, so copy the file instead.
    const auto rows = load_manifest(ws.manifest);
    const std::string dup_manifest = (ws.root / "dup.tsv").string();
    fs::copy_file(rows[0].path, ws.root / "copy.wav");
    {
        std::ofstream f(dup_manifest, std::ios::trunc);
        f << rows[0].path << "\t0\ttrain\n";
        f << (ws.root / "copy.wav").string() << "\t0\ttrain\n";
    }
    REQUIRE(cmd_embed(ws.dir("run") + "/checkpoint_final.bin", dup_manifest,
                      ws.dir("run") + "/dup.emb", "train") == 0);
    const EmbeddingSet set = load_embeddings(ws.dir("run") + "/dup.emb");
    REQUIRE(set.size() == 2);
    CHECK(set.vectors[0] == set.vectors[1]);
}
