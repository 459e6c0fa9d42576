#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ajepa/config.hpp"
#include "ajepa/errors.hpp"

using namespace ajepa;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream f(path, std::ios::trunc);
    f << content;
    return path;
}

}  // namespace

TEST_CASE("defaults reproduce the reference setup") {
    const RunConfig cfg = parse_config("", {});
    CHECK(cfg.encoder_embed_dim == 768);
    CHECK(cfg.encoder_depth == 12);
    CHECK(cfg.encoder_heads == 12);
    CHECK(cfg.predictor_embed_dim == 384);
    CHECK(cfg.predictor_depth == 6);
    CHECK(cfg.predictor_heads == 12);
    CHECK(cfg.optim_peak_lr == 3e-4);
    CHECK(cfg.optim_init_lr == 1e-6);
    CHECK(cfg.optim_warmup_steps == 1000);
    CHECK(cfg.optim_weight_decay == 0.05);
    CHECK(cfg.optim_beta1 == 0.9);
    CHECK(cfg.optim_beta2 == 0.95);
    CHECK(cfg.mask_lo == 0.4);
    CHECK(cfg.mask_hi == 0.6);
    CHECK(cfg.train_batch_size == 256);
    CHECK(cfg.mel_n_mels == 128);
    CHECK(cfg.mel_n_time_bins == 256);
    CHECK(cfg.patch_side == 16);

    const MelConfig mel = cfg.mel_config();
    CHECK(mel.hop == 1250);
    CHECK(mel.win == 3125);
}

TEST_CASE("empty config file keeps pure defaults") {
    const std::string path = temp_file("ajepa_cfg_empty.cfg", "# nothing here\n\n");
    const RunConfig cfg = parse_config(path, {});
    CHECK(serialize_config(cfg) == serialize_config(parse_config("", {})));
    std::remove(path.c_str());
}

TEST_CASE("overrides win over file, file wins over defaults") {
    const std::string path = temp_file("ajepa_cfg_layered.cfg",
                                       "encoder.embed_dim = 64\n"
                                       "encoder.depth = 4\n"
                                       "encoder.heads = 4\n"
                                       "predictor.embed_dim = 32\n"
                                       "predictor.depth = 2\n"
                                       "predictor.heads = 4\n"
                                       "optim.warmup_steps = 10\n"
                                       "train.total_steps = 50\n");
    const RunConfig cfg = parse_config(path, {{"train.total_steps", "100"}});
    CHECK(cfg.encoder_embed_dim == 64);   // from file
    CHECK(cfg.train_total_steps == 100);  // override wins
    CHECK(cfg.optim_peak_lr == 3e-4);     // default preserved
    const std::string echoed = serialize_config(cfg);
    CHECK(echoed.find("train.total_steps = 100\n") != std::string::npos);
    std::remove(path.c_str());
}

TEST_CASE("unknown keys are rejected by name") {
    try {
        parse_config("", {{"encoder.embd_dim", "64"}});
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("encoder.embd_dim") != std::string::npos);
    }
}

TEST_CASE("unparsable values are rejected") {
    CHECK_THROWS_AS(parse_config("", {{"train.total_steps", "soon"}}), ConfigError);
    CHECK_THROWS_AS(parse_config("", {{"optim.peak_lr", "fast"}}), ConfigError);
}

TEST_CASE("inverted mask bounds are rejected with the constraint") {
    try {
        parse_config("", {{"mask.lo", "0.6"}, {"mask.hi", "0.4"}});
        CHECK(false);
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("mask") != std::string::npos);
        CHECK(msg.find("lo <= hi") != std::string::npos);
    }
}

TEST_CASE("patch divisibility is enforced") {
    CHECK_THROWS_AS(parse_config("", {{"mel.n_mels", "100"}}), ConfigError);
    CHECK_THROWS_AS(parse_config("", {{"mel.n_time_bins", "250"}}), ConfigError);
}

TEST_CASE("geometry identity duration*rate == hop*frames is enforced") {
    // 1.0 s at 32000 Hz with 256 bins gives hop 125 (fine); with 240 bins the
    // division is inexact after the patch-side check passes (240 % 16 == 0).
    CHECK_THROWS_AS(parse_config("", {{"mel.duration", "1.0"},
                                      {"mel.n_time_bins", "2064"}}),
                    Error);
}

TEST_CASE("serialize/parse round trip is stable") {
    const RunConfig cfg = parse_config(
        "", {{"encoder.embed_dim", "64"},
             {"encoder.depth", "4"},
             {"encoder.heads", "4"},
             {"predictor.embed_dim", "32"},
             {"predictor.depth", "2"},
             {"predictor.heads", "4"},
             {"optim.peak_lr", "0.00057"},
             {"mel.duration", "2.5"},
             {"mel.sample_rate", "16000"},
             {"mel.n_time_bins", "160"},
             {"mel.n_mels", "64"},
             {"seed", "777"}});
    const std::string text = serialize_config(cfg);
    RunConfig back;
    apply_config_text(back, text);
    back.validate();
    CHECK(serialize_config(back) == text);
    CHECK(back.optim_peak_lr == cfg.optim_peak_lr);
    CHECK(back.mel_duration == cfg.mel_duration);
    CHECK(back.seed == 777);
}

TEST_CASE("config lines must be key = value") {
    RunConfig cfg;
    CHECK_THROWS_AS(apply_config_text(cfg, "just some words\n"), ConfigError);
}

TEST_CASE("manifest round trip with labels and splits") {
    const auto dir = std::filesystem::temp_directory_path() / "ajepa_manifest_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "manifest.tsv").string();

    std::vector<ManifestRow> rows;
    rows.push_back({"a.wav", 0, "train"});
    rows.push_back({"sub/b.wav", 3, "test"});
    save_manifest(path, rows);

    const std::vector<ManifestRow> back = load_manifest(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].path == (dir / "a.wav").string());  // resolved against manifest dir
    CHECK(back[0].label == 0);
    CHECK(back[0].split == "train");
    CHECK(back[1].path == (dir / "sub/b.wav").string());
    CHECK(back[1].label == 3);
    CHECK(back[1].split == "test");
    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest validation errors") {
    const auto dir = std::filesystem::temp_directory_path() / "ajepa_manifest_bad";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "manifest.tsv").string();

    {
        std::ofstream f(path, std::ios::trunc);
        f << "a.wav\t0\ttrain\na.wav\t1\ttest\n";
    }
    CHECK_THROWS_AS(load_manifest(path), Error);  // duplicate path

    {
        std::ofstream f(path, std::ios::trunc);
        f << "a.wav\t0\tvalidation\n";
    }
    CHECK_THROWS_AS(load_manifest(path), Error);  // unknown split

    {
        std::ofstream f(path, std::ios::trunc);
        f << "a.wav\tzero\ttrain\n";
    }
    CHECK_THROWS_AS(load_manifest(path), Error);  // bad label
    std::filesystem::remove_all(dir);
}
