#include "ajepa/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "ajepa/errors.hpp"
#include "ajepa/probes.hpp"
#include "ajepa/synth.hpp"
#include "ajepa/wav.hpp"

namespace ajepa {

namespace {

// Stream ids for seed-derived generators. Every randomness consumer hangs
// off (seed, stream, index) so that resuming at a step reproduces the
// uninterrupted run exactly.
constexpr uint64_t kStreamShuffle = 101;
constexpr uint64_t kStreamMask = 202;

std::vector<size_t> epoch_permutation(uint64_t seed, uint64_t epoch, size_t n) {
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng rng = Rng(seed).split(kStreamShuffle, epoch);
    for (size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    return perm;
}

// Clip indices for one step: consecutive positions in the concatenation of
// per-epoch permutations. Stateless in (seed, step), so resume needs no
// generator state.
std::vector<size_t> batch_indices(uint64_t seed, uint64_t step, size_t batch_size,
                                  size_t n_clips) {
    std::vector<size_t> out(batch_size);
    uint64_t pos = step * batch_size;
    uint64_t epoch = pos / n_clips;
    std::vector<size_t> perm = epoch_permutation(seed, epoch, n_clips);
    for (size_t i = 0; i < batch_size; ++i) {
        const uint64_t e = (pos + i) / n_clips;
        if (e != epoch) {
            epoch = e;
            perm = epoch_permutation(seed, epoch, n_clips);
        }
        out[i] = perm[(pos + i) % n_clips];
    }
    return out;
}

void append_metrics(const std::string& path, uint64_t step, const TrainMetrics& m) {
    nlohmann::json rec;
    rec["step"] = step;
    rec["loss"] = m.loss;
    rec["lr"] = m.lr;
    rec["tau"] = m.tau;
    rec["grad_norm"] = m.grad_norm;
    rec["target_variance"] = m.target_variance;
    rec["target_variance_min"] = m.target_variance_min;
    std::ofstream f(path, std::ios::app);
    if (!f) throw Error("cannot open metrics log: " + path);
    f << rec.dump() << "\n";
}

}  // namespace

std::vector<PatchGrid> load_patch_grids(const RunConfig& cfg,
                                        const std::vector<ManifestRow>& rows,
                                        const std::string& split) {
    const MelConfig mel_cfg = cfg.mel_config();
    std::vector<PatchGrid> grids;
    for (const auto& row : rows) {
        if (split != "all" && row.split != split) continue;
        AudioClip clip = read_wav(row.path);
        clip = resample(clip, static_cast<int>(mel_cfg.sample_rate));
        clip = fit_duration(clip, mel_cfg.duration);
        const MelSpectrogram spec = mel_spectrogram(clip, mel_cfg);
        grids.push_back(patchify(spec, static_cast<size_t>(cfg.patch_side)));
    }
    return grids;
}

int cmd_pretrain(const RunConfig& cfg, const std::string& out_dir,
                 const std::string& resume) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    const std::string config_text = serialize_config(cfg);
    std::cout << "resolved config:\n" << config_text;

    const std::vector<ManifestRow> rows = load_manifest(cfg.paths_manifest);
    const std::vector<PatchGrid> grids = load_patch_grids(cfg, rows, "train");
    if (grids.empty()) throw Error("pretrain: no train-split clips in manifest");
    std::cout << "loaded " << grids.size() << " training clips\n";

    TrainState state;
    if (resume.empty()) {
        state = make_train_state(cfg.encoder_config(), cfg.predictor_config(), cfg.seed);
    } else {
        LoadedCheckpoint loaded = load_checkpoint(resume);
        if (loaded.config_text != config_text)
            throw ConfigError("resume: checkpoint " + resume +
                              " was written with a different configuration");
        state = std::move(loaded.state);
        std::cout << "resumed from " << resume << " at step " << state.step << "\n";
    }

    const OptimizerConfig opt_cfg = cfg.optimizer_config();
    const MaskBounds bounds = cfg.mask_bounds();
    const size_t batch_size = static_cast<size_t>(cfg.train_batch_size);
    const std::string metrics_path =
        (std::filesystem::path(out_dir) / "metrics.jsonl").string();
    const std::string last_path =
        (std::filesystem::path(out_dir) / "checkpoint_last.bin").string();
    const std::string prev_path =
        (std::filesystem::path(out_dir) / "checkpoint_prev.bin").string();
    const std::string final_path =
        (std::filesystem::path(out_dir) / "checkpoint_final.bin").string();

    while (state.step < cfg.train_total_steps) {
        const uint64_t step = state.step;
        const std::vector<size_t> idx = batch_indices(cfg.seed, step, batch_size, grids.size());
        std::vector<const PatchGrid*> batch(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) batch[i] = &grids[idx[i]];

        Rng step_rng = Rng(cfg.seed).split(kStreamMask, step);
        const TrainMetrics m = train_step(state, batch, bounds, opt_cfg, step_rng);
        append_metrics(metrics_path, step, m);

        if (state.step % cfg.train_checkpoint_every == 0 ||
            state.step == cfg.train_total_steps) {
            // Keep the previous periodic checkpoint around; saves are
            // temp-file + rename, so an interrupt never clobbers either.
            std::error_code ec;
            if (std::filesystem::exists(last_path))
                std::filesystem::rename(last_path, prev_path, ec);
            save_checkpoint(last_path, state, config_text);
        }
        if (state.step % 100 == 0 || state.step == cfg.train_total_steps)
            std::cout << "step " << state.step << " loss " << m.loss << " lr " << m.lr
                      << " tau " << m.tau << " target_var " << m.target_variance << "\n";
    }

    save_checkpoint(final_path, state, config_text);
    std::cout << "wrote " << final_path << "\n";
    return 0;
}

int cmd_synth_data(const RunConfig& cfg, const std::string& out_dir) {
    SynthSpec spec;
    spec.sample_rate = static_cast<int>(cfg.mel_sample_rate);
    spec.duration = cfg.mel_duration;
    spec.train_per_class = static_cast<int>(cfg.synth_train_per_class);
    spec.test_per_class = static_cast<int>(cfg.synth_test_per_class);
    spec.seed = cfg.seed;
    const auto rows = synth_dataset(spec, out_dir);
    std::cout << "wrote " << rows.size() << " clips and manifest.tsv to " << out_dir
              << "\n";
    return 0;
}

int cmd_embed(const std::string& checkpoint_path, const std::string& manifest_path,
              const std::string& out_path, const std::string& split) {
    const LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
    RunConfig cfg;
    apply_config_text(cfg, loaded.config_text);
    cfg.validate();
    const MelConfig mel_cfg = cfg.mel_config();

    EmbeddingSet set;
    std::vector<std::string> failures;
    for (const auto& row : load_manifest(manifest_path)) {
        if (split != "all" && row.split != split) continue;
        try {
            AudioClip clip = read_wav(row.path);
            set.vectors.push_back(
                embed_clip(loaded.state.model, clip, mel_cfg,
                           static_cast<size_t>(cfg.patch_side)));
            set.labels.push_back(row.label);
            set.ids.push_back(row.path);
        } catch (const std::exception& e) {
            failures.push_back(row.path + ": " + e.what());
        }
    }
    save_embeddings(out_path, set);
    std::cout << "wrote " << set.size() << " embeddings to " << out_path << "\n";
    if (!failures.empty()) {
        std::cout << failures.size() << " clips failed:\n";
        for (const auto& f : failures) std::cout << "  " << f << "\n";
        return 1;
    }
    return 0;
}

int cmd_probe(const RunConfig& cfg, const std::string& mode,
              const std::string& train_embeddings, const std::string& test_embeddings,
              const std::string& checkpoint_path, const std::string& manifest_path,
              const std::string& report_path) {
    if (mode != "knn" && mode != "linear")
        throw Error("probe: mode must be 'knn' or 'linear', got '" + mode + "'");

    EmbeddingSet train, test;
    std::string checkpoint_id = checkpoint_path;
    if (!train_embeddings.empty() && !test_embeddings.empty()) {
        train = load_embeddings(train_embeddings);
        test = load_embeddings(test_embeddings);
        checkpoint_id = train_embeddings;
    } else if (!checkpoint_path.empty() && !manifest_path.empty()) {
        const LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
        RunConfig ckpt_cfg;
        apply_config_text(ckpt_cfg, loaded.config_text);
        ckpt_cfg.validate();
        const MelConfig mel_cfg = ckpt_cfg.mel_config();
        for (const auto& row : load_manifest(manifest_path)) {
            EmbeddingSet& dst = row.split == "test" ? test : train;
            AudioClip clip = read_wav(row.path);
            dst.vectors.push_back(embed_clip(loaded.state.model, clip, mel_cfg,
                                             static_cast<size_t>(ckpt_cfg.patch_side)));
            dst.labels.push_back(row.label);
            dst.ids.push_back(row.path);
        }
    } else {
        throw Error("probe: need either --train-embeddings/--test-embeddings or "
                    "--checkpoint/--manifest");
    }

    for (int label : train.labels)
        if (label < 0) throw Error("probe: training set contains unlabeled clips");
    for (int label : test.labels)
        if (label < 0) throw Error("probe: test set contains unlabeled clips");

    const ProbeConfig probe_cfg = cfg.probe_config();
    EvalResult result;
    nlohmann::json report;
    report["mode"] = mode;
    report["checkpoint"] = checkpoint_id;
    report["n_train"] = train.size();
    report["n_test"] = test.size();

    if (mode == "knn") {
        result = knn_evaluate(train, test, probe_cfg);
        report["config"] = {{"k", probe_cfg.k},
                            {"metric", cfg.probe_metric}};
    } else {
        const LinearProbe probe = linear_probe_train(train, probe_cfg);
        result = linear_probe_evaluate(probe, test);
        report["config"] = {{"epochs", probe_cfg.epochs},
                            {"lr", probe_cfg.lr},
                            {"batch_size", probe_cfg.batch_size},
                            {"weight_decay", probe_cfg.weight_decay},
                            {"seed", probe_cfg.seed}};
    }

    report["accuracy"] = result.accuracy;
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [label, acc] : result.per_class_accuracy)
        per_class[std::to_string(label)] = acc;
    report["per_class_accuracy"] = per_class;

    const std::string text = report.dump(2) + "\n";
    if (!report_path.empty()) {
        std::ofstream f(report_path, std::ios::trunc);
        if (!f) throw Error("cannot open report file: " + report_path);
        f << text;
    }
    std::cout << text;
    return 0;
}

int cmd_inspect(const std::string& checkpoint_path) {
    const LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
    const TrainState& state = loaded.state;

    const size_t enc_count = state.model.ctx.parameter_count();
    const size_t pred_count = state.model.pred.parameter_count();
    const size_t mask_count = state.model.mask_token.size();

    std::cout << "checkpoint: " << checkpoint_path << "\n";
    std::cout << "step: " << state.step << "\n";
    std::cout << "seed: " << state.seed << "\n";
    std::cout << "last loss: " << state.last.loss << "\n";
    std::cout << "parameters:\n";
    std::cout << "  context encoder:  " << enc_count << "\n";
    std::cout << "  target encoder:   " << state.model.tgt.parameter_count() << "\n";
    std::cout << "  predictor:        " << pred_count << "\n";
    std::cout << "  mask token:       " << mask_count << "\n";
    std::cout << "  trainable total:  " << enc_count + pred_count + mask_count
              << " (context + predictor + mask token)\n";
    std::cout << "  inference total:  " << jepa_inference_count(state.model)
              << " (one encoder)\n";
    std::cout << "config:\n" << loaded.config_text;
    return 0;
}

}  // namespace ajepa
