#pragma once

#include <string>
#include <vector>

#include "ajepa/config.hpp"
#include "ajepa/trainer.hpp"

namespace ajepa {

// Command implementations behind the CLI. Each returns a process exit code
// and reports progress on stdout.

// Loads manifest clips through the DSP pipeline and returns patch grids in
// manifest order (split filter: "train", "test" or "all").
std::vector<PatchGrid> load_patch_grids(const RunConfig& cfg,
                                        const std::vector<ManifestRow>& rows,
                                        const std::string& split);

// Pretraining loop: deterministic seed-derived batch order, metrics JSONL,
// periodic checkpoints (checkpoint_last.bin) and a final checkpoint
// (checkpoint_final.bin) in out_dir. `resume` resumes from a checkpoint
// written by the same configuration.
int cmd_pretrain(const RunConfig& cfg, const std::string& out_dir,
                 const std::string& resume);

int cmd_synth_data(const RunConfig& cfg, const std::string& out_dir);

int cmd_embed(const std::string& checkpoint_path, const std::string& manifest_path,
              const std::string& out_path, const std::string& split);

// mode: "knn" or "linear". Either both embedding files are given, or a
// checkpoint plus a manifest (embeddings are computed on the fly).
int cmd_probe(const RunConfig& cfg, const std::string& mode,
              const std::string& train_embeddings, const std::string& test_embeddings,
              const std::string& checkpoint_path, const std::string& manifest_path,
              const std::string& report_path);

int cmd_inspect(const std::string& checkpoint_path);

}  // namespace ajepa
