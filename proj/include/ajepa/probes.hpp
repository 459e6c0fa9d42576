#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ajepa/dsp.hpp"
#include "ajepa/jepa.hpp"

namespace ajepa {

// Frozen clip-level embeddings with class labels.
struct EmbeddingSet {
    std::vector<std::vector<float>> vectors;
    std::vector<int> labels;
    std::vector<std::string> ids;

    size_t size() const { return vectors.size(); }
    size_t width() const { return vectors.empty() ? 0 : vectors[0].size(); }
    void validate() const;
};

enum class DistanceMetric { kCosine, kEuclidean };

struct ProbeConfig {
    int k = 5;
    DistanceMetric metric = DistanceMetric::kCosine;
    // Linear-probe hyperparameters, fixed across tasks.
    int epochs = 50;
    double lr = 1e-3;
    int batch_size = 64;
    double weight_decay = 0.0;
    uint64_t seed = 0;
};

// Full pipeline: resample -> fit to the configured duration -> log-mel ->
// patchify -> target encoder -> mean pool over patch tokens. Returns one
// vector of encoder width.
std::vector<float> embed_clip(const JepaModel<float>& model, const AudioClip& clip,
                              const MelConfig& mel_cfg, size_t patch_side);

// k nearest neighbors under the configured metric, majority vote. Ties are
// broken by the nearest neighbor among the tied classes, then by the lowest
// class id.
int knn_classify(const EmbeddingSet& train, const std::vector<float>& query,
                 const ProbeConfig& cfg);

struct EvalResult {
    double accuracy = 0.0;
    std::map<int, double> per_class_accuracy;
    std::map<int, size_t> per_class_count;
};

EvalResult knn_evaluate(const EmbeddingSet& train, const EmbeddingSet& test,
                        const ProbeConfig& cfg);

// Single affine map trained with softmax cross-entropy and Adam-style
// updates under the fixed hyperparameters. Deterministic given cfg.seed.
struct LinearProbe {
    Tensor<float> weight;  // [width x num_classes]
    Tensor<float> bias;    // [num_classes]
    std::vector<int> classes;  // sorted class ids; column j scores classes[j]
};

// epoch_losses, when given, receives the mean cross-entropy per epoch
// (measured on the pre-update weights of each mini-batch).
LinearProbe linear_probe_train(const EmbeddingSet& train, const ProbeConfig& cfg,
                               std::vector<double>* epoch_losses = nullptr);

int linear_probe_classify(const LinearProbe& probe, const std::vector<float>& vec);

EvalResult linear_probe_evaluate(const LinearProbe& probe, const EmbeddingSet& test);

// Embedding container: one record per clip (id, label, width, row-major
// 32-bit floats).
void save_embeddings(const std::string& path, const EmbeddingSet& set);
EmbeddingSet load_embeddings(const std::string& path);

}  // namespace ajepa
