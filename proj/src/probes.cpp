#include "ajepa/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include "ajepa/errors.hpp"
#include "ajepa/optim.hpp"

namespace ajepa {

void EmbeddingSet::validate() const {
    if (vectors.size() != labels.size() || vectors.size() != ids.size())
        throw Error("embedding set: vectors, labels and ids must have equal length");
    const size_t w = width();
    for (const auto& v : vectors) {
        if (v.size() != w) throw Error("embedding set: inconsistent vector width");
        for (float x : v)
            if (!std::isfinite(x)) throw Error("embedding set: non-finite embedding value");
    }
}

std::vector<float> embed_clip(const JepaModel<float>& model, const AudioClip& clip,
                              const MelConfig& mel_cfg, size_t patch_side) {
    AudioClip prepared = resample(clip, mel_cfg.sample_rate);
    prepared = fit_duration(prepared, mel_cfg.duration);
    const MelSpectrogram spec = mel_spectrogram(prepared, mel_cfg);
    const PatchGrid grid = patchify(spec, patch_side);

    const TokenSequence<float> tokens =
        forward_target(model, grid.patches, grid.grid_h, grid.grid_w);

    const size_t w = tokens.width();
    std::vector<double> acc(w, 0.0);
    for (size_t i = 0; i < tokens.length(); ++i) {
        const float* row = tokens.tokens.data() + i * w;
        for (size_t j = 0; j < w; ++j) acc[j] += row[j];
    }
    std::vector<float> out(w);
    for (size_t j = 0; j < w; ++j)
        out[j] = static_cast<float>(acc[j] / static_cast<double>(tokens.length()));
    return out;
}

namespace {

double l2_norm(const std::vector<float>& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

double distance(const std::vector<float>& a, const std::vector<float>& b,
                DistanceMetric metric) {
    if (a.size() != b.size()) throw Error("distance: width mismatch");
    if (metric == DistanceMetric::kEuclidean) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i) {
            const double d = static_cast<double>(a[i]) - b[i];
            s += d * d;
        }
        return std::sqrt(s);
    }
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0)
        throw Error("cosine distance undefined for zero-norm vector");
    double dot = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
    return 1.0 - dot / (na * nb);
}

}  // namespace

int knn_classify(const EmbeddingSet& train, const std::vector<float>& query,
                 const ProbeConfig& cfg) {
    train.validate();
    if (train.size() == 0) throw Error("knn: empty training set");
    if (cfg.k < 1 || static_cast<size_t>(cfg.k) > train.size())
        throw Error("knn: k must lie in [1, train size]");

    std::vector<std::pair<double, size_t>> dist(train.size());
    for (size_t i = 0; i < train.size(); ++i)
        dist[i] = {distance(query, train.vectors[i], cfg.metric), i};
    // Stable neighbor order: by distance, then training index.
    std::sort(dist.begin(), dist.end());

    std::map<int, int> votes;
    for (int i = 0; i < cfg.k; ++i) votes[train.labels[dist[static_cast<size_t>(i)].second]]++;
    int best_count = 0;
    for (const auto& [label, count] : votes) best_count = std::max(best_count, count);

    // Tie break: nearest neighbor among tied classes (neighbor order already
    // resolves distance ties by index), then lowest class id via map order.
    for (int i = 0; i < cfg.k; ++i) {
        const int label = train.labels[dist[static_cast<size_t>(i)].second];
        if (votes[label] == best_count) return label;
    }
    throw Error("knn: unreachable vote state");
}

EvalResult knn_evaluate(const EmbeddingSet& train, const EmbeddingSet& test,
                        const ProbeConfig& cfg) {
    train.validate();
    test.validate();
    if (train.width() != test.width()) throw Error("knn_evaluate: width mismatch");
    std::set<int> train_labels(train.labels.begin(), train.labels.end());
    for (int label : test.labels) {
        if (train_labels.count(label) == 0)
            throw Error("knn_evaluate: test label " + std::to_string(label) +
                        " absent from training set");
    }

    EvalResult result;
    std::map<int, size_t> correct;
    for (size_t i = 0; i < test.size(); ++i) {
        const int pred = knn_classify(train, test.vectors[i], cfg);
        result.per_class_count[test.labels[i]]++;
        if (pred == test.labels[i]) correct[test.labels[i]]++;
    }
    size_t total_correct = 0;
    for (const auto& [label, count] : result.per_class_count) {
        result.per_class_accuracy[label] =
            static_cast<double>(correct[label]) / static_cast<double>(count);
        total_correct += correct[label];
    }
    result.accuracy = static_cast<double>(total_correct) / static_cast<double>(test.size());
    return result;
}

LinearProbe linear_probe_train(const EmbeddingSet& train, const ProbeConfig& cfg,
                               std::vector<double>* epoch_losses) {
    train.validate();
    if (train.size() == 0) throw Error("linear probe: empty training set");
    std::set<int> class_set(train.labels.begin(), train.labels.end());
    if (class_set.size() < 2) throw Error("linear probe: need at least 2 classes");

    LinearProbe probe;
    probe.classes.assign(class_set.begin(), class_set.end());
    const size_t width = train.width();
    const size_t n_classes = probe.classes.size();
    std::map<int, size_t> class_index;
    for (size_t j = 0; j < n_classes; ++j) class_index[probe.classes[j]] = j;

    Rng rng(cfg.seed);
    probe.weight = Tensor<float>({width, n_classes});
    probe.bias = Tensor<float>({n_classes});
    for (auto& w : probe.weight.v) w = static_cast<float>(0.02 * rng.truncated_normal());

    OptimizerConfig opt;
    opt.beta1 = 0.9;
    opt.beta2 = 0.999;
    opt.eps = 1e-8;
    opt.weight_decay = cfg.weight_decay;
    Tensor<float> m_w(probe.weight.shape), v_w(probe.weight.shape);
    Tensor<float> m_b(probe.bias.shape), v_b(probe.bias.shape);

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});

    uint64_t t = 0;
    if (epoch_losses) epoch_losses->clear();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Seeded shuffle per epoch.
        Rng shuffle_rng = rng.split(static_cast<uint64_t>(epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            const size_t bsz = end - start;

            Tensor<float> dw(probe.weight.shape);
            Tensor<float> db(probe.bias.shape);
            std::vector<double> logits(n_classes);

            for (size_t bi = start; bi < end; ++bi) {
                const auto& x = train.vectors[order[bi]];
                const size_t target = class_index.at(train.labels[order[bi]]);
                for (size_t c = 0; c < n_classes; ++c) {
                    double acc = probe.bias[c];
                    for (size_t j = 0; j < width; ++j) acc += probe.weight(j, c) * x[j];
                    logits[c] = acc;
                }
                const double mx = *std::max_element(logits.begin(), logits.end());
                double denom = 0.0;
                for (double& l : logits) {
                    l = std::exp(l - mx);
                    denom += l;
                }
                epoch_loss -= std::log(std::max(logits[target] / denom, 1e-300));
                for (size_t c = 0; c < n_classes; ++c) {
                    const double p = logits[c] / denom;
                    const double g = (p - (c == target ? 1.0 : 0.0)) / static_cast<double>(bsz);
                    db[c] += static_cast<float>(g);
                    for (size_t j = 0; j < width; ++j)
                        dw(j, c) += static_cast<float>(g * x[j]);
                }
            }

            t += 1;
            adamw_update_tensor("probe.weight", probe.weight, dw, m_w, v_w, t, cfg.lr, opt);
            adamw_update_tensor("probe.bias", probe.bias, db, m_b, v_b, t, cfg.lr, opt);
        }
        if (epoch_losses)
            epoch_losses->push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return probe;
}

int linear_probe_classify(const LinearProbe& probe, const std::vector<float>& vec) {
    const size_t width = probe.weight.rows();
    const size_t n_classes = probe.weight.cols();
    if (vec.size() != width) throw Error("linear probe: embedding width mismatch");
    double best = -std::numeric_limits<double>::infinity();
    size_t best_idx = 0;
    for (size_t c = 0; c < n_classes; ++c) {
        double acc = probe.bias[c];
        for (size_t j = 0; j < width; ++j) acc += probe.weight(j, c) * vec[j];
        if (acc > best) {  // strict: ties resolve to the lowest class id
            best = acc;
            best_idx = c;
        }
    }
    return probe.classes[best_idx];
}

EvalResult linear_probe_evaluate(const LinearProbe& probe, const EmbeddingSet& test) {
    test.validate();
    EvalResult result;
    std::map<int, size_t> correct;
    for (size_t i = 0; i < test.size(); ++i) {
        const int pred = linear_probe_classify(probe, test.vectors[i]);
        result.per_class_count[test.labels[i]]++;
        if (pred == test.labels[i]) correct[test.labels[i]]++;
    }
    size_t total_correct = 0;
    for (const auto& [label, count] : result.per_class_count) {
        result.per_class_accuracy[label] =
            static_cast<double>(correct[label]) / static_cast<double>(count);
        total_correct += correct[label];
    }
    result.accuracy =
        test.size() == 0 ? 0.0
                         : static_cast<double>(total_correct) / static_cast<double>(test.size());
    return result;
}

namespace {
constexpr char kEmbMagic[8] = {'A', 'J', 'E', 'M', 'B', 'D', '0', '1'};
}

void save_embeddings(const std::string& path, const EmbeddingSet& set) {
    set.validate();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open for writing: " + path);
    f.write(kEmbMagic, sizeof(kEmbMagic));
    const uint64_t count = set.size();
    f.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (size_t i = 0; i < set.size(); ++i) {
        const uint32_t id_len = static_cast<uint32_t>(set.ids[i].size());
        f.write(reinterpret_cast<const char*>(&id_len), sizeof(id_len));
        f.write(set.ids[i].data(), id_len);
        const int64_t label = set.labels[i];
        f.write(reinterpret_cast<const char*>(&label), sizeof(label));
        const uint32_t width = static_cast<uint32_t>(set.vectors[i].size());
        f.write(reinterpret_cast<const char*>(&width), sizeof(width));
        f.write(reinterpret_cast<const char*>(set.vectors[i].data()),
                static_cast<std::streamsize>(width * sizeof(float)));
    }
    if (!f) throw Error("write failed: " + path);
}

EmbeddingSet load_embeddings(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open: " + path);
    char magic[8];
    if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kEmbMagic, 8) != 0)
        throw CorruptFileError("not an embedding file: " + path);
    uint64_t count = 0;
    if (!f.read(reinterpret_cast<char*>(&count), sizeof(count)))
        throw CorruptFileError("truncated embedding file: " + path);
    EmbeddingSet set;
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t id_len = 0;
        if (!f.read(reinterpret_cast<char*>(&id_len), sizeof(id_len)))
            throw CorruptFileError("truncated embedding file: " + path);
        std::string id(id_len, '\0');
        int64_t label = 0;
        uint32_t width = 0;
        if (!f.read(id.data(), id_len) ||
            !f.read(reinterpret_cast<char*>(&label), sizeof(label)) ||
            !f.read(reinterpret_cast<char*>(&width), sizeof(width)))
            throw CorruptFileError("truncated embedding file: " + path);
        std::vector<float> vec(width);
        if (!f.read(reinterpret_cast<char*>(vec.data()),
                    static_cast<std::streamsize>(width * sizeof(float))))
            throw CorruptFileError("truncated embedding file: " + path);
        set.ids.push_back(std::move(id));
        set.labels.push_back(static_cast<int>(label));
        set.vectors.push_back(std::move(vec));
    }
    set.validate();
    return set;
}

}  // namespace ajepa
