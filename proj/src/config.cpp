#include "ajepa/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ajepa/errors.hpp"

namespace ajepa {

namespace {

struct FieldRef {
    enum Kind { kInt, kUint, kDouble, kString } kind;
    void* ptr;
};

std::map<std::string, FieldRef> field_map(RunConfig& c) {
    return {
        {"seed", {FieldRef::kUint, &c.seed}},
        {"mel.sample_rate", {FieldRef::kInt, &c.mel_sample_rate}},
        {"mel.duration", {FieldRef::kDouble, &c.mel_duration}},
        {"mel.n_mels", {FieldRef::kInt, &c.mel_n_mels}},
        {"mel.n_time_bins", {FieldRef::kInt, &c.mel_n_time_bins}},
        {"mel.fmin", {FieldRef::kDouble, &c.mel_fmin}},
        {"mel.fmax", {FieldRef::kDouble, &c.mel_fmax}},
        {"mel.log_floor", {FieldRef::kDouble, &c.mel_log_floor}},
        {"patch.side", {FieldRef::kInt, &c.patch_side}},
        {"mask.lo", {FieldRef::kDouble, &c.mask_lo}},
        {"mask.hi", {FieldRef::kDouble, &c.mask_hi}},
        {"encoder.embed_dim", {FieldRef::kInt, &c.encoder_embed_dim}},
        {"encoder.depth", {FieldRef::kInt, &c.encoder_depth}},
        {"encoder.heads", {FieldRef::kInt, &c.encoder_heads}},
        {"encoder.mlp_ratio", {FieldRef::kDouble, &c.encoder_mlp_ratio}},
        {"predictor.embed_dim", {FieldRef::kInt, &c.predictor_embed_dim}},
        {"predictor.depth", {FieldRef::kInt, &c.predictor_depth}},
        {"predictor.heads", {FieldRef::kInt, &c.predictor_heads}},
        {"predictor.mlp_ratio", {FieldRef::kDouble, &c.predictor_mlp_ratio}},
        {"optim.beta1", {FieldRef::kDouble, &c.optim_beta1}},
        {"optim.beta2", {FieldRef::kDouble, &c.optim_beta2}},
        {"optim.weight_decay", {FieldRef::kDouble, &c.optim_weight_decay}},
        {"optim.eps", {FieldRef::kDouble, &c.optim_eps}},
        {"optim.peak_lr", {FieldRef::kDouble, &c.optim_peak_lr}},
        {"optim.init_lr", {FieldRef::kDouble, &c.optim_init_lr}},
        {"optim.warmup_steps", {FieldRef::kUint, &c.optim_warmup_steps}},
        {"optim.tau_base", {FieldRef::kDouble, &c.optim_tau_base}},
        {"train.batch_size", {FieldRef::kInt, &c.train_batch_size}},
        {"train.total_steps", {FieldRef::kUint, &c.train_total_steps}},
        {"train.checkpoint_every", {FieldRef::kUint, &c.train_checkpoint_every}},
        {"probe.k", {FieldRef::kInt, &c.probe_k}},
        {"probe.metric", {FieldRef::kString, &c.probe_metric}},
        {"probe.epochs", {FieldRef::kInt, &c.probe_epochs}},
        {"probe.lr", {FieldRef::kDouble, &c.probe_lr}},
        {"probe.batch_size", {FieldRef::kInt, &c.probe_batch_size}},
        {"probe.weight_decay", {FieldRef::kDouble, &c.probe_weight_decay}},
        {"synth.train_per_class", {FieldRef::kInt, &c.synth_train_per_class}},
        {"synth.test_per_class", {FieldRef::kInt, &c.synth_test_per_class}},
        {"paths.manifest", {FieldRef::kString, &c.paths_manifest}},
        {"paths.out_dir", {FieldRef::kString, &c.paths_out_dir}},
    };
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void set_field(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto fields = field_map(cfg);
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown config key: " + key);
    const std::string v = trim(value);
    const FieldRef& ref = it->second;
    auto fail = [&](const char* type) {
        throw ConfigError("config key " + key + ": cannot parse '" + v + "' as " + type);
    };
    switch (ref.kind) {
        case FieldRef::kInt: {
            int64_t out = 0;
            auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || end != v.data() + v.size()) fail("integer");
            *static_cast<int64_t*>(ref.ptr) = out;
            break;
        }
        case FieldRef::kUint: {
            uint64_t out = 0;
            auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || end != v.data() + v.size()) fail("unsigned integer");
            *static_cast<uint64_t*>(ref.ptr) = out;
            break;
        }
        case FieldRef::kDouble: {
            double out = 0.0;
            auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || end != v.data() + v.size()) fail("number");
            *static_cast<double*>(ref.ptr) = out;
            break;
        }
        case FieldRef::kString:
            *static_cast<std::string*>(ref.ptr) = v;
            break;
    }
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

std::string format_field(const FieldRef& ref) {
    switch (ref.kind) {
        case FieldRef::kInt:
            return std::to_string(*static_cast<int64_t*>(ref.ptr));
        case FieldRef::kUint:
            return std::to_string(*static_cast<uint64_t*>(ref.ptr));
        case FieldRef::kDouble:
            return format_double(*static_cast<double*>(ref.ptr));
        case FieldRef::kString:
            return *static_cast<std::string*>(ref.ptr);
    }
    return "";
}

}  // namespace

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              " is not of the form 'key = value': " + stripped);
        set_field(cfg, trim(stripped.substr(0, eq)), stripped.substr(eq + 1));
    }
}

RunConfig parse_config(const std::string& file_path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    if (!file_path.empty()) {
        std::ifstream f(file_path);
        if (!f) throw ConfigError("cannot open config file: " + file_path);
        std::stringstream buf;
        buf << f.rdbuf();
        apply_config_text(cfg, buf.str());
    }
    for (const auto& [key, value] : overrides) set_field(cfg, key, value);
    cfg.validate();
    return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
    RunConfig& mutable_cfg = const_cast<RunConfig&>(cfg);
    std::string out;
    for (auto& [key, ref] : field_map(mutable_cfg)) {  // std::map: sorted keys
        out += key;
        out += " = ";
        out += format_field(ref);
        out += "\n";
    }
    return out;
}

void RunConfig::validate() const {
    auto require = [](bool ok, const std::string& key, const std::string& constraint) {
        if (!ok) throw ConfigError("config key " + key + ": " + constraint);
    };
    require(patch_side > 0, "patch.side", "must be positive");
    require(mel_n_mels % patch_side == 0, "mel.n_mels",
            "must be divisible by patch.side (" + std::to_string(mel_n_mels) + " vs " +
                std::to_string(patch_side) + ")");
    require(mel_n_time_bins % patch_side == 0, "mel.n_time_bins",
            "must be divisible by patch.side (" + std::to_string(mel_n_time_bins) +
                " vs " + std::to_string(patch_side) + ")");
    require(mask_lo > 0.0 && mask_hi < 1.0 && mask_lo <= mask_hi, "mask.lo/mask.hi",
            "must satisfy 0 < lo <= hi < 1");
    require(encoder_depth >= 1, "encoder.depth", "must be >= 1");
    require(predictor_depth >= 1, "predictor.depth", "must be >= 1");
    require(train_batch_size >= 1, "train.batch_size", "must be >= 1");
    require(train_total_steps >= 1, "train.total_steps", "must be >= 1");
    require(probe_k >= 1, "probe.k", "must be >= 1");
    require(probe_metric == "cosine" || probe_metric == "euclidean", "probe.metric",
            "must be 'cosine' or 'euclidean'");
    require(probe_epochs >= 0, "probe.epochs", "must be >= 0");
    require(probe_batch_size >= 1, "probe.batch_size", "must be >= 1");
    require(synth_train_per_class >= 1 && synth_test_per_class >= 1,
            "synth.train_per_class", "per-class counts must be >= 1");

    mel_config().validate();
    encoder_config().validate();
    predictor_config().validate();
    optimizer_config().validate();
    validate_jepa_configs(encoder_config(), predictor_config());
    require(encoder_embed_dim % 4 == 0, "encoder.embed_dim",
            "must be divisible by 4 (positional encoding)");
    require(predictor_embed_dim % 4 == 0, "predictor.embed_dim",
            "must be divisible by 4 (positional encoding)");
}

MelConfig RunConfig::mel_config() const {
    return make_mel_config(static_cast<int>(mel_sample_rate), mel_duration,
                           static_cast<int>(mel_n_mels), static_cast<int>(mel_n_time_bins),
                           mel_fmin, mel_fmax, mel_log_floor);
}

ViTConfig RunConfig::encoder_config() const {
    ViTConfig cfg;
    cfg.input_dim = static_cast<size_t>(patch_side * patch_side);
    cfg.embed_dim = static_cast<size_t>(encoder_embed_dim);
    cfg.depth = static_cast<size_t>(encoder_depth);
    cfg.num_heads = static_cast<size_t>(encoder_heads);
    cfg.mlp_ratio = encoder_mlp_ratio;
    cfg.output_dim = 0;
    return cfg;
}

ViTConfig RunConfig::predictor_config() const {
    ViTConfig cfg;
    cfg.input_dim = static_cast<size_t>(encoder_embed_dim);
    cfg.embed_dim = static_cast<size_t>(predictor_embed_dim);
    cfg.depth = static_cast<size_t>(predictor_depth);
    cfg.num_heads = static_cast<size_t>(predictor_heads);
    cfg.mlp_ratio = predictor_mlp_ratio;
    cfg.output_dim = static_cast<size_t>(encoder_embed_dim);
    return cfg;
}

OptimizerConfig RunConfig::optimizer_config() const {
    OptimizerConfig cfg;
    cfg.beta1 = optim_beta1;
    cfg.beta2 = optim_beta2;
    cfg.weight_decay = optim_weight_decay;
    cfg.eps = optim_eps;
    cfg.peak_lr = optim_peak_lr;
    cfg.init_lr = optim_init_lr;
    cfg.warmup_steps = optim_warmup_steps;
    cfg.total_steps = train_total_steps;
    cfg.tau_base = optim_tau_base;
    return cfg;
}

MaskBounds RunConfig::mask_bounds() const { return {mask_lo, mask_hi}; }

ProbeConfig RunConfig::probe_config() const {
    ProbeConfig cfg;
    cfg.k = static_cast<int>(probe_k);
    cfg.metric =
        probe_metric == "euclidean" ? DistanceMetric::kEuclidean : DistanceMetric::kCosine;
    cfg.epochs = static_cast<int>(probe_epochs);
    cfg.lr = probe_lr;
    cfg.batch_size = static_cast<int>(probe_batch_size);
    cfg.weight_decay = probe_weight_decay;
    cfg.seed = seed;
    return cfg;
}

std::vector<ManifestRow> load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open manifest: " + path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();

    std::vector<ManifestRow> rows;
    std::set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;

        ManifestRow row;
        std::vector<std::string> cols;
        std::stringstream ss(stripped);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(trim(col));
        if (cols.empty() || cols[0].empty())
            throw Error("manifest line " + std::to_string(lineno) + ": missing path");

        std::filesystem::path p(cols[0]);
        if (p.is_relative()) p = base / p;
        row.path = p.string();
        if (cols.size() > 1 && !cols[1].empty()) {
            int label = 0;
            auto [end, ec] = std::from_chars(cols[1].data(), cols[1].data() + cols[1].size(), label);
            if (ec != std::errc() || end != cols[1].data() + cols[1].size())
                throw Error("manifest line " + std::to_string(lineno) + ": bad label '" +
                            cols[1] + "'");
            row.label = label;
        }
        if (cols.size() > 2 && !cols[2].empty()) {
            if (cols[2] != "train" && cols[2] != "test")
                throw Error("manifest line " + std::to_string(lineno) +
                            ": split must be train or test, got '" + cols[2] + "'");
            row.split = cols[2];
        }
        if (!seen.insert(row.path).second)
            throw Error("manifest line " + std::to_string(lineno) + ": duplicate path " +
                        row.path);
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot open for writing: " + path);
    for (const auto& row : rows) {
        f << row.path << '\t';
        if (row.label >= 0) f << row.label;
        f << '\t' << row.split << '\n';
    }
    if (!f) throw Error("write failed: " + path);
}

}  // namespace ajepa
