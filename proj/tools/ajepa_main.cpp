#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "ajepa/commands.hpp"
#include "ajepa/errors.hpp"

namespace {

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> sets;
    std::string seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "Config file (flat dotted keys)");
    cmd->add_option("--set", args.sets, "Override, key=value (repeatable)");
    cmd->add_option("--seed", args.seed, "Override the master seed");
}

ajepa::RunConfig resolve_config(const CommonArgs& args) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& kv : args.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ajepa::ConfigError("--set expects key=value, got: " + kv);
        overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!args.seed.empty()) overrides.emplace_back("seed", args.seed);
    return ajepa::parse_config(args.config_file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised audio pretraining with masked latent prediction"};
    app.require_subcommand(1);

    CommonArgs pretrain_args, synth_args, probe_args;
    std::string out_dir, resume;
    std::string checkpoint_path, manifest_path, out_path, split = "all";
    std::string probe_mode = "knn", train_emb, test_emb, report_path;

    CLI::App* pretrain = app.add_subcommand("pretrain", "Run the pretraining loop");
    add_common(pretrain, pretrain_args);
    pretrain->add_option("--out", out_dir, "Output directory")->required();
    pretrain->add_option("--resume", resume, "Checkpoint to resume from");

    CLI::App* synth = app.add_subcommand("synth-data", "Generate a labeled synthetic corpus");
    add_common(synth, synth_args);
    synth->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* embed = app.add_subcommand("embed", "Extract frozen embeddings for a manifest");
    embed->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
    embed->add_option("--manifest", manifest_path, "Clip manifest")->required();
    embed->add_option("--out", out_path, "Output embedding file")->required();
    embed->add_option("--split", split, "Manifest split: train, test or all");

    CLI::App* probe = app.add_subcommand("probe", "Evaluate frozen embeddings");
    add_common(probe, probe_args);
    probe->add_option("--mode", probe_mode, "knn or linear")->required();
    probe->add_option("--train-embeddings", train_emb, "Training embedding file");
    probe->add_option("--test-embeddings", test_emb, "Test embedding file");
    probe->add_option("--checkpoint", checkpoint_path, "Checkpoint (with --manifest)");
    probe->add_option("--manifest", manifest_path, "Manifest (with --checkpoint)");
    probe->add_option("--out", report_path, "Report file (JSON)");

    CLI::App* inspect = app.add_subcommand("inspect", "Summarize a checkpoint");
    inspect->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (pretrain->parsed())
            return ajepa::cmd_pretrain(resolve_config(pretrain_args), out_dir, resume);
        if (synth->parsed())
            return ajepa::cmd_synth_data(resolve_config(synth_args), out_dir);
        if (embed->parsed())
            return ajepa::cmd_embed(checkpoint_path, manifest_path, out_path, split);
        if (probe->parsed())
            return ajepa::cmd_probe(resolve_config(probe_args), probe_mode, train_emb,
                                    test_emb, checkpoint_path, manifest_path, report_path);
        if (inspect->parsed()) return ajepa::cmd_inspect(checkpoint_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
