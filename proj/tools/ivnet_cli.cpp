#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ivnet/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Interval continual-learning engine"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path;
    std::vector<std::string> sets;
    long long samples = -1;

    auto add_common = [&](CLI::App* sub, bool needs_ckpt) {
        sub->add_option("--config", config_path, "config file (key=value lines)")->required();
        sub->add_option("--set", sets, "override a config key (key=value), repeatable");
        if (needs_ckpt)
            sub->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    };

    CLI::App* train = app.add_subcommand("train", "train a task sequence");
    add_common(train, false);
    CLI::App* eval = app.add_subcommand("eval", "accuracy matrix from a checkpoint");
    add_common(eval, true);
    CLI::App* verify = app.add_subcommand("verify", "check recorded guarantees");
    add_common(verify, true);
    verify->add_option("--samples", samples, "sampled parameter vectors (overrides config)");
    CLI::App* synth = app.add_subcommand("synth", "write a synthetic blob stream as IDX files");
    add_common(synth, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : ivnet::kExitConfig;
    }

    if (train->parsed()) return ivnet::cmd_train(config_path, sets);
    if (eval->parsed()) return ivnet::cmd_eval(ckpt_path, config_path, sets);
    if (verify->parsed()) return ivnet::cmd_verify(ckpt_path, config_path, sets, samples);
    if (synth->parsed()) return ivnet::cmd_synth(config_path, sets);
    return ivnet::kExitConfig;
}
