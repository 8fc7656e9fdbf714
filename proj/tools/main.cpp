#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maflow/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"multi-agent continuous flow networks: training, evaluation and "
                 "estimator validation"};
    app.require_subcommand(1);

    // train
    std::string config_path;
    std::vector<std::string> overrides;
    auto* train = app.add_subcommand("train", "run the training loop from a config file");
    train->add_option("-c,--config", config_path, "key = value config file")->required();
    train->add_option("--set", overrides, "override a config field, key=value")
        ->take_all();

    // eval
    std::string checkpoint_path;
    std::string mode = "greedy";
    int episodes = 20;
    uint64_t seed = 1;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint's average test return");
    eval->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--mode", mode, "greedy | sample");
    eval->add_option("--episodes", episodes, "evaluation episodes");
    eval->add_option("--seed", seed, "evaluation seed");

    // diversity
    std::string div_checkpoint;
    std::string div_mode = "sample";
    int n_trajectories = 10000;
    double threshold = 0.0;
    uint64_t div_seed = 1;
    auto* diversity =
        app.add_subcommand("diversity", "count distinctive trajectories from a checkpoint");
    diversity->add_option("checkpoint", div_checkpoint, "checkpoint file")->required();
    diversity->add_option("--mode", div_mode, "sample | greedy");
    diversity->add_option("--trajectories", n_trajectories, "number of rollouts to collect");
    diversity->add_option("--threshold", threshold,
                          "distance threshold (0: config default)");
    diversity->add_option("--seed", div_seed, "collection seed");

    // oracle
    maflow::cli::OracleOptions oracle;
    auto* oracle_cmd = app.add_subcommand(
        "oracle", "validate the Monte-Carlo flow estimator against quadrature");
    oracle_cmd->add_option("--suite", oracle.suite,
                           "all | constant | unbiasedness | concentration | inverse");
    oracle_cmd->add_option("--trials", oracle.n_trials, "trials per concentration row");
    oracle_cmd->add_option("--estimates", oracle.n_estimates,
                           "estimates per unbiasedness row");
    oracle_cmd->add_option("--samples", oracle.mc_samples, "K per unbiasedness estimate");
    oracle_cmd->add_option("--seed", oracle.seed, "oracle seed");
    oracle_cmd->add_option("--lipschitz-scale", oracle.lipschitz_scale,
                           "mis-scale the Lipschitz constant (diagnostics)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : maflow::cli::kExitConfig;
    }

    if (train->parsed()) return maflow::cli::cmd_train(config_path, overrides);
    if (eval->parsed()) return maflow::cli::cmd_eval(checkpoint_path, mode, episodes, seed);
    if (diversity->parsed()) {
        return maflow::cli::cmd_diversity(div_checkpoint, div_mode, n_trajectories, threshold,
                                          div_seed);
    }
    if (oracle_cmd->parsed()) return maflow::cli::cmd_oracle(oracle);
    return maflow::cli::kExitConfig;
}
