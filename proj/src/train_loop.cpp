#include <cstdio>
#include <filesystem>
#include <fstream>

#include "maflow/checkpoint.hpp"
#include "maflow/errors.hpp"
#include "maflow/metrics.hpp"
#include "maflow/trainer.hpp"

namespace maflow {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write: " + path);
    out << text;
}

}  // namespace

TrainResult train_loop(const RunConfig& config, ExecMode exec) {
    config.validate();
    const EnvSpec spec = config.env_spec();
    const TerminalOutflowMode tmode = config.terminal_mode();

    fs::create_directories(config.output_dir);
    const std::string dir = config.output_dir;
    const std::string metrics_path = dir + "/metrics.csv";
    const std::string last_good_path = dir + "/checkpoint_last_good.json";
    const std::string final_path = dir + "/checkpoint_final.json";

    write_text(dir + "/config.resolved", config.serialize());

    auto bundle = build_models(config);
    ReplayBuffer buffer(static_cast<size_t>(config.buffer_capacity));

    std::ofstream csv(metrics_path, std::ios::binary);
    if (!csv) throw ConfigError("cannot write: " + metrics_path);
    csv << "env_steps,episodes,fm_loss,inverse_loss,mean_test_return_greedy,"
           "mean_test_return_sample,n_distinct_trajectories\n";
    csv.flush();

    save_checkpoint(last_good_path, config, *bundle, 0, 0);

    TrainResult result;
    result.metrics_path = metrics_path;
    result.checkpoint_path = final_path;

    int64_t env_steps = 0;
    int64_t episodes = 0;
    int64_t updates = 0;
    int64_t eval_index = 0;
    int64_t next_eval = config.eval_every;
    double fm_acc = 0.0;
    double inv_acc = 0.0;
    int64_t acc_n = 0;

    const auto run_eval = [&]() {
        RngStream eval_rng(config.seed, "eval", static_cast<uint64_t>(eval_index));
        const auto greedy = avg_test_return(spec, bundle->flow, SelectMode::greedy,
                                            config.temperature, config.k_hat,
                                            config.eval_episodes, eval_rng.split("greedy"),
                                            exec);
        const auto tracks = collect_tracks(spec, &bundle->flow, SelectMode::sample,
                                           config.temperature, config.k_hat,
                                           config.eval_episodes, eval_rng.split("sample"),
                                           exec);
        const auto sample = return_stats_of(tracks);
        const auto diversity = count_distinct(tracks, config.resolved_diversity_threshold(),
                                              config.resolved_validity_floor(), exec);
        const double fm = acc_n > 0 ? fm_acc / static_cast<double>(acc_n) : 0.0;
        const double inv = acc_n > 0 ? inv_acc / static_cast<double>(acc_n) : 0.0;
        csv << env_steps << ',' << episodes << ',' << fmt(fm) << ',' << fmt(inv) << ','
            << fmt(greedy.mean) << ',' << fmt(sample.mean) << ',' << diversity.n_distinct
            << '\n';
        csv.flush();
        fm_acc = 0.0;
        inv_acc = 0.0;
        acc_n = 0;
        result.last_fm_loss = fm;
        result.last_inverse_loss = inv;
        save_checkpoint(last_good_path, config, *bundle, env_steps, episodes);
        ++eval_index;
    };

    while (env_steps < config.total_env_steps) {
        RngStream env_rng(config.seed, "episode-env", static_cast<uint64_t>(episodes));
        RngStream act_rng(config.seed, "episode-act", static_cast<uint64_t>(episodes));
        Trajectory traj = rollout(spec, bundle->flow, SelectMode::sample, config.temperature,
                                  config.k_hat, env_rng, act_rng);
        env_steps += traj.env_steps();
        ++episodes;
        buffer.push(std::move(traj));

        RngStream batch_rng(config.seed, "batch", static_cast<uint64_t>(updates));
        const auto batch = buffer.sample(static_cast<size_t>(config.batch_size), batch_rng);

        RngStream inv_rng(config.seed, "inverse", static_cast<uint64_t>(updates));
        const double inv_loss =
            train_inverse(*bundle, spec, buffer, config.inverse_batch, inv_rng);

        const auto bg = batch_flow_gradient(*bundle, spec, batch, config.epsilon, config.k_hat,
                                            tmode, config.seed, updates, exec);
        adam_step(bundle->flow_params(),
                  std::span<const double>(bg.grad).subspan(
                      bundle->flow.param_begin(),
                      bundle->flow.param_end() - bundle->flow.param_begin()),
                  bundle->flow_opt);
        bundle->train_step_count += 1;
        ++updates;

        fm_acc += bg.mean_loss;
        inv_acc += inv_loss;
        ++acc_n;

        while (next_eval <= env_steps) {
            run_eval();
            next_eval += config.eval_every;
        }
    }

    save_checkpoint(final_path, config, *bundle, env_steps, episodes);

    std::string summary;
    summary += "env_steps = " + std::to_string(env_steps) + "\n";
    summary += "episodes = " + std::to_string(episodes) + "\n";
    summary += "updates = " + std::to_string(updates) + "\n";
    summary += "last_fm_loss = " + fmt(result.last_fm_loss) + "\n";
    summary += "last_inverse_loss = " + fmt(result.last_inverse_loss) + "\n";
    summary += "metrics = metrics.csv\n";
    summary += "checkpoint = checkpoint_final.json\n";
    write_text(dir + "/summary.txt", summary);

    result.env_steps = env_steps;
    result.episodes = episodes;
    result.updates = updates;
    return result;
}

}  // namespace maflow
