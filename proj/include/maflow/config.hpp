#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maflow/env.hpp"
#include "maflow/flow_model.hpp"
#include "maflow/sampler.hpp"

namespace maflow {

enum class TerminalOutflowMode { boundary, literal };

std::string to_string(TerminalOutflowMode m);
TerminalOutflowMode terminal_outflow_mode_from_string(const std::string& s);

// Every knob of a run. Serializes to a flat UTF-8 "key = value" file;
// unknown keys are rejected by name and parse(serialize(c)) == c exactly.
// Zero / negative sentinels mean "derive the documented default".
struct RunConfig {
    // environment
    std::string scenario = "robot_navigation";
    int n_agents = 2;
    int horizon = 0;                // 0: scenario default (12 / 25 / 4)
    double arena_half_width = 1.0;
    double action_bound = 0.0;      // 0: 3 * arena_half_width / horizon
    double obs_radius = std::numeric_limits<double>::infinity();
    double reward_floor = 1e-3;

    // training
    int64_t total_env_steps = 1000000;
    int k_hat = 20;
    double epsilon = 1.0;
    double temperature = 1.0;
    double learning_rate = 3e-4;
    int batch_size = 8;
    int buffer_capacity = 2000;
    int inverse_batch = 128;
    std::string inverse_mode = "learned";
    std::string terminal_outflow_mode = "boundary";

    // networks
    std::string hidden_dims = "64,64";
    std::string activation = "tanh";
    bool shared_flow_params = false;

    // evaluation
    int64_t eval_every = 5000;
    int eval_episodes = 20;
    double diversity_threshold = 0.0;  // 0: 0.1 * arena_half_width
    double validity_floor = -1.0;      // <0: reward_floor + 0.05
    int histogram_bins = 8;

    // run
    uint64_t seed = 1;
    std::string output_dir = "runs/out";

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text);

    // "key=value" strings, e.g. from --set flags; unknown keys rejected.
    void apply_overrides(const std::vector<std::string>& overrides);

    std::string serialize() const;
    void validate() const;

    EnvSpec env_spec() const;
    std::vector<int> hidden_dim_list() const;
    double resolved_diversity_threshold() const;
    double resolved_validity_floor() const;
    TerminalOutflowMode terminal_mode() const;
    InverseModel::Mode inv_mode() const;
};

}  // namespace maflow
