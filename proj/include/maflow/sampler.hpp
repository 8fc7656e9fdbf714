#pragma once

#include <span>
#include <vector>

#include "maflow/env.hpp"
#include "maflow/flow_model.hpp"
#include "maflow/rng.hpp"

namespace maflow {

// K uniform candidate actions for one agent, plus their log flows once a
// model has scored them.
struct AgentCandidates {
    int k = 0;
    int dim = 0;
    std::vector<double> actions;    // k * dim, row-major
    std::vector<double> log_flows;  // k (filled by select_action / scoring)

    std::span<const double> action(int j) const {
        return {actions.data() + static_cast<size_t>(j) * dim, static_cast<size_t>(dim)};
    }
};

using CandidateSet = std::vector<AgentCandidates>;

struct StepRecord {
    std::vector<double> positions;              // n_agents * pos_dim
    std::vector<std::vector<double>> observations;  // per agent
    std::vector<double> actions;                // n_agents * act_dim; empty on the terminal record
    double reward = 0.0;
    bool terminal = false;
};

// horizon + 1 records; rewards are zero everywhere except the terminal
// record, which carries the episode's only payout.
struct Trajectory {
    std::vector<StepRecord> records;

    int horizon() const { return static_cast<int>(records.size()) - 1; }
    double terminal_reward() const { return records.back().reward; }
    int env_steps() const { return horizon(); }
};

// i.i.d. uniform over [-action_bound, action_bound]^dim, independently per
// agent. Requires k_hat >= 2 (a single candidate leaves nothing to select).
CandidateSet sample_candidates(const EnvSpec& spec, int k_hat, RngStream& rng);

enum class SelectMode { sample, greedy };

std::string to_string(SelectMode m);
SelectMode select_mode_from_string(const std::string& s);

// Numerically stable softmax of logits / temperature.
std::vector<double> softmax(std::span<const double> logits, double temperature);

// Scores the candidates (fills cand.log_flows) and picks one: sample mode
// draws from softmax(log_flows / temperature), greedy takes the argmax with
// ties broken by the lowest index. Returns the chosen candidate index.
int select_action(const FlowModel& model, int agent, std::span<const double> obs,
                  AgentCandidates& cand, SelectMode mode, double temperature, RngStream& rng);

// One full fixed-horizon episode. env_rng drives the reset layout, act_rng
// the candidate draws and sampling decisions.
Trajectory rollout(const EnvSpec& spec, const FlowModel& model, SelectMode mode,
                   double temperature, int k_hat, RngStream env_rng, RngStream act_rng);

// Uniform-random policy baseline (no model involved).
Trajectory rollout_uniform(const EnvSpec& spec, RngStream env_rng, RngStream act_rng);

}  // namespace maflow
