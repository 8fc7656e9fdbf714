#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "maflow/rng.hpp"

namespace maflow {

// Particle worlds with translation dynamics (next position = position +
// action, clamped to the arena box) and a strictly positive reward paid out
// only when the fixed horizon is reached.
enum class Scenario { robot_navigation, food_collection, predator_prey, bimodal_toy };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct EnvSpec {
    Scenario scenario = Scenario::robot_navigation;
    int n_agents = 2;
    int horizon = 12;
    double arena_half_width = 1.0;
    double action_bound = 0.25;
    double obs_radius = std::numeric_limits<double>::infinity();
    double reward_floor = 1e-3;

    // Scenario defaults: horizon 12 (navigation), 25 (food, predator-prey),
    // 4 (toy); action bound 3 * half_width / horizon so the far wall stays
    // reachable at any horizon.
    static EnvSpec make(Scenario s, int n_agents);

    void validate() const;

    int pos_dim() const { return scenario == Scenario::bimodal_toy ? 1 : 2; }
    int action_dim() const { return pos_dim(); }

    // Task entities observed by every agent, in fixed layout order:
    // navigation/food: one per agent; predator_prey: prey then 2 landmarks.
    int n_entities() const;
    int obs_dim() const { return (n_agents + n_entities()) * pos_dim(); }
    int joint_action_dim() const { return n_agents * action_dim(); }

    double landmark_radius() const { return 0.15 * arena_half_width; }

    // Bimodal toy reward geometry: two isotropic bumps on the joint
    // terminal position at (q, q) and (-q, -q).
    double toy_mode_offset() const { return 0.5 * arena_half_width; }
    double toy_mode_sigma() const { return 0.3 * arena_half_width; }
};

struct EnvState {
    std::vector<double> agent_pos;   // n_agents * pos_dim
    std::vector<double> entity_pos;  // n_entities * pos_dim
    int t = 0;

    std::span<const double> agent(int i, int dim) const {
        return {agent_pos.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)};
    }
};

struct StepResult {
    EnvState state;
    double reward = 0.0;
    bool terminal = false;
};

// Agents start at the origin; task entities are drawn from the stream
// (navigation destinations are a fixed ring and consume no draws).
EnvState reset(const EnvSpec& spec, RngStream& rng);

// Translation step. Throws UsageError on a terminal state or out-of-bounds
// action components.
StepResult step(const EnvSpec& spec, const EnvState& state, std::span<const double> joint_action);

// Requires state.t == horizon. Strictly positive:
//   navigation/food:  floor + sum_j exp(-min_i |entity_j - agent_i|)
//   predator_prey:    floor + sum_i exp(-|prey - agent_i|)
//   bimodal_toy:      floor + sum_m exp(-|x - c_m|^2 / (2 sigma^2))
double terminal_reward(const EnvSpec& spec, const EnvState& state);

// Fixed layout: own absolute position, then relative positions of the other
// agents (by index, self skipped), then relative entity positions. Entries
// farther than obs_radius are zeroed.
std::vector<double> observe(const EnvSpec& spec, const EnvState& state, int agent);

}  // namespace maflow
