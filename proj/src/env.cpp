#include "maflow/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "maflow/errors.hpp"

namespace maflow {

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::robot_navigation: return "robot_navigation";
        case Scenario::food_collection: return "food_collection";
        case Scenario::predator_prey: return "predator_prey";
        case Scenario::bimodal_toy: return "bimodal_toy";
    }
    return "?";
}

Scenario scenario_from_string(const std::string& s) {
    if (s == "robot_navigation") return Scenario::robot_navigation;
    if (s == "food_collection") return Scenario::food_collection;
    if (s == "predator_prey") return Scenario::predator_prey;
    if (s == "bimodal_toy") return Scenario::bimodal_toy;
    throw ConfigError("unknown scenario: " + s);
}

EnvSpec EnvSpec::make(Scenario s, int n_agents) {
    EnvSpec spec;
    spec.scenario = s;
    spec.n_agents = n_agents;
    switch (s) {
        case Scenario::robot_navigation: spec.horizon = 12; break;
        case Scenario::food_collection: spec.horizon = 25; break;
        case Scenario::predator_prey: spec.horizon = 25; break;
        case Scenario::bimodal_toy: spec.horizon = 4; break;
    }
    spec.action_bound = 3.0 * spec.arena_half_width / spec.horizon;
    spec.validate();
    return spec;
}

void EnvSpec::validate() const {
    if (n_agents < 1) throw ConfigError("EnvSpec: n_agents must be >= 1");
    if (scenario == Scenario::bimodal_toy && n_agents != 2) {
        throw ConfigError("EnvSpec: bimodal_toy requires exactly 2 agents");
    }
    if (horizon <= 0) throw ConfigError("EnvSpec: horizon must be positive");
    if (arena_half_width <= 0.0) throw ConfigError("EnvSpec: arena_half_width must be positive");
    if (action_bound <= 0.0) throw ConfigError("EnvSpec: action_bound must be positive");
    if (!(obs_radius > 0.0)) throw ConfigError("EnvSpec: obs_radius must be positive");
    if (reward_floor <= 0.0) throw ConfigError("EnvSpec: reward_floor must be positive");
}

int EnvSpec::n_entities() const {
    switch (scenario) {
        case Scenario::robot_navigation: return n_agents;
        case Scenario::food_collection: return n_agents;
        case Scenario::predator_prey: return 3;
        case Scenario::bimodal_toy: return 0;
    }
    return 0;
}

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

EnvState reset(const EnvSpec& spec, RngStream& rng) {
    spec.validate();
    const int d = spec.pos_dim();
    EnvState state;
    state.agent_pos.assign(static_cast<size_t>(spec.n_agents) * d, 0.0);
    state.entity_pos.assign(static_cast<size_t>(spec.n_entities()) * d, 0.0);
    state.t = 0;

    const double margin = 0.8 * spec.arena_half_width;
    switch (spec.scenario) {
        case Scenario::robot_navigation: {
            // Fixed destinations, evenly spaced on a ring.
            const double r = 0.6 * spec.arena_half_width;
            for (int j = 0; j < spec.n_agents; ++j) {
                const double ang = 2.0 * std::numbers::pi * j / spec.n_agents;
                state.entity_pos[2 * j] = r * std::cos(ang);
                state.entity_pos[2 * j + 1] = r * std::sin(ang);
            }
            break;
        }
        case Scenario::food_collection:
        case Scenario::predator_prey:
            for (double& v : state.entity_pos) v = rng.uniform(-margin, margin);
            break;
        case Scenario::bimodal_toy:
            break;
    }
    return state;
}

StepResult step(const EnvSpec& spec, const EnvState& state, std::span<const double> joint_action) {
    if (state.t >= spec.horizon) throw UsageError("step: state is terminal");
    if (static_cast<int>(joint_action.size()) != spec.joint_action_dim()) {
        throw UsageError("step: joint action has wrong dimension");
    }
    const double bound = spec.action_bound * (1.0 + 1e-12);
    for (double a : joint_action) {
        if (!(std::abs(a) <= bound)) throw UsageError("step: action component out of bounds");
    }

    const int d = spec.pos_dim();
    const double hw = spec.arena_half_width;
    StepResult result;
    result.state = state;
    for (size_t i = 0; i < result.state.agent_pos.size(); ++i) {
        result.state.agent_pos[i] = clamp(state.agent_pos[i] + joint_action[i], -hw, hw);
    }

    if (spec.scenario == Scenario::predator_prey) {
        // Landmarks are solid: an agent ending inside one is pushed back to
        // its rim (entity layout: prey, then two landmarks).
        for (int i = 0; i < spec.n_agents; ++i) {
            double* p = result.state.agent_pos.data() + static_cast<size_t>(i) * d;
            for (int lm = 1; lm <= 2; ++lm) {
                const double* c = result.state.entity_pos.data() + static_cast<size_t>(lm) * d;
                double dx = p[0] - c[0];
                double dy = p[1] - c[1];
                const double r = std::sqrt(dx * dx + dy * dy);
                const double rad = spec.landmark_radius();
                if (r < rad) {
                    if (r == 0.0) {
                        dx = 1.0;
                        dy = 0.0;
                    } else {
                        dx /= r;
                        dy /= r;
                    }
                    p[0] = clamp(c[0] + dx * rad, -hw, hw);
                    p[1] = clamp(c[1] + dy * rad, -hw, hw);
                }
            }
        }
    }

    result.state.t = state.t + 1;
    result.terminal = result.state.t == spec.horizon;
    result.reward = result.terminal ? terminal_reward(spec, result.state) : 0.0;
    return result;
}

double terminal_reward(const EnvSpec& spec, const EnvState& state) {
    if (state.t != spec.horizon) throw UsageError("terminal_reward: state is not terminal");
    const int d = spec.pos_dim();
    double r = spec.reward_floor;
    switch (spec.scenario) {
        case Scenario::robot_navigation:
        case Scenario::food_collection: {
            for (int j = 0; j < spec.n_entities(); ++j) {
                std::span<const double> e{state.entity_pos.data() + static_cast<size_t>(j) * d,
                                          static_cast<size_t>(d)};
                double best = std::numeric_limits<double>::infinity();
                for (int i = 0; i < spec.n_agents; ++i) {
                    best = std::min(best, dist(e, state.agent(i, d)));
                }
                r += std::exp(-best);
            }
            break;
        }
        case Scenario::predator_prey: {
            std::span<const double> prey{state.entity_pos.data(), static_cast<size_t>(d)};
            for (int i = 0; i < spec.n_agents; ++i) {
                r += std::exp(-dist(prey, state.agent(i, d)));
            }
            break;
        }
        case Scenario::bimodal_toy: {
            const double q = spec.toy_mode_offset();
            const double sig = spec.toy_mode_sigma();
            const double x0 = state.agent_pos[0];
            const double x1 = state.agent_pos[1];
            for (const double m : {q, -q}) {
                const double sq = (x0 - m) * (x0 - m) + (x1 - m) * (x1 - m);
                r += std::exp(-sq / (2.0 * sig * sig));
            }
            break;
        }
    }
    return r;
}

std::vector<double> observe(const EnvSpec& spec, const EnvState& state, int agent) {
    if (agent < 0 || agent >= spec.n_agents) throw UsageError("observe: bad agent index");
    const int d = spec.pos_dim();
    std::vector<double> obs;
    obs.reserve(spec.obs_dim());
    const auto own = state.agent(agent, d);
    obs.insert(obs.end(), own.begin(), own.end());

    auto push_relative = [&](std::span<const double> p) {
        if (dist(p, own) <= spec.obs_radius) {
            for (int k = 0; k < d; ++k) obs.push_back(p[k] - own[k]);
        } else {
            for (int k = 0; k < d; ++k) obs.push_back(0.0);
        }
    };

    for (int j = 0; j < spec.n_agents; ++j) {
        if (j == agent) continue;
        push_relative(state.agent(j, d));
    }
    for (int j = 0; j < spec.n_entities(); ++j) {
        push_relative({state.entity_pos.data() + static_cast<size_t>(j) * d,
                       static_cast<size_t>(d)});
    }
    return obs;
}

}  // namespace maflow
