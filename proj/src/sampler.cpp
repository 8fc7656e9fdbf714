#include "maflow/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "maflow/errors.hpp"

namespace maflow {

std::string to_string(SelectMode m) {
    return m == SelectMode::sample ? "sample" : "greedy";
}

SelectMode select_mode_from_string(const std::string& s) {
    if (s == "sample") return SelectMode::sample;
    if (s == "greedy") return SelectMode::greedy;
    throw ConfigError("unknown select mode: " + s);
}

CandidateSet sample_candidates(const EnvSpec& spec, int k_hat, RngStream& rng) {
    if (k_hat < 2) throw UsageError("sample_candidates: k_hat must be >= 2");
    const int d = spec.action_dim();
    CandidateSet set(spec.n_agents);
    for (auto& cand : set) {
        cand.k = k_hat;
        cand.dim = d;
        cand.actions.resize(static_cast<size_t>(k_hat) * d);
        for (double& a : cand.actions) a = rng.uniform(-spec.action_bound, spec.action_bound);
    }
    return set;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
    if (logits.empty()) throw UsageError("softmax: empty logits");
    if (!(temperature > 0.0)) throw UsageError("softmax: temperature must be positive");
    std::vector<double> p(logits.size());
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp((logits[i] - m) / temperature);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

int select_action(const FlowModel& model, int agent, std::span<const double> obs,
                  AgentCandidates& cand, SelectMode mode, double temperature, RngStream& rng) {
    if (cand.k < 1) throw UsageError("select_action: empty candidate set");
    cand.log_flows.resize(cand.k);
    model.log_flows_into(agent, obs, cand.actions, cand.k, cand.log_flows);

    if (mode == SelectMode::greedy) {
        int best = 0;
        for (int j = 1; j < cand.k; ++j) {
            if (cand.log_flows[j] > cand.log_flows[best]) best = j;
        }
        return best;
    }

    const auto probs = softmax(cand.log_flows, temperature);
    const double u = rng.uniform01();
    double acc = 0.0;
    for (int j = 0; j < cand.k; ++j) {
        acc += probs[j];
        if (u < acc) return j;
    }
    return cand.k - 1;
}

namespace {

Trajectory run_episode(const EnvSpec& spec, const FlowModel* model, SelectMode mode,
                       double temperature, int k_hat, RngStream& env_rng, RngStream& act_rng) {
    EnvState state = reset(spec, env_rng);
    const int d = spec.action_dim();

    Trajectory traj;
    traj.records.reserve(spec.horizon + 1);
    std::vector<double> joint(static_cast<size_t>(spec.n_agents) * d);

    for (int t = 0; t < spec.horizon; ++t) {
        StepRecord rec;
        rec.positions = state.agent_pos;
        rec.observations.reserve(spec.n_agents);
        for (int i = 0; i < spec.n_agents; ++i) rec.observations.push_back(observe(spec, state, i));

        if (model != nullptr) {
            CandidateSet cands = sample_candidates(spec, k_hat, act_rng);
            for (int i = 0; i < spec.n_agents; ++i) {
                const int j = select_action(*model, i, rec.observations[i], cands[i], mode,
                                            temperature, act_rng);
                const auto a = cands[i].action(j);
                std::copy(a.begin(), a.end(), joint.begin() + static_cast<size_t>(i) * d);
            }
        } else {
            for (double& a : joint) a = act_rng.uniform(-spec.action_bound, spec.action_bound);
        }

        rec.actions = joint;
        auto result = step(spec, state, joint);
        rec.reward = 0.0;
        rec.terminal = false;
        traj.records.push_back(std::move(rec));

        state = std::move(result.state);
        if (result.terminal) {
            StepRecord last;
            last.positions = state.agent_pos;
            last.observations.reserve(spec.n_agents);
            for (int i = 0; i < spec.n_agents; ++i) {
                last.observations.push_back(observe(spec, state, i));
            }
            last.reward = result.reward;
            last.terminal = true;
            traj.records.push_back(std::move(last));
        }
    }
    return traj;
}

}  // namespace

Trajectory rollout(const EnvSpec& spec, const FlowModel& model, SelectMode mode,
                   double temperature, int k_hat, RngStream env_rng, RngStream act_rng) {
    return run_episode(spec, &model, mode, temperature, k_hat, env_rng, act_rng);
}

Trajectory rollout_uniform(const EnvSpec& spec, RngStream env_rng, RngStream act_rng) {
    return run_episode(spec, nullptr, SelectMode::sample, 1.0, 2, env_rng, act_rng);
}

}  // namespace maflow
