#pragma once

#include <span>
#include <string>
#include <vector>

#include "maflow/env.hpp"
#include "maflow/nn.hpp"
#include "maflow/param_store.hpp"

namespace maflow {

// Per-agent edge-flow networks. Each net maps (observation, action) to the
// log of that agent's edge flow, so the flow itself, exp(output), is
// structurally positive. The joint flow over all agents is the product of
// the individual flows; joint_log_flow returns its log, the plain sum.
class FlowModel {
public:
    FlowModel() = default;

    static FlowModel create(ParamStore& store, int n_agents, int obs_dim, int act_dim,
                            const std::vector<int>& hidden, Activation act, bool shared);
    static FlowModel attach(ParamStore& store, int n_agents, int obs_dim, int act_dim,
                            const std::vector<int>& hidden, Activation act, bool shared);

    void init(uint64_t root_seed);

    // Throws DivergedError if the net emits a non-finite value.
    double log_edge_flow(int agent, std::span<const double> obs,
                         std::span<const double> action) const;

    // Sum of per-agent log flows; log of the product decomposition.
    double joint_log_flow(std::span<const std::vector<double>> obs,
                          std::span<const double> joint_action) const;

    // Batched tape evaluation: rows of `inputs` are (obs, action) pairs for
    // one agent; returns the (K x 1) node of log flows.
    int emit_log_flows(Tape& tape, int agent, int input_node) const;

    // Fills K log flows for one agent without building a tape.
    void log_flows_into(int agent, std::span<const double> obs,
                        std::span<const double> actions_rows, int k,
                        std::span<double> out) const;

    // Same, but over prebuilt (obs, action) input rows (K x input_dim).
    void log_flows_rows_into(int agent, std::span<const double> input_rows, int k,
                             std::span<double> out) const;

    const Mlp& net(int agent) const { return nets_[shared_ ? 0 : agent]; }
    int n_agents() const { return n_agents_; }
    int obs_dim() const { return obs_dim_; }
    int act_dim() const { return act_dim_; }
    int input_dim() const { return obs_dim_ + act_dim_; }
    bool shared() const { return shared_; }

    size_t param_begin() const;
    size_t param_end() const;

private:
    std::vector<Mlp> nets_;  // one per agent, or a single shared net
    int n_agents_ = 0;
    int obs_dim_ = 0;
    int act_dim_ = 0;
    bool shared_ = false;
};

// Parent-observation predictor. Learned mode is an MLP over
// (next observation, action, agent one-hot); analytic mode subtracts the
// action from the own-position block and passes relative entries through,
// which is exact for interior unclamped transitions.
class InverseModel {
public:
    enum class Mode { learned, analytic };

    InverseModel() = default;

    static InverseModel create(ParamStore& store, Mode mode, int n_agents, int obs_dim,
                               int act_dim, const std::vector<int>& hidden, Activation act);
    static InverseModel attach(ParamStore& store, Mode mode, int n_agents, int obs_dim,
                               int act_dim, const std::vector<int>& hidden, Activation act);

    void init(uint64_t root_seed);

    std::vector<double> predict_parent(std::span<const double> obs_next,
                                       std::span<const double> action, int agent) const;

    // Batched: k rows of (obs_next, action); writes k predicted parents.
    void predict_parents_into(int agent, std::span<const double> obs_next,
                              std::span<const double> actions_rows, int k,
                              std::span<double> out) const;

    Mode mode() const { return mode_; }
    bool has_net() const { return mode_ == Mode::learned; }
    const Mlp& net() const { return net_; }
    int input_dim() const { return obs_dim_ + act_dim_ + n_agents_; }

private:
    Mode mode_ = Mode::analytic;
    Mlp net_;
    int n_agents_ = 0;
    int obs_dim_ = 0;
    int act_dim_ = 0;
};

std::string to_string(InverseModel::Mode m);
InverseModel::Mode inverse_mode_from_string(const std::string& s);

}  // namespace maflow
