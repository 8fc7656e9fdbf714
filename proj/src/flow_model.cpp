#include "maflow/flow_model.hpp"

#include <cmath>

#include "maflow/errors.hpp"

namespace maflow {

namespace {

std::vector<int> full_dims(int input_dim, const std::vector<int>& hidden, int out_dim) {
    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out_dim);
    return dims;
}

}  // namespace

FlowModel FlowModel::create(ParamStore& store, int n_agents, int obs_dim, int act_dim,
                            const std::vector<int>& hidden, Activation act, bool shared) {
    if (n_agents < 1) throw ConfigError("FlowModel: n_agents must be >= 1");
    FlowModel model;
    model.n_agents_ = n_agents;
    model.obs_dim_ = obs_dim;
    model.act_dim_ = act_dim;
    model.shared_ = shared;
    const auto dims = full_dims(obs_dim + act_dim, hidden, 1);
    const int n_nets = shared ? 1 : n_agents;
    for (int i = 0; i < n_nets; ++i) {
        model.nets_.push_back(Mlp::create(store, "flow." + std::to_string(i), dims, act));
    }
    return model;
}

FlowModel FlowModel::attach(ParamStore& store, int n_agents, int obs_dim, int act_dim,
                            const std::vector<int>& hidden, Activation act, bool shared) {
    FlowModel model;
    model.n_agents_ = n_agents;
    model.obs_dim_ = obs_dim;
    model.act_dim_ = act_dim;
    model.shared_ = shared;
    const auto dims = full_dims(obs_dim + act_dim, hidden, 1);
    const int n_nets = shared ? 1 : n_agents;
    for (int i = 0; i < n_nets; ++i) {
        model.nets_.push_back(Mlp::attach(store, "flow." + std::to_string(i), dims, act));
    }
    return model;
}

void FlowModel::init(uint64_t root_seed) {
    for (size_t i = 0; i < nets_.size(); ++i) {
        RngStream rng(root_seed, "init-flow", i);
        nets_[i].init_uniform(rng);
    }
}

size_t FlowModel::param_begin() const { return nets_.front().param_offset(); }

size_t FlowModel::param_end() const {
    return nets_.back().param_offset() + nets_.back().param_count();
}

double FlowModel::log_edge_flow(int agent, std::span<const double> obs,
                                std::span<const double> action) const {
    if (static_cast<int>(obs.size()) != obs_dim_ || static_cast<int>(action.size()) != act_dim_) {
        throw ConfigError("log_edge_flow: dimension mismatch");
    }
    double out = 0.0;
    log_flows_into(agent, obs, action, 1, {&out, 1});
    return out;
}

double FlowModel::joint_log_flow(std::span<const std::vector<double>> obs,
                                 std::span<const double> joint_action) const {
    if (static_cast<int>(obs.size()) != n_agents_) {
        throw ConfigError("joint_log_flow: expected one observation per agent");
    }
    double sum = 0.0;
    for (int i = 0; i < n_agents_; ++i) {
        sum += log_edge_flow(i, obs[i],
                             joint_action.subspan(static_cast<size_t>(i) * act_dim_, act_dim_));
    }
    return sum;
}

int FlowModel::emit_log_flows(Tape& tape, int agent, int input_node) const {
    return net(agent).emit(tape, input_node);
}

void FlowModel::log_flows_into(int agent, std::span<const double> obs,
                               std::span<const double> actions_rows, int k,
                               std::span<double> out) const {
    const Mlp& mlp = net(agent);
    thread_local std::vector<double> input;
    thread_local std::vector<double> scratch;
    input.resize(static_cast<size_t>(obs_dim_) + act_dim_);
    std::copy(obs.begin(), obs.end(), input.begin());
    for (int j = 0; j < k; ++j) {
        std::copy(actions_rows.begin() + static_cast<size_t>(j) * act_dim_,
                  actions_rows.begin() + static_cast<size_t>(j + 1) * act_dim_,
                  input.begin() + obs_dim_);
        mlp.forward_into(input, {&out[j], 1}, scratch);
        if (!std::isfinite(out[j])) {
            throw DivergedError("log_edge_flow: non-finite output for agent " +
                                std::to_string(agent));
        }
    }
}

void FlowModel::log_flows_rows_into(int agent, std::span<const double> input_rows, int k,
                                    std::span<double> out) const {
    const Mlp& mlp = net(agent);
    thread_local std::vector<double> scratch;
    const int in_dim = input_dim();
    for (int j = 0; j < k; ++j) {
        mlp.forward_into({input_rows.data() + static_cast<size_t>(j) * in_dim,
                          static_cast<size_t>(in_dim)},
                         {&out[j], 1}, scratch);
        if (!std::isfinite(out[j])) {
            throw DivergedError("log_edge_flow: non-finite output for agent " +
                                std::to_string(agent));
        }
    }
}

InverseModel InverseModel::create(ParamStore& store, Mode mode, int n_agents, int obs_dim,
                                  int act_dim, const std::vector<int>& hidden, Activation act) {
    InverseModel inv;
    inv.mode_ = mode;
    inv.n_agents_ = n_agents;
    inv.obs_dim_ = obs_dim;
    inv.act_dim_ = act_dim;
    if (mode == Mode::learned) {
        inv.net_ = Mlp::create(store, "inverse",
                               full_dims(obs_dim + act_dim + n_agents, hidden, obs_dim), act);
    }
    return inv;
}

InverseModel InverseModel::attach(ParamStore& store, Mode mode, int n_agents, int obs_dim,
                                  int act_dim, const std::vector<int>& hidden, Activation act) {
    InverseModel inv;
    inv.mode_ = mode;
    inv.n_agents_ = n_agents;
    inv.obs_dim_ = obs_dim;
    inv.act_dim_ = act_dim;
    if (mode == Mode::learned) {
        inv.net_ = Mlp::attach(store, "inverse",
                               full_dims(obs_dim + act_dim + n_agents, hidden, obs_dim), act);
    }
    return inv;
}

void InverseModel::init(uint64_t root_seed) {
    if (mode_ == Mode::learned) {
        RngStream rng(root_seed, "init-inverse");
        net_.init_uniform(rng);
    }
}

std::vector<double> InverseModel::predict_parent(std::span<const double> obs_next,
                                                 std::span<const double> action,
                                                 int agent) const {
    std::vector<double> out(obs_next.size());
    predict_parents_into(agent, obs_next, action, 1, out);
    return out;
}

void InverseModel::predict_parents_into(int agent, std::span<const double> obs_next,
                                        std::span<const double> actions_rows, int k,
                                        std::span<double> out) const {
    if (static_cast<int>(obs_next.size()) != obs_dim_) {
        throw ConfigError("predict_parent: observation dimension mismatch");
    }
    if (mode_ == Mode::analytic) {
        // Own position rewinds by the action; relative entries pass through.
        for (int j = 0; j < k; ++j) {
            double* row = out.data() + static_cast<size_t>(j) * obs_dim_;
            std::copy(obs_next.begin(), obs_next.end(), row);
            for (int c = 0; c < act_dim_; ++c) {
                row[c] -= actions_rows[static_cast<size_t>(j) * act_dim_ + c];
            }
        }
        return;
    }
    thread_local std::vector<double> input;
    thread_local std::vector<double> scratch;
    input.assign(static_cast<size_t>(obs_dim_) + act_dim_ + n_agents_, 0.0);
    std::copy(obs_next.begin(), obs_next.end(), input.begin());
    input[static_cast<size_t>(obs_dim_) + act_dim_ + agent] = 1.0;
    for (int j = 0; j < k; ++j) {
        std::copy(actions_rows.begin() + static_cast<size_t>(j) * act_dim_,
                  actions_rows.begin() + static_cast<size_t>(j + 1) * act_dim_,
                  input.begin() + obs_dim_);
        net_.forward_into(input, {out.data() + static_cast<size_t>(j) * obs_dim_,
                                  static_cast<size_t>(obs_dim_)},
                          scratch);
    }
}

std::string to_string(InverseModel::Mode m) {
    return m == InverseModel::Mode::learned ? "learned" : "analytic";
}

InverseModel::Mode inverse_mode_from_string(const std::string& s) {
    if (s == "learned") return InverseModel::Mode::learned;
    if (s == "analytic") return InverseModel::Mode::analytic;
    throw ConfigError("unknown inverse mode: " + s);
}

}  // namespace maflow
