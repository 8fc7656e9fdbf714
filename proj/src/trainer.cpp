#include "maflow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "maflow/errors.hpp"

namespace maflow {

std::vector<const Trajectory*> ReplayBuffer::sample(size_t n, RngStream& rng) const {
    if (episodes_.empty()) throw UsageError("ReplayBuffer::sample: buffer is empty");
    std::vector<const Trajectory*> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        out.push_back(&episodes_[rng.below(episodes_.size())]);
    }
    return out;
}

namespace {

// K rows of uniform actions in [-bound, bound]^d.
void draw_candidates(const EnvSpec& spec, int k_hat, RngStream& rng, std::vector<double>& rows) {
    rows.resize(static_cast<size_t>(k_hat) * spec.action_dim());
    for (double& a : rows) a = rng.uniform(-spec.action_bound, spec.action_bound);
}

double logsumexp(std::span<const double> x) {
    double m = x[0];
    for (double v : x) m = std::max(m, v);
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

// Sum over agents of log sum_k exp F_i; linear value is exp of this.
double sum_log_flow_sums(const FlowModel& model, const EnvSpec& spec,
                         std::span<const std::vector<double>> obs, int k_hat, RngStream& rng,
                         bool use_inverse, const InverseModel* inverse) {
    thread_local std::vector<double> actions;
    thread_local std::vector<double> parents;
    thread_local std::vector<double> flows;
    double total = 0.0;
    for (int i = 0; i < model.n_agents(); ++i) {
        draw_candidates(spec, k_hat, rng, actions);
        flows.resize(k_hat);
        if (use_inverse) {
            parents.resize(static_cast<size_t>(k_hat) * model.obs_dim());
            inverse->predict_parents_into(i, obs[i], actions, k_hat, parents);
            thread_local std::vector<double> inputs;
            inputs.resize(static_cast<size_t>(k_hat) * model.input_dim());
            for (int j = 0; j < k_hat; ++j) {
                double* row = inputs.data() + static_cast<size_t>(j) * model.input_dim();
                std::copy_n(parents.data() + static_cast<size_t>(j) * model.obs_dim(),
                            model.obs_dim(), row);
                std::copy_n(actions.data() + static_cast<size_t>(j) * model.act_dim(),
                            model.act_dim(), row + model.obs_dim());
            }
            model.log_flows_rows_into(i, inputs, k_hat, flows);
        } else {
            model.log_flows_into(i, obs[i], actions, k_hat, flows);
        }
        total += logsumexp(flows);
    }
    return total;
}

}  // namespace

double compute_outflow_term(const FlowModel& model, const EnvSpec& spec,
                            std::span<const std::vector<double>> obs, double reward,
                            int k_hat, bool terminal, TerminalOutflowMode mode,
                            RngStream& rng) {
    if (k_hat < 1) throw UsageError("compute_outflow_term: k_hat must be >= 1");
    if (terminal && mode == TerminalOutflowMode::boundary) {
        return reward;  // terminal states have no outflows
    }
    const double log_flow = sum_log_flow_sums(model, spec, obs, k_hat, rng, false, nullptr);
    const double value = reward + std::exp(log_flow);
    if (!std::isfinite(value)) {
        throw DivergedError("compute_outflow_term: non-finite flow product");
    }
    return value;
}

double compute_inflow_term(const FlowModel& model, const InverseModel& inverse,
                           const EnvSpec& spec, std::span<const std::vector<double>> obs,
                           int k_hat, RngStream& rng) {
    if (k_hat < 1) throw UsageError("compute_inflow_term: k_hat must be >= 1");
    const double log_flow = sum_log_flow_sums(model, spec, obs, k_hat, rng, true, &inverse);
    const double value = std::exp(log_flow);
    if (!std::isfinite(value)) {
        throw DivergedError("compute_inflow_term: non-finite flow product");
    }
    return value;
}

namespace {

// Tape node for sum_i log sum_k exp F_i at one state; candidates drawn from
// rng in the same order as the linear-scale paths above.
int emit_flow_sum(Tape& tape, const FlowModel& model, const InverseModel* inverse,
                  const EnvSpec& spec, std::span<const std::vector<double>> obs, int k_hat,
                  RngStream& rng, std::vector<double>& actions, std::vector<double>& parents,
                  std::vector<double>& inputs, std::vector<int>& lse_nodes) {
    lse_nodes.clear();
    const int in_dim = model.input_dim();
    for (int i = 0; i < model.n_agents(); ++i) {
        draw_candidates(spec, k_hat, rng, actions);
        inputs.resize(static_cast<size_t>(k_hat) * in_dim);
        if (inverse != nullptr) {
            parents.resize(static_cast<size_t>(k_hat) * model.obs_dim());
            inverse->predict_parents_into(i, obs[i], actions, k_hat, parents);
        }
        for (int j = 0; j < k_hat; ++j) {
            double* row = inputs.data() + static_cast<size_t>(j) * in_dim;
            const double* o = inverse != nullptr
                                  ? parents.data() + static_cast<size_t>(j) * model.obs_dim()
                                  : obs[i].data();
            std::copy_n(o, model.obs_dim(), row);
            std::copy_n(actions.data() + static_cast<size_t>(j) * model.act_dim(),
                        model.act_dim(), row + model.obs_dim());
        }
        const int in_node = tape.const_matrix(k_hat, in_dim, inputs.data());
        const int flows = model.emit_log_flows(tape, i, in_node);
        lse_nodes.push_back(tape.logsumexp_col(flows));
    }
    return tape.sum_scalars(lse_nodes);
}

}  // namespace

LossReport flow_matching_loss(const FlowModel& model, const InverseModel& inverse,
                              const EnvSpec& spec, const Trajectory& traj, double eps,
                              int k_hat, TerminalOutflowMode terminal_mode, RngStream rng,
                              std::span<double> grad_accum) {
    if (traj.records.size() < 2) throw UsageError("flow_matching_loss: trajectory too short");
    if (k_hat < 1) throw UsageError("flow_matching_loss: k_hat must be >= 1");

    Tape tape(nullptr);
    // The tape needs the store backing the flow nets.
    tape = Tape(model.net(0).store());

    std::vector<double> actions, parents, inputs;
    std::vector<int> lse_nodes;
    std::vector<int> sq_nodes;

    LossReport report;
    const int last = static_cast<int>(traj.records.size()) - 1;
    for (int t = 1; t <= last; ++t) {
        const StepRecord& rec = traj.records[t];
        const bool terminal = rec.terminal;
        const double reward = rec.reward;

        const int in_sum = emit_flow_sum(tape, model, &inverse, spec, rec.observations, k_hat,
                                         rng, actions, parents, inputs, lse_nodes);
        const int in_term = tape.log_add_exp(eps, in_sum);

        int out_term;
        if (terminal && terminal_mode == TerminalOutflowMode::boundary) {
            const double v = std::log(eps + reward);
            out_term = tape.const_matrix(1, 1, &v);
        } else {
            const int out_sum = emit_flow_sum(tape, model, nullptr, spec, rec.observations,
                                              k_hat, rng, actions, parents, inputs, lse_nodes);
            out_term = tape.log_add_exp(eps + reward, out_sum);
        }

        report.log_inflows.push_back(tape.value(in_term));
        report.log_outflows.push_back(tape.value(out_term));
        sq_nodes.push_back(tape.square(tape.sub(in_term, out_term)));
    }

    const int loss = tape.sum_scalars(sq_nodes);
    tape.mark_output(loss);
    report.flow_matching_loss = tape.value(loss);
    if (!std::isfinite(report.flow_matching_loss)) {
        throw DivergedError("flow_matching_loss: non-finite loss");
    }
    if (!grad_accum.empty()) tape.backward(grad_accum);
    return report;
}

double train_inverse(ModelBundle& bundle, const EnvSpec& spec, const ReplayBuffer& buffer,
                     int batch_transitions, RngStream& rng) {
    if (buffer.size() == 0) throw UsageError("train_inverse: buffer is empty");
    if (batch_transitions < 1) throw UsageError("train_inverse: batch must be >= 1");

    const InverseModel& inverse = bundle.inverse;
    const int obs_dim = spec.obs_dim();
    const int act_dim = spec.action_dim();
    const int n = spec.n_agents;
    const int m = batch_transitions;

    std::vector<double> targets(static_cast<size_t>(m) * obs_dim);
    std::vector<double> obs_next(static_cast<size_t>(m) * obs_dim);
    std::vector<double> acts(static_cast<size_t>(m) * act_dim);
    std::vector<int> agents(m);

    for (int s = 0; s < m; ++s) {
        const Trajectory& traj = buffer.at(rng.below(buffer.size()));
        const int t = static_cast<int>(rng.below(static_cast<uint64_t>(traj.horizon())));
        const int i = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
        agents[s] = i;
        const auto& o_t = traj.records[t].observations[i];
        const auto& o_t1 = traj.records[t + 1].observations[i];
        std::copy(o_t.begin(), o_t.end(), targets.begin() + static_cast<size_t>(s) * obs_dim);
        std::copy(o_t1.begin(), o_t1.end(), obs_next.begin() + static_cast<size_t>(s) * obs_dim);
        std::copy_n(traj.records[t].actions.begin() + static_cast<size_t>(i) * act_dim, act_dim,
                    acts.begin() + static_cast<size_t>(s) * act_dim);
    }

    if (!inverse.has_net()) {
        // Analytic predictor: report its error, nothing to train.
        double mse = 0.0;
        std::vector<double> pred(obs_dim);
        for (int s = 0; s < m; ++s) {
            inverse.predict_parents_into(
                agents[s], {obs_next.data() + static_cast<size_t>(s) * obs_dim,
                            static_cast<size_t>(obs_dim)},
                {acts.data() + static_cast<size_t>(s) * act_dim, static_cast<size_t>(act_dim)},
                1, pred);
            for (int c = 0; c < obs_dim; ++c) {
                const double d = pred[c] - targets[static_cast<size_t>(s) * obs_dim + c];
                mse += d * d;
            }
        }
        return mse / m;
    }

    const int in_dim = inverse.input_dim();
    std::vector<double> inputs(static_cast<size_t>(m) * in_dim, 0.0);
    for (int s = 0; s < m; ++s) {
        double* row = inputs.data() + static_cast<size_t>(s) * in_dim;
        std::copy_n(obs_next.data() + static_cast<size_t>(s) * obs_dim, obs_dim, row);
        std::copy_n(acts.data() + static_cast<size_t>(s) * act_dim, act_dim, row + obs_dim);
        row[obs_dim + act_dim + agents[s]] = 1.0;
    }

    Tape tape(inverse.net().store());
    const int in_node = tape.const_matrix(m, in_dim, inputs.data());
    const int pred = inverse.net().emit(tape, in_node);
    const int loss = tape.mean_sq_error(pred, targets.data());
    tape.mark_output(loss);

    std::vector<double> grad(bundle.store.size(), 0.0);
    tape.backward(grad);
    const size_t off = inverse.net().param_offset();
    const size_t cnt = inverse.net().param_count();
    adam_step(bundle.inverse_params(), std::span<const double>(grad).subspan(off, cnt),
              bundle.inverse_opt);
    return tape.value(loss);
}

BatchGradient batch_flow_gradient(const ModelBundle& bundle, const EnvSpec& spec,
                                  std::span<const Trajectory* const> batch, double eps,
                                  int k_hat, TerminalOutflowMode terminal_mode,
                                  uint64_t root_seed, int64_t update_index, ExecMode exec) {
    const size_t n_params = bundle.store.size();
    const size_t b = batch.size();
    if (b == 0) throw UsageError("batch_flow_gradient: empty batch");

    std::vector<double> bufs(b * n_params, 0.0);
    std::vector<double> losses(b, 0.0);
    std::exception_ptr error;

    parallel_for(static_cast<int64_t>(b), exec, [&](int64_t j) {
        try {
            RngStream rng(root_seed, "loss", static_cast<uint64_t>(update_index),
                          static_cast<uint64_t>(j));
            const auto report = flow_matching_loss(
                bundle.flow, bundle.inverse, spec, *batch[j], eps, k_hat, terminal_mode, rng,
                {bufs.data() + static_cast<size_t>(j) * n_params, n_params});
            losses[j] = report.flow_matching_loss;
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            {
                if (!error) error = std::current_exception();
            }
        }
    });
    if (error) std::rethrow_exception(error);

    BatchGradient out;
    out.grad.assign(n_params, 0.0);
    double loss_sum = 0.0;
    for (size_t j = 0; j < b; ++j) {
        const double* buf = bufs.data() + j * n_params;
        for (size_t i = 0; i < n_params; ++i) out.grad[i] += buf[i];
        loss_sum += losses[j];
    }
    const double inv_b = 1.0 / static_cast<double>(b);
    for (double& g : out.grad) g *= inv_b;
    out.mean_loss = loss_sum * inv_b;
    return out;
}

}  // namespace maflow
