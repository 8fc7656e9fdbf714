#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include "maflow/config.hpp"
#include "maflow/env.hpp"
#include "maflow/models.hpp"
#include "maflow/parallel.hpp"
#include "maflow/sampler.hpp"

namespace maflow {

// Bounded FIFO of episodes with uniform sampling (with replacement).
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {}

    void push(Trajectory traj) {
        if (episodes_.size() == capacity_) episodes_.pop_front();
        episodes_.push_back(std::move(traj));
    }

    size_t size() const { return episodes_.size(); }
    size_t capacity() const { return capacity_; }
    const Trajectory& at(size_t i) const { return episodes_[i]; }  // 0 = oldest

    std::vector<const Trajectory*> sample(size_t n, RngStream& rng) const;

private:
    size_t capacity_;
    std::deque<Trajectory> episodes_;
};

struct LossReport {
    double flow_matching_loss = 0.0;
    double inverse_loss = 0.0;
    std::vector<double> log_inflows;   // log(eps + Inflows) per counted state
    std::vector<double> log_outflows;  // log(eps + Outflows) per counted state
};

// Eq. of the method, linear scale: R(s_t) + prod_i sum_k exp F_i(o_t^i, a^{i,k}).
// The product of sums is evaluated as exp of a sum of per-agent
// log-sum-exps, so it only overflows where the true value does. At a
// terminal state in boundary mode the flow product is dropped and the
// reward alone is returned (terminal states have no outflows).
double compute_outflow_term(const FlowModel& model, const EnvSpec& spec,
                            std::span<const std::vector<double>> obs, double reward,
                            int k_hat, bool terminal, TerminalOutflowMode mode,
                            RngStream& rng);

// Linear-scale inflow estimate: prod_i sum_k exp F_i(G(o_t^i, a^{i,k}), a^{i,k})
// with fresh uniform candidates and parents from the inverse model.
double compute_inflow_term(const FlowModel& model, const InverseModel& inverse,
                           const EnvSpec& spec, std::span<const std::vector<double>> obs,
                           int k_hat, RngStream& rng);

// Squared log-difference flow-matching loss over every state of the
// trajectory except s_0. Fresh candidates are drawn per state and term from
// `rng` (taken by value: the same stream state reproduces the same loss,
// which is what lets finite differences check the gradient). When
// grad_accum is non-empty, d(loss)/d(theta) is accumulated into it;
// gradients flow through both terms into the flow nets only, never through
// the inverse model.
LossReport flow_matching_loss(const FlowModel& model, const InverseModel& inverse,
                              const EnvSpec& spec, const Trajectory& traj, double eps,
                              int k_hat, TerminalOutflowMode terminal_mode, RngStream rng,
                              std::span<double> grad_accum = {});

// One Adam step of mean-squared-error regression of the inverse net on
// (o_{t+1}, a_t) -> o_t pairs sampled from the buffer. Analytic mode takes
// no step and just reports the analytic predictor's error.
double train_inverse(ModelBundle& bundle, const EnvSpec& spec, const ReplayBuffer& buffer,
                     int batch_transitions, RngStream& rng);

// Mean loss and mean gradient over a batch of trajectories. Items are
// independent work units (per-item RNG streams, per-item gradient buffers,
// fixed-order reduction), so serial and parallel execution agree bitwise.
struct BatchGradient {
    double mean_loss = 0.0;
    std::vector<double> grad;  // store-sized, already divided by batch size
};

BatchGradient batch_flow_gradient(const ModelBundle& bundle, const EnvSpec& spec,
                                  std::span<const Trajectory* const> batch, double eps,
                                  int k_hat, TerminalOutflowMode terminal_mode,
                                  uint64_t root_seed, int64_t update_index, ExecMode exec);

struct TrainResult {
    int64_t env_steps = 0;
    int64_t episodes = 0;
    int64_t updates = 0;
    double last_fm_loss = 0.0;
    double last_inverse_loss = 0.0;
    std::string metrics_path;
    std::string checkpoint_path;
};

// Full training loop: rollout (sample mode) -> buffer -> inverse step ->
// batched flow-matching gradient -> Adam, with periodic evaluation rows and
// checkpoints under config.output_dir. Throws DivergedError on a non-finite
// loss, leaving the last good checkpoint in place.
TrainResult train_loop(const RunConfig& config, ExecMode exec = ExecMode::parallel);

}  // namespace maflow
