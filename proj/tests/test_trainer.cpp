#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

#include "maflow/errors.hpp"
#include "maflow/models.hpp"
#include "maflow/trainer.hpp"

using namespace maflow;

namespace {

void make_constant_net(ParamStore& store, const Mlp& net, double log_flow) {
    for (size_t i = net.param_offset(); i < net.param_offset() + net.param_count(); ++i) {
        store.values()[i] = 0.0;
    }
    store.values()[net.param_offset() + net.param_count() - 1] = log_flow;
}

std::vector<std::vector<double>> flat_obs(const EnvSpec& spec, double fill) {
    return std::vector<std::vector<double>>(
        static_cast<size_t>(spec.n_agents),
        std::vector<double>(static_cast<size_t>(spec.obs_dim()), fill));
}

// Reproduces the trainer's candidate draw order (per agent: k rows of
// action_dim uniforms) and evaluates the flow product with plain linear
// arithmetic; the naive side of the log-space dual route.
double naive_outflow(const FlowModel& model, const EnvSpec& spec,
                     std::span<const std::vector<double>> obs, double reward, int k_hat,
                     RngStream& rng) {
    double product = 1.0;
    for (int i = 0; i < spec.n_agents; ++i) {
        std::vector<double> action(static_cast<size_t>(spec.action_dim()));
        double sum = 0.0;
        for (int j = 0; j < k_hat; ++j) {
            for (double& a : action) a = rng.uniform(-spec.action_bound, spec.action_bound);
            sum += std::exp(model.log_edge_flow(i, obs[i], action));
        }
        product *= sum;
    }
    return reward + product;
}

double naive_inflow(const FlowModel& model, const InverseModel& inverse, const EnvSpec& spec,
                    std::span<const std::vector<double>> obs, int k_hat, RngStream& rng) {
    double product = 1.0;
    for (int i = 0; i < spec.n_agents; ++i) {
        std::vector<double> action(static_cast<size_t>(spec.action_dim()));
        double sum = 0.0;
        for (int j = 0; j < k_hat; ++j) {
            for (double& a : action) a = rng.uniform(-spec.action_bound, spec.action_bound);
            const auto parent = inverse.predict_parent(obs[i], action, i);
            sum += std::exp(model.log_edge_flow(i, parent, action));
        }
        product *= sum;
    }
    return product;
}

Trajectory synthetic_trajectory(const EnvSpec& spec, int horizon, bool terminal_last,
                                double terminal_reward_value, uint64_t seed) {
    RngStream rng(seed, "synthetic");
    Trajectory traj;
    for (int t = 0; t <= horizon; ++t) {
        StepRecord rec;
        rec.positions.assign(static_cast<size_t>(spec.n_agents * spec.pos_dim()), 0.0);
        for (double& p : rec.positions) p = rng.uniform(-0.5, 0.5);
        for (int i = 0; i < spec.n_agents; ++i) {
            std::vector<double> o(static_cast<size_t>(spec.obs_dim()));
            for (double& v : o) v = rng.uniform(-0.5, 0.5);
            rec.observations.push_back(std::move(o));
        }
        if (t < horizon) {
            rec.actions.assign(static_cast<size_t>(spec.joint_action_dim()), 0.0);
            for (double& a : rec.actions) {
                a = rng.uniform(-spec.action_bound, spec.action_bound);
            }
        }
        rec.terminal = t == horizon && terminal_last;
        rec.reward = rec.terminal ? terminal_reward_value : 0.0;
        traj.records.push_back(std::move(rec));
    }
    return traj;
}

}  // namespace

TEST_CASE("trainer: terminal boundary outflow is exactly the reward") {
    RunConfig config;
    config.scenario = "food_collection";
    config.n_agents = 2;
    auto bundle = build_models(config);
    const EnvSpec spec = config.env_spec();
    RngStream rng(1, "out");
    const double v = compute_outflow_term(bundle->flow, spec, flat_obs(spec, 0.1), 1.7, 8,
                                          true, TerminalOutflowMode::boundary, rng);
    CHECK(v == 1.7);
}

TEST_CASE("trainer: zero flows give K^N for both terms") {
    RunConfig config;
    config.scenario = "food_collection";
    config.n_agents = 2;
    config.inverse_mode = "analytic";
    auto bundle = build_models_uninitialized(config);
    const EnvSpec spec = config.env_spec();

    RngStream rng(2, "terms");
    const double out = compute_outflow_term(bundle->flow, spec, flat_obs(spec, 0.2), 0.0, 4,
                                            false, TerminalOutflowMode::boundary, rng);
    CHECK(out == doctest::Approx(16.0).epsilon(1e-12));
    const double in = compute_inflow_term(bundle->flow, bundle->inverse, spec,
                                          flat_obs(spec, 0.2), 4, rng);
    CHECK(in == doctest::Approx(16.0).epsilon(1e-12));
}

TEST_CASE("trainer: single-agent inflow reduces to a plain sum") {
    RunConfig config;
    config.scenario = "food_collection";
    config.n_agents = 1;
    config.inverse_mode = "analytic";
    config.hidden_dims = "8";
    auto bundle = build_models(config);
    const EnvSpec spec = config.env_spec();

    const auto obs = flat_obs(spec, 0.3);
    RngStream r1(3, "in");
    const double got = compute_inflow_term(bundle->flow, bundle->inverse, spec, obs, 6, r1);
    RngStream r2(3, "in");
    const double naive = naive_inflow(bundle->flow, bundle->inverse, spec, obs, 6, r2);
    CHECK(got == doctest::Approx(naive).epsilon(1e-12));
}

TEST_CASE("trainer: log-space evaluation matches naive arithmetic") {
    RngStream seeds(5, "naive-prop");
    for (int trial = 0; trial < 15; ++trial) {
        RunConfig config;
        config.scenario = trial % 2 == 0 ? "food_collection" : "bimodal_toy";
        config.n_agents = trial % 2 == 0 ? static_cast<int>(seeds.below(3)) + 1 : 2;
        config.inverse_mode = "analytic";
        config.hidden_dims = "8";
        config.seed = seeds.next();
        auto bundle = build_models(config);
        const EnvSpec spec = config.env_spec();
        const auto obs = flat_obs(spec, seeds.uniform(-0.5, 0.5));
        const int k_hat = static_cast<int>(seeds.below(8)) + 1;
        const double reward = seeds.uniform(0.0, 2.0);

        RngStream r1 = seeds.split("draw", trial);
        RngStream r2 = seeds.split("draw", trial);
        const double got = compute_outflow_term(bundle->flow, spec, obs, reward, k_hat, false,
                                                TerminalOutflowMode::boundary, r1);
        const double naive = naive_outflow(bundle->flow, spec, obs, reward, k_hat, r2);
        REQUIRE(std::isfinite(naive));
        CHECK(got == doctest::Approx(naive).epsilon(1e-10));

        RngStream r3 = seeds.split("draw-in", trial);
        RngStream r4 = seeds.split("draw-in", trial);
        const double got_in =
            compute_inflow_term(bundle->flow, bundle->inverse, spec, obs, k_hat, r3);
        const double naive_in =
            naive_inflow(bundle->flow, bundle->inverse, spec, obs, k_hat, r4);
        CHECK(got_in == doctest::Approx(naive_in).epsilon(1e-10));
    }
}

TEST_CASE("trainer: matched in/out flows give exactly zero loss") {
    RunConfig config;
    config.scenario = "food_collection";
    config.n_agents = 2;
    config.inverse_mode = "analytic";
    auto bundle = build_models_uninitialized(config);  // all flows = 1
    const EnvSpec spec = config.env_spec();

    // No terminal record: every counted state matches inflow == outflow.
    const Trajectory traj = synthetic_trajectory(spec, 3, false, 0.0, 11);
    const auto report =
        flow_matching_loss(bundle->flow, bundle->inverse, spec, traj, 1.0, 4,
                           TerminalOutflowMode::boundary, RngStream(12, "loss"));
    CHECK(report.flow_matching_loss == 0.0);
    CHECK(report.log_inflows.size() == 3);
    CHECK(report.log_inflows == report.log_outflows);
}

TEST_CASE("trainer: single terminal state with inflow e-1 and zero reward gives loss 1") {
    RunConfig config;
    config.scenario = "food_collection";
    config.n_agents = 1;
    config.inverse_mode = "analytic";
    config.hidden_dims = "4";
    auto bundle = build_models_uninitialized(config);
    make_constant_net(bundle->store, bundle->flow.net(0), std::log(std::numbers::e - 1.0));
    const EnvSpec spec = config.env_spec();

    const Trajectory traj = synthetic_trajectory(spec, 1, true, 0.0, 13);
    const auto report =
        flow_matching_loss(bundle->flow, bundle->inverse, spec, traj, 1.0, 1,
                           TerminalOutflowMode::boundary, RngStream(14, "loss"));
    // log(1 + (e-1)) - log(1 + 0) = 1
    CHECK(report.flow_matching_loss == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("trainer: loss is nonnegative, deterministic in the stream, finite") {
    RngStream seeds(15, "loss-prop");
    for (int trial = 0; trial < 10; ++trial) {
        RunConfig config;
        config.scenario = "bimodal_toy";
        config.n_agents = 2;
        config.inverse_mode = "analytic";
        config.hidden_dims = "8";
        config.seed = seeds.next();
        auto bundle = build_models(config);
        const EnvSpec spec = config.env_spec();
        const Trajectory traj = synthetic_trajectory(spec, spec.horizon, true, 1.3, trial);

        const auto r1 = flow_matching_loss(bundle->flow, bundle->inverse, spec, traj, 1.0, 5,
                                           TerminalOutflowMode::boundary,
                                           RngStream(trial, "loss"));
        const auto r2 = flow_matching_loss(bundle->flow, bundle->inverse, spec, traj, 1.0, 5,
                                           TerminalOutflowMode::boundary,
                                           RngStream(trial, "loss"));
        CHECK(r1.flow_matching_loss >= 0.0);
        CHECK(r1.flow_matching_loss == r2.flow_matching_loss);
    }
}

TEST_CASE("trainer: literal terminal mode keeps the flow product in the outflow") {
    RunConfig config;
    config.scenario = "food_collection";
    config.n_agents = 1;
    config.inverse_mode = "analytic";
    config.hidden_dims = "4";
    auto bundle = build_models_uninitialized(config);
    const EnvSpec spec = config.env_spec();
    const Trajectory traj = synthetic_trajectory(spec, 1, true, 2.0, 16);

    const auto boundary =
        flow_matching_loss(bundle->flow, bundle->inverse, spec, traj, 1.0, 4,
                           TerminalOutflowMode::boundary, RngStream(17, "loss"));
    const auto literal =
        flow_matching_loss(bundle->flow, bundle->inverse, spec, traj, 1.0, 4,
                           TerminalOutflowMode::literal, RngStream(17, "loss"));
    // boundary: out = log(1+2); literal adds the K=4 flow sum: log(1+2+4).
    CHECK(boundary.log_outflows[0] == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(literal.log_outflows[0] == doctest::Approx(std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("trainer: loss gradient matches central finite differences") {
    RunConfig config;
    config.scenario = "food_collection";
    config.n_agents = 2;
    config.inverse_mode = "analytic";
    config.hidden_dims = "8";
    config.horizon = 2;
    config.seed = 77;
    auto bundle = build_models(config);
    const EnvSpec spec = config.env_spec();

    RngStream env_rng(18, "env");
    RngStream act_rng(18, "act");
    const Trajectory traj =
        rollout(spec, bundle->flow, SelectMode::sample, 1.0, 4, env_rng, act_rng);

    const auto loss_at = [&](uint64_t stream_tag) {
        return [&, stream_tag]() {
            return flow_matching_loss(bundle->flow, bundle->inverse, spec, traj, 1.0, 2,
                                      TerminalOutflowMode::boundary,
                                      RngStream(stream_tag, "frozen"))
                .flow_matching_loss;
        };
    };
    const auto eval_loss = loss_at(123);

    std::vector<double> grad(bundle->store.size(), 0.0);
    flow_matching_loss(bundle->flow, bundle->inverse, spec, traj, 1.0, 2,
                       TerminalOutflowMode::boundary, RngStream(123, "frozen"), grad);

    const double h = 1e-6;
    double num = 0.0;
    double den = 0.0;
    bool agent0_nonzero = false;
    bool agent1_nonzero = false;
    for (size_t i = bundle->flow.param_begin(); i < bundle->flow.param_end(); ++i) {
        const double saved = bundle->store.values()[i];
        bundle->store.values()[i] = saved + h;
        const double up = eval_loss();
        bundle->store.values()[i] = saved - h;
        const double down = eval_loss();
        bundle->store.values()[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        num += (fd - grad[i]) * (fd - grad[i]);
        den += fd * fd;
        if (grad[i] != 0.0) {
            if (i < bundle->flow.net(0).param_offset() + bundle->flow.net(0).param_count()) {
                agent0_nonzero = true;
            } else {
                agent1_nonzero = true;
            }
        }
    }
    REQUIRE(den > 0.0);
    CHECK(std::sqrt(num / den) < 1e-3);
    CHECK(agent0_nonzero);  // gradients reach every agent's flow net
    CHECK(agent1_nonzero);
}

TEST_CASE("trainer: replay buffer evicts oldest-first and samples stored episodes") {
    RunConfig config;
    config.scenario = "bimodal_toy";
    config.n_agents = 2;
    const EnvSpec spec = config.env_spec();

    ReplayBuffer buffer(5);
    for (int e = 0; e < 8; ++e) {
        Trajectory traj = synthetic_trajectory(spec, 2, true, 100.0 + e, e);
        buffer.push(std::move(traj));
    }
    REQUIRE(buffer.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(buffer.at(i).terminal_reward() == doctest::Approx(103.0 + i));
    }

    RngStream rng(19, "sample");
    const auto batch = buffer.sample(64, rng);
    std::map<double, int> seen;
    for (const auto* t : batch) seen[t->terminal_reward()] += 1;
    for (const auto& [reward, count] : seen) {
        CHECK(reward >= 103.0);  // evicted episodes can never be sampled
    }
}

TEST_CASE("trainer: analytic inverse is a perfect predictor under mirrored actions") {
    RunConfig config;
    config.scenario = "bimodal_toy";
    config.n_agents = 2;
    config.inverse_mode = "analytic";
    auto bundle = build_models(config);
    EnvSpec spec = config.env_spec();
    spec.action_bound = 0.05;  // keep every transition interior

    // Both agents always take the same action, so relative entries never
    // change and the analytic parent is exact.
    ReplayBuffer buffer(8);
    RngStream rng(23, "mirror");
    for (int e = 0; e < 4; ++e) {
        RngStream env_rng = rng.split("env", e);
        EnvState state = reset(spec, env_rng);
        Trajectory traj;
        for (int t = 0; t < spec.horizon; ++t) {
            StepRecord rec;
            rec.positions = state.agent_pos;
            for (int i = 0; i < 2; ++i) rec.observations.push_back(observe(spec, state, i));
            const double a = rng.uniform(-spec.action_bound, spec.action_bound);
            rec.actions = {a, a};
            auto result = step(spec, state, rec.actions);
            rec.reward = 0.0;
            traj.records.push_back(std::move(rec));
            state = result.state;
            if (result.terminal) {
                StepRecord last;
                last.positions = state.agent_pos;
                for (int i = 0; i < 2; ++i) last.observations.push_back(observe(spec, state, i));
                last.reward = result.reward;
                last.terminal = true;
                traj.records.push_back(std::move(last));
            }
        }
        buffer.push(std::move(traj));
    }
    RngStream train_rng(29, "inv");
    const double mse = train_inverse(*bundle, spec, buffer, 64, train_rng);
    CHECK(mse < 1e-25);
}

TEST_CASE("trainer: learned inverse regresses interior translation to high accuracy") {
    // Navigation with one agent and a small action bound: every observation
    // entry is an exact affine function of (o_{t+1}, a), so the regression
    // target is fully learnable.
    RunConfig config;
    config.scenario = "robot_navigation";
    config.n_agents = 1;
    config.action_bound = 0.05;
    config.inverse_mode = "learned";
    config.hidden_dims = "32";
    config.learning_rate = 2e-3;
    config.seed = 31;
    auto bundle = build_models(config);
    const EnvSpec spec = config.env_spec();

    ReplayBuffer buffer(64);
    for (int e = 0; e < 64; ++e) {
        buffer.push(rollout_uniform(spec, RngStream(40, "env", e), RngStream(40, "act", e)));
    }

    double mse = std::numeric_limits<double>::infinity();
    RngStream train_rng(41, "inv");
    for (int step_i = 0; step_i < 5000; ++step_i) {
        mse = train_inverse(*bundle, spec, buffer, 64, train_rng);
    }
    CHECK(mse < 1e-3);

    // Held-out check: per-sample parent error well under 0.05 * arena.
    double worst = 0.0;
    for (int e = 0; e < 8; ++e) {
        const Trajectory traj =
            rollout_uniform(spec, RngStream(42, "env", e), RngStream(42, "act", e));
        for (int t = 0; t + 1 < static_cast<int>(traj.records.size()); ++t) {
            const auto pred = bundle->inverse.predict_parent(
                traj.records[t + 1].observations[0], traj.records[t].actions, 0);
            double err = 0.0;
            for (size_t c = 0; c < pred.size(); ++c) {
                const double d = pred[c] - traj.records[t].observations[0][c];
                err += d * d;
            }
            worst = std::max(worst, std::sqrt(err));
        }
    }
    CHECK(worst < 0.05 * spec.arena_half_width);
}

TEST_CASE("trainer: non-finite flow output raises a diverged error") {
    RunConfig config;
    config.scenario = "food_collection";
    config.n_agents = 1;
    config.inverse_mode = "analytic";
    config.hidden_dims = "4";
    auto bundle = build_models_uninitialized(config);
    make_constant_net(bundle->store, bundle->flow.net(0),
                      std::numeric_limits<double>::infinity());
    const EnvSpec spec = config.env_spec();
    RngStream rng(43, "diverge");
    CHECK_THROWS_AS(compute_outflow_term(bundle->flow, spec, flat_obs(spec, 0.0), 0.0, 4,
                                         false, TerminalOutflowMode::boundary, rng),
                    DivergedError);
}
