#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "maflow/checkpoint.hpp"
#include "maflow/env.hpp"
#include "maflow/flow_model.hpp"
#include "maflow/models.hpp"
#include "maflow/rng.hpp"

using namespace maflow;

namespace {

RunConfig toy_config() {
    RunConfig config;
    config.scenario = "bimodal_toy";
    config.n_agents = 2;
    config.hidden_dims = "8,8";
    config.seed = 21;
    return config;
}

// Sets every weight to zero and the final bias to `log_flow`, making the net
// a constant function.
void make_constant_net(ParamStore& store, const Mlp& net, double log_flow) {
    for (size_t i = net.param_offset(); i < net.param_offset() + net.param_count(); ++i) {
        store.values()[i] = 0.0;
    }
    store.values()[net.param_offset() + net.param_count() - 1] = log_flow;
}

}  // namespace

TEST_CASE("flow model: zero-initialized nets emit log-flow 0, flow 1") {
    ParamStore store;
    FlowModel model = FlowModel::create(store, 2, 3, 1, {8}, Activation::tanh, false);
    const std::vector<double> obs{0.1, 0.2, 0.3};
    const std::vector<double> act{0.05};
    const double lf = model.log_edge_flow(0, obs, act);
    CHECK(lf == 0.0);
    CHECK(std::exp(lf) == 1.0);
}

TEST_CASE("flow model: evaluation is deterministic and delegates to the net") {
    ParamStore store;
    FlowModel model = FlowModel::create(store, 1, 2, 2, {8, 8}, Activation::tanh, false);
    model.init(99);
    const std::vector<double> obs{0.4, -0.1};
    const std::vector<double> act{0.2, -0.2};
    const double a = model.log_edge_flow(0, obs, act);
    const double b = model.log_edge_flow(0, obs, act);
    CHECK(a == b);

    const std::vector<double> input{0.4, -0.1, 0.2, -0.2};
    const auto [direct, tape] = model.net(0).forward(input);
    CHECK(a == direct[0]);
}

TEST_CASE("flow model: joint log flow is the exact sum of individual log flows") {
    ParamStore store;
    FlowModel model = FlowModel::create(store, 3, 2, 1, {4}, Activation::tanh, false);
    make_constant_net(store, model.net(0), 0.5);
    make_constant_net(store, model.net(1), -0.2);
    make_constant_net(store, model.net(2), 1.0);

    const std::vector<std::vector<double>> obs{{0.0, 0.0}, {0.1, 0.1}, {0.2, 0.2}};
    const std::vector<double> joint_action{0.0, 0.0, 0.0};
    CHECK(model.joint_log_flow(obs, joint_action) == doctest::Approx(1.3).epsilon(1e-15));
}

TEST_CASE("flow model: degenerate single-agent product") {
    ParamStore store;
    FlowModel model = FlowModel::create(store, 1, 2, 1, {4}, Activation::tanh, false);
    model.init(5);
    const std::vector<std::vector<double>> obs{{0.3, -0.3}};
    const std::vector<double> action{0.1};
    CHECK(model.joint_log_flow(obs, action) == model.log_edge_flow(0, obs[0], action));
}

TEST_CASE("flow model: exp of the joint equals the product of individual flows") {
    RngStream rng(31, "prod");
    for (int trial = 0; trial < 25; ++trial) {
        ParamStore store;
        const int n = static_cast<int>(rng.below(3)) + 1;
        FlowModel model = FlowModel::create(store, n, 2, 2, {8}, Activation::tanh, false);
        model.init(rng.next());

        std::vector<std::vector<double>> obs;
        std::vector<double> joint;
        for (int i = 0; i < n; ++i) {
            obs.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
            joint.push_back(rng.uniform(-0.3, 0.3));
            joint.push_back(rng.uniform(-0.3, 0.3));
        }
        double product = 1.0;
        for (int i = 0; i < n; ++i) {
            product *= std::exp(model.log_edge_flow(
                i, obs[i], std::span<const double>(joint).subspan(2 * i, 2)));
        }
        const double joint_flow = std::exp(model.joint_log_flow(obs, joint));
        CHECK(joint_flow == doctest::Approx(product).epsilon(1e-12));
        CHECK(joint_flow > 0.0);
    }
}

TEST_CASE("flow model: analytic inverse rewinds the own-position block") {
    ParamStore store;
    InverseModel inv = InverseModel::create(store, InverseModel::Mode::analytic, 2, 4, 2,
                                            {8}, Activation::tanh);
    const std::vector<double> obs_next{0.5, 0.5, 0.7, -0.7};
    const std::vector<double> action{0.2, 0.0};
    const auto parent = inv.predict_parent(obs_next, action, 0);
    CHECK(parent[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(parent[1] == 0.5);
    CHECK(parent[2] == 0.7);   // relative entries pass through
    CHECK(parent[3] == -0.7);

    const std::vector<double> zero{0.0, 0.0};
    CHECK(inv.predict_parent(obs_next, zero, 0) == obs_next);
}

TEST_CASE("flow model: analytic inverse is exact on interior env transitions") {
    EnvSpec spec = EnvSpec::make(Scenario::food_collection, 2);
    ParamStore store;
    InverseModel inv = InverseModel::create(store, InverseModel::Mode::analytic,
                                            spec.n_agents, spec.obs_dim(), spec.action_dim(),
                                            {8}, Activation::tanh);
    RngStream rng(41, "reset");
    EnvState state = reset(spec, rng);
    // Dyadic values keep the translation exact in floating point.
    state.agent_pos = {0.125, 0.25, -0.25, -0.125};
    const std::vector<double> action{0.0625, -0.046875, 0.03125, 0.078125};
    const auto next = step(spec, state, action).state;

    for (int i = 0; i < spec.n_agents; ++i) {
        const auto before = observe(spec, state, i);
        const auto after = observe(spec, next, i);
        const auto parent = inv.predict_parent(
            after, std::span<const double>(action).subspan(2 * static_cast<size_t>(i), 2), i);
        // Own-position block is recovered exactly.
        CHECK(parent[0] == before[0]);
        CHECK(parent[1] == before[1]);
    }
}

TEST_CASE("checkpoint: save/load round-trips parameters, optimizers and dims exactly") {
    const RunConfig config = toy_config();
    auto bundle = build_models(config);
    bundle->train_step_count = 17;
    bundle->flow_opt.step_count = 9;
    for (size_t i = 0; i < bundle->flow_opt.m.size(); ++i) {
        bundle->flow_opt.m[i] = 0.1 * static_cast<double>(i % 7) + 0.3;
        bundle->flow_opt.v[i] = 0.01 * static_cast<double>(i % 5);
    }

    const std::string path = "test_checkpoint_roundtrip.json";
    save_checkpoint(path, config, *bundle, 123, 45);
    const Checkpoint cp = load_checkpoint(path);

    CHECK(cp.env_steps == 123);
    CHECK(cp.episodes == 45);
    CHECK(cp.bundle->train_step_count == 17);
    CHECK(cp.config.serialize() == config.serialize());
    REQUIRE(cp.bundle->store.size() == bundle->store.size());
    for (size_t i = 0; i < bundle->store.size(); ++i) {
        CHECK(cp.bundle->store.values()[i] == bundle->store.values()[i]);
    }
    CHECK(cp.bundle->flow_opt.step_count == 9);
    CHECK(cp.bundle->flow_opt.m == bundle->flow_opt.m);
    CHECK(cp.bundle->flow_opt.v == bundle->flow_opt.v);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: version mismatch is an explicit error") {
    const RunConfig config = toy_config();
    auto bundle = build_models(config);
    const std::string path = "test_checkpoint_version.json";
    save_checkpoint(path, config, *bundle, 0, 0);

    // Corrupt the version field.
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("\"version\":1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 11, "\"version\":9");
    std::ofstream out(path);
    out << text;
    out.close();

    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), ConfigError);
    std::filesystem::remove(path);
}
