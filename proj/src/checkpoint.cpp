#include "maflow/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "maflow/errors.hpp"

namespace maflow {

namespace {

using nlohmann::json;

json adam_to_json(const AdamState& s) {
    return json{{"m", s.m},
                {"v", s.v},
                {"step_count", s.step_count},
                {"lr", s.lr},
                {"beta1", s.beta1},
                {"beta2", s.beta2},
                {"eps_adam", s.eps_adam}};
}

void adam_from_json(const json& j, AdamState& s) {
    s.m = j.at("m").get<std::vector<double>>();
    s.v = j.at("v").get<std::vector<double>>();
    s.step_count = j.at("step_count").get<long>();
    s.lr = j.at("lr").get<double>();
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.eps_adam = j.at("eps_adam").get<double>();
}

json net_to_json(const ParamStore& store, const Mlp& mlp) {
    const double* p = store.value_ptr(mlp.param_offset());
    return json{{"name", mlp.name()},
                {"dims", mlp.dims()},
                {"activation", to_string(mlp.activation())},
                {"params", std::vector<double>(p, p + mlp.param_count())}};
}

void net_from_json(const json& j, ParamStore& store, const Mlp& mlp) {
    if (j.at("name").get<std::string>() != mlp.name()) {
        throw ConfigError("checkpoint: network name mismatch: " +
                          j.at("name").get<std::string>() + " vs " + mlp.name());
    }
    if (j.at("dims").get<std::vector<int>>() != mlp.dims()) {
        throw ConfigError("checkpoint: layer dims mismatch for " + mlp.name());
    }
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != mlp.param_count()) {
        throw ConfigError("checkpoint: parameter count mismatch for " + mlp.name());
    }
    std::copy(params.begin(), params.end(), store.value_ptr(mlp.param_offset()));
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& config,
                     const ModelBundle& bundle, int64_t env_steps, int64_t episodes) {
    json j;
    j["format"] = "maflow-checkpoint";
    j["version"] = kCheckpointVersion;
    j["config"] = config.serialize();
    j["train_step_count"] = bundle.train_step_count;
    j["env_steps"] = env_steps;
    j["episodes"] = episodes;
    j["rng"] = json{{"root_seed", config.seed},
                    {"episode_index", episodes},
                    {"update_index", bundle.train_step_count}};

    json nets = json::array();
    const int n_nets = bundle.flow.shared() ? 1 : bundle.flow.n_agents();
    for (int i = 0; i < n_nets; ++i) {
        nets.push_back(net_to_json(bundle.store, bundle.flow.net(i)));
    }
    if (bundle.inverse.has_net()) {
        nets.push_back(net_to_json(bundle.store, bundle.inverse.net()));
    }
    j["networks"] = std::move(nets);
    j["optimizers"] = json{{"flow", adam_to_json(bundle.flow_opt)},
                           {"inverse", adam_to_json(bundle.inverse_opt)}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("checkpoint parse error: ") + e.what());
    }
    if (!j.contains("format") || j["format"] != "maflow-checkpoint") {
        throw ConfigError("not a maflow checkpoint: " + path);
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
        throw ConfigError("checkpoint version mismatch: file has " + std::to_string(version) +
                          ", this build reads " + std::to_string(kCheckpointVersion));
    }

    Checkpoint cp;
    cp.config = RunConfig::parse_text(j.at("config").get<std::string>());
    cp.bundle = build_models_uninitialized(cp.config);
    cp.env_steps = j.at("env_steps").get<int64_t>();
    cp.episodes = j.at("episodes").get<int64_t>();
    cp.bundle->train_step_count = j.at("train_step_count").get<long>();

    const auto& nets = j.at("networks");
    size_t idx = 0;
    const int n_nets = cp.bundle->flow.shared() ? 1 : cp.bundle->flow.n_agents();
    for (int i = 0; i < n_nets; ++i) {
        net_from_json(nets.at(idx++), cp.bundle->store, cp.bundle->flow.net(i));
    }
    if (cp.bundle->inverse.has_net()) {
        net_from_json(nets.at(idx++), cp.bundle->store, cp.bundle->inverse.net());
    }
    adam_from_json(j.at("optimizers").at("flow"), cp.bundle->flow_opt);
    adam_from_json(j.at("optimizers").at("inverse"), cp.bundle->inverse_opt);
    return cp;
}

}  // namespace maflow
