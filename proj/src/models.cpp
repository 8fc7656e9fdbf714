#include "maflow/models.hpp"

namespace maflow {

namespace {

std::unique_ptr<ModelBundle> build(const RunConfig& config, bool init) {
    config.validate();
    const EnvSpec spec = config.env_spec();
    const auto hidden = config.hidden_dim_list();
    const Activation act = activation_from_string(config.activation);

    auto bundle = std::make_unique<ModelBundle>();
    bundle->flow = FlowModel::create(bundle->store, spec.n_agents, spec.obs_dim(),
                                     spec.action_dim(), hidden, act,
                                     config.shared_flow_params);
    bundle->inverse = InverseModel::create(bundle->store, config.inv_mode(), spec.n_agents,
                                           spec.obs_dim(), spec.action_dim(), hidden, act);
    if (init) {
        bundle->flow.init(config.seed);
        bundle->inverse.init(config.seed);
    }
    bundle->flow_opt = AdamState(bundle->flow.param_end() - bundle->flow.param_begin(),
                                 config.learning_rate);
    bundle->inverse_opt = AdamState(bundle->inverse.has_net() ? bundle->inverse.net().param_count() : 0,
                                    config.learning_rate);
    return bundle;
}

}  // namespace

std::unique_ptr<ModelBundle> build_models(const RunConfig& config) {
    return build(config, true);
}

std::unique_ptr<ModelBundle> build_models_uninitialized(const RunConfig& config) {
    return build(config, false);
}

}  // namespace maflow
