#pragma once

#include <memory>

#include "maflow/config.hpp"
#include "maflow/flow_model.hpp"
#include "maflow/nn.hpp"
#include "maflow/param_store.hpp"

namespace maflow {

// Owns every trainable parameter of a run: the per-agent flow nets followed
// by the inverse net in one contiguous store, each range with its own Adam
// state. Non-copyable because FlowModel/InverseModel hold store offsets.
struct ModelBundle {
    ParamStore store;
    FlowModel flow;
    InverseModel inverse;
    AdamState flow_opt;
    AdamState inverse_opt;
    long train_step_count = 0;

    std::span<double> flow_params() {
        return store.values().subspan(flow.param_begin(), flow.param_end() - flow.param_begin());
    }
    std::span<double> inverse_params() {
        if (!inverse.has_net()) return {};
        return store.values().subspan(inverse.net().param_offset(), inverse.net().param_count());
    }
};

// Builds and seeds-initializes all networks for a config.
std::unique_ptr<ModelBundle> build_models(const RunConfig& config);

// Builds the structure without initializing weights (checkpoint load path).
std::unique_ptr<ModelBundle> build_models_uninitialized(const RunConfig& config);

}  // namespace maflow
