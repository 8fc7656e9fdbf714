#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "maflow/config.hpp"
#include "maflow/models.hpp"

namespace maflow {

inline constexpr int kCheckpointVersion = 1;

// On-disk snapshot of a run: resolved config, per-network layer dims /
// activation / flat parameters, both optimizer states, the RNG root plus
// derivation counters, and the train step count. JSON; numbers round-trip
// exactly.
struct Checkpoint {
    RunConfig config;
    std::unique_ptr<ModelBundle> bundle;
    int64_t env_steps = 0;
    int64_t episodes = 0;
};

void save_checkpoint(const std::string& path, const RunConfig& config,
                     const ModelBundle& bundle, int64_t env_steps, int64_t episodes);

// Throws ConfigError on a version or format mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace maflow
