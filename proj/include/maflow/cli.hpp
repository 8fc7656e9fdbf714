#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maflow::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;     // unexpected failure
inline constexpr int kExitConfig = 2;    // config / usage errors
inline constexpr int kExitDiverged = 3;  // training diverged
inline constexpr int kExitOracle = 4;    // an oracle bound check failed

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides);

int cmd_eval(const std::string& checkpoint_path, const std::string& mode, int episodes,
             uint64_t seed);

int cmd_diversity(const std::string& checkpoint_path, const std::string& mode,
                  int n_trajectories, double threshold, uint64_t seed);

struct OracleOptions {
    std::string suite = "all";  // all | constant | unbiasedness | concentration | inverse
    int n_trials = 10000;
    int n_estimates = 1000;
    int mc_samples = 10000;  // K for the unbiasedness suite
    uint64_t seed = 1;
    double lipschitz_scale = 1.0;
};

int cmd_oracle(const OracleOptions& options);

}  // namespace maflow::cli
