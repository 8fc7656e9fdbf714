#pragma once

#include <optional>
#include <span>
#include <vector>

#include "maflow/env.hpp"
#include "maflow/parallel.hpp"
#include "maflow/sampler.hpp"

namespace maflow {

// Slim view of an episode for distance computations: agent positions over
// time plus the terminal reward.
struct PositionTrack {
    int n_agents = 0;
    int dim = 0;
    std::vector<double> positions;  // (horizon + 1) * n_agents * dim
    double terminal_reward = 0.0;

    int horizon() const {
        return static_cast<int>(positions.size() / (static_cast<size_t>(n_agents) * dim)) - 1;
    }
};

PositionTrack track_of(const Trajectory& traj);

// Collects n independent episodes. Per-episode RNG streams are split from
// `rng` by index, so results do not depend on thread count. In greedy mode
// all episodes share one candidate stream (re-derived per episode): with a
// fixed layout the greedy policy is then fully deterministic. A null model
// runs the uniform-random policy.
std::vector<PositionTrack> collect_tracks(const EnvSpec& spec, const FlowModel* model,
                                          SelectMode mode, double temperature, int k_hat,
                                          int n_episodes, RngStream rng,
                                          ExecMode exec = ExecMode::parallel);

struct ReturnStats {
    double mean = 0.0;
    double stddev = 0.0;  // population
    std::vector<double> returns;
};

ReturnStats avg_test_return(const EnvSpec& spec, const FlowModel& model, SelectMode mode,
                            double temperature, int k_hat, int n_episodes, RngStream rng,
                            ExecMode exec = ExecMode::parallel);

ReturnStats return_stats_of(std::span<const PositionTrack> tracks);

// Mean over timesteps of the mean over agents of the Euclidean distance
// between positions. Throws UsageError on mismatched shapes.
double trajectory_distance(const PositionTrack& a, const PositionTrack& b);

struct DiversityReport {
    int n_collected = 0;
    int n_valid = 0;
    int n_distinct = 0;
    double threshold = 0.0;
    double validity_floor = 0.0;
    // Nearest-accepted distance seen for each valid candidate after the first.
    double nearest_min = 0.0;
    double nearest_mean = 0.0;
    double nearest_max = 0.0;
};

// Greedy first-accepted-wins dedup in input order: a valid trajectory is
// distinct when its distance to every previously accepted one is >= the
// threshold. Validity means terminal reward >= validity_floor.
DiversityReport count_distinct(std::span<const PositionTrack> tracks, double threshold,
                               double validity_floor, ExecMode exec = ExecMode::parallel);

struct Histogram {
    int bins_per_dim = 0;
    int dims = 0;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> mass;  // bins_per_dim^dims, sums to 1

    size_t cells() const { return mass.size(); }
};

// Empirical distribution of terminal joint agent positions over a regular
// grid on [-arena_half_width, arena_half_width]^dims, from sample-mode
// rollouts.
Histogram terminal_histogram(const EnvSpec& spec, const FlowModel& model, int n_episodes,
                             int bins_per_dim, double temperature, int k_hat, RngStream rng,
                             ExecMode exec = ExecMode::parallel);

Histogram histogram_of_tracks(const EnvSpec& spec, std::span<const PositionTrack> tracks,
                              int bins_per_dim);

// Reference distribution for the proportionality check: the terminal reward
// integrated over each cell (midpoint subgrid) and normalized.
Histogram reward_histogram(const EnvSpec& spec, int bins_per_dim, int subgrid = 16);

// Half of the L1 distance between two distributions on the same grid.
double total_variation(const Histogram& a, const Histogram& b);

}  // namespace maflow
