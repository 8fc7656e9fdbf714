#include "maflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "maflow/errors.hpp"

namespace maflow {

PositionTrack track_of(const Trajectory& traj) {
    PositionTrack track;
    track.n_agents = static_cast<int>(traj.records.front().observations.size());
    track.dim = static_cast<int>(traj.records.front().positions.size()) / track.n_agents;
    track.positions.reserve(traj.records.size() * traj.records.front().positions.size());
    for (const auto& rec : traj.records) {
        track.positions.insert(track.positions.end(), rec.positions.begin(),
                               rec.positions.end());
    }
    track.terminal_reward = traj.terminal_reward();
    return track;
}

std::vector<PositionTrack> collect_tracks(const EnvSpec& spec, const FlowModel* model,
                                          SelectMode mode, double temperature, int k_hat,
                                          int n_episodes, RngStream rng, ExecMode exec) {
    std::vector<PositionTrack> tracks(n_episodes);
    std::exception_ptr error;
    parallel_for(n_episodes, exec, [&](int64_t e) {
        try {
            RngStream env_rng = rng.split("env", static_cast<uint64_t>(e));
            RngStream act_rng = (model != nullptr && mode == SelectMode::greedy)
                                    ? rng.split("greedy-act")
                                    : rng.split("act", static_cast<uint64_t>(e));
            Trajectory traj = model != nullptr
                                  ? rollout(spec, *model, mode, temperature, k_hat, env_rng,
                                            act_rng)
                                  : rollout_uniform(spec, env_rng, act_rng);
            tracks[e] = track_of(traj);
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
    return tracks;
}

ReturnStats return_stats_of(std::span<const PositionTrack> tracks) {
    ReturnStats stats;
    stats.returns.reserve(tracks.size());
    for (const auto& t : tracks) stats.returns.push_back(t.terminal_reward);
    if (stats.returns.empty()) return stats;
    double sum = 0.0;
    for (double r : stats.returns) sum += r;
    stats.mean = sum / static_cast<double>(stats.returns.size());
    double sq = 0.0;
    for (double r : stats.returns) sq += (r - stats.mean) * (r - stats.mean);
    stats.stddev = std::sqrt(sq / static_cast<double>(stats.returns.size()));
    return stats;
}

ReturnStats avg_test_return(const EnvSpec& spec, const FlowModel& model, SelectMode mode,
                            double temperature, int k_hat, int n_episodes, RngStream rng,
                            ExecMode exec) {
    if (n_episodes < 1) throw UsageError("avg_test_return: n_episodes must be >= 1");
    const auto tracks = collect_tracks(spec, &model, mode, temperature, k_hat, n_episodes,
                                       rng, exec);
    return return_stats_of(tracks);
}

double trajectory_distance(const PositionTrack& a, const PositionTrack& b) {
    if (a.n_agents != b.n_agents || a.dim != b.dim ||
        a.positions.size() != b.positions.size()) {
        throw UsageError("trajectory_distance: mismatched horizons or shapes");
    }
    const int steps = a.horizon() + 1;
    const int n = a.n_agents;
    const int d = a.dim;
    double total = 0.0;
    for (int t = 0; t < steps; ++t) {
        double per_agent = 0.0;
        for (int i = 0; i < n; ++i) {
            const size_t off = (static_cast<size_t>(t) * n + i) * d;
            double sq = 0.0;
            for (int c = 0; c < d; ++c) {
                const double diff = a.positions[off + c] - b.positions[off + c];
                sq += diff * diff;
            }
            per_agent += std::sqrt(sq);
        }
        total += per_agent / n;
    }
    return total / steps;
}

DiversityReport count_distinct(std::span<const PositionTrack> tracks, double threshold,
                               double validity_floor, ExecMode exec) {
    if (!(threshold > 0.0)) throw UsageError("count_distinct: threshold must be positive");

    DiversityReport report;
    report.n_collected = static_cast<int>(tracks.size());
    report.threshold = threshold;
    report.validity_floor = validity_floor;

    std::vector<const PositionTrack*> accepted;
    std::vector<double> nearest;
    std::vector<double> dists;
    for (const auto& track : tracks) {
        if (track.terminal_reward < validity_floor) continue;
        report.n_valid += 1;
        if (accepted.empty()) {
            accepted.push_back(&track);
            continue;
        }
        dists.assign(accepted.size(), 0.0);
        parallel_for(static_cast<int64_t>(accepted.size()), exec, [&](int64_t j) {
            dists[j] = trajectory_distance(track, *accepted[j]);
        });
        double min_dist = dists[0];
        for (double d : dists) min_dist = std::min(min_dist, d);
        nearest.push_back(min_dist);
        if (min_dist >= threshold) accepted.push_back(&track);
    }
    report.n_distinct = static_cast<int>(accepted.size());

    if (!nearest.empty()) {
        report.nearest_min = *std::min_element(nearest.begin(), nearest.end());
        report.nearest_max = *std::max_element(nearest.begin(), nearest.end());
        double sum = 0.0;
        for (double v : nearest) sum += v;
        report.nearest_mean = sum / static_cast<double>(nearest.size());
    }
    return report;
}

namespace {

size_t cell_index(const EnvSpec& spec, std::span<const double> joint_pos, int bins) {
    const double hw = spec.arena_half_width;
    size_t idx = 0;
    for (double x : joint_pos) {
        int b = static_cast<int>((x + hw) / (2.0 * hw) * bins);
        b = std::clamp(b, 0, bins - 1);
        idx = idx * bins + static_cast<size_t>(b);
    }
    return idx;
}

}  // namespace

Histogram histogram_of_tracks(const EnvSpec& spec, std::span<const PositionTrack> tracks,
                              int bins_per_dim) {
    if (bins_per_dim < 2) throw UsageError("histogram: bins_per_dim must be >= 2");
    const int dims = spec.n_agents * spec.pos_dim();
    Histogram h;
    h.bins_per_dim = bins_per_dim;
    h.dims = dims;
    h.lo = -spec.arena_half_width;
    h.hi = spec.arena_half_width;
    size_t cells = 1;
    for (int i = 0; i < dims; ++i) cells *= static_cast<size_t>(bins_per_dim);
    std::vector<int64_t> counts(cells, 0);
    for (const auto& track : tracks) {
        const size_t off = track.positions.size() - static_cast<size_t>(dims);
        counts[cell_index(spec, {track.positions.data() + off, static_cast<size_t>(dims)},
                          bins_per_dim)] += 1;
    }
    h.mass.resize(cells);
    const double inv = tracks.empty() ? 0.0 : 1.0 / static_cast<double>(tracks.size());
    for (size_t i = 0; i < cells; ++i) h.mass[i] = static_cast<double>(counts[i]) * inv;
    return h;
}

Histogram terminal_histogram(const EnvSpec& spec, const FlowModel& model, int n_episodes,
                             int bins_per_dim, double temperature, int k_hat, RngStream rng,
                             ExecMode exec) {
    const auto tracks = collect_tracks(spec, &model, SelectMode::sample, temperature, k_hat,
                                       n_episodes, rng, exec);
    return histogram_of_tracks(spec, tracks, bins_per_dim);
}

Histogram reward_histogram(const EnvSpec& spec, int bins_per_dim, int subgrid) {
    if (bins_per_dim < 2) throw UsageError("histogram: bins_per_dim must be >= 2");
    if (subgrid < 1) throw UsageError("reward_histogram: subgrid must be >= 1");
    const int dims = spec.n_agents * spec.pos_dim();
    Histogram h;
    h.bins_per_dim = bins_per_dim;
    h.dims = dims;
    h.lo = -spec.arena_half_width;
    h.hi = spec.arena_half_width;
    size_t cells = 1;
    for (int i = 0; i < dims; ++i) cells *= static_cast<size_t>(bins_per_dim);
    h.mass.assign(cells, 0.0);

    // Entity layout fixed by a dedicated stream; scenarios without entities
    // (the toy) draw nothing.
    RngStream layout_rng(0, "reward-hist");
    EnvState state = reset(spec, layout_rng);
    state.t = spec.horizon;

    const double cell_w = (h.hi - h.lo) / bins_per_dim;
    const double sub_w = cell_w / subgrid;
    std::vector<size_t> cell_idx(static_cast<size_t>(dims), 0);
    std::vector<size_t> sub_idx(static_cast<size_t>(dims), 0);

    double total = 0.0;
    for (size_t cell = 0; cell < cells; ++cell) {
        size_t rem = cell;
        for (int k = dims - 1; k >= 0; --k) {
            cell_idx[k] = rem % bins_per_dim;
            rem /= bins_per_dim;
        }
        size_t subcells = 1;
        for (int k = 0; k < dims; ++k) subcells *= static_cast<size_t>(subgrid);
        double acc = 0.0;
        for (size_t sc = 0; sc < subcells; ++sc) {
            size_t srem = sc;
            for (int k = dims - 1; k >= 0; --k) {
                sub_idx[k] = srem % subgrid;
                srem /= subgrid;
            }
            for (int k = 0; k < dims; ++k) {
                state.agent_pos[k] =
                    h.lo + cell_idx[k] * cell_w + (sub_idx[k] + 0.5) * sub_w;
            }
            acc += terminal_reward(spec, state);
        }
        h.mass[cell] = acc;
        total += acc;
    }
    for (double& m : h.mass) m /= total;
    return h;
}

double total_variation(const Histogram& a, const Histogram& b) {
    if (a.mass.size() != b.mass.size()) throw UsageError("total_variation: grid mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < a.mass.size(); ++i) sum += std::abs(a.mass[i] - b.mass[i]);
    return 0.5 * sum;
}

}  // namespace maflow
