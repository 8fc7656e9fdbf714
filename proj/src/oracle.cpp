#include "maflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "maflow/errors.hpp"

namespace maflow {

namespace {

constexpr double kSqrtHalfPi = 1.2533141373155003;  // sqrt(pi/2)

double gauss_line_integral(double lo, double hi, double m, double sigma) {
    const double s = sigma * std::numbers::sqrt2;
    return sigma * kSqrtHalfPi * (std::erf((hi - m) / s) - std::erf((lo - m) / s));
}

}  // namespace

AnalyticFlow AnalyticFlow::constant_flow(int n_agents, int dim, double bound, double value) {
    AnalyticFlow f;
    f.kind = Kind::constant;
    f.n_agents = n_agents;
    f.dim = dim;
    f.action_bound = bound;
    f.c = value;
    return f;
}

AnalyticFlow AnalyticFlow::gaussian(int n_agents, int dim, double bound, double height,
                                    double sigma, double center_a, bool state_coupled,
                                    double center_s) {
    AnalyticFlow f;
    f.kind = Kind::gaussian_bump;
    f.n_agents = n_agents;
    f.dim = dim;
    f.action_bound = bound;
    f.height = height;
    f.sigma = sigma;
    f.center_a = center_a;
    f.state_coupled = state_coupled;
    f.center_s = center_s;
    return f;
}

AnalyticFlow AnalyticFlow::ramp(int n_agents, int dim, double bound, double base_a,
                                double slope_a, double base_s, double slope_s) {
    AnalyticFlow f;
    f.kind = Kind::separable_product;
    f.n_agents = n_agents;
    f.dim = dim;
    f.action_bound = bound;
    f.base_a = base_a;
    f.slope_a = slope_a;
    f.base_s = base_s;
    f.slope_s = slope_s;
    return f;
}

double AnalyticFlow::mu_A() const {
    return std::pow(2.0 * action_bound, joint_dims());
}

double AnalyticFlow::diam_A() const {
    return 2.0 * action_bound * std::sqrt(static_cast<double>(joint_dims()));
}

double AnalyticFlow::diam_S() const {
    return (state_hi - state_lo) * std::sqrt(static_cast<double>(joint_dims()));
}

double AnalyticFlow::eval_agent(std::span<const double> obs,
                                std::span<const double> action) const {
    switch (kind) {
        case Kind::constant:
            return c;
        case Kind::gaussian_bump: {
            double sq = 0.0;
            for (int j = 0; j < dim; ++j) {
                const double da = action[j] - center_a;
                sq += da * da;
                if (state_coupled) {
                    const double ds = obs[j] - center_s;
                    sq += ds * ds;
                }
            }
            return height * std::exp(-sq / (2.0 * sigma * sigma));
        }
        case Kind::separable_product: {
            double v = 1.0;
            const double aw = 2.0 * action_bound;
            const double sw = state_hi - state_lo;
            for (int j = 0; j < dim; ++j) {
                v *= base_a + slope_a * (action[j] + action_bound) / aw;
                const double u = std::clamp((obs[j] - state_lo) / sw, 0.0, 1.0);
                v *= base_s + slope_s * u;
            }
            return v;
        }
    }
    return 0.0;
}

double AnalyticFlow::eval_joint(std::span<const double> state,
                                std::span<const double> actions) const {
    double v = 1.0;
    for (int i = 0; i < n_agents; ++i) {
        v *= eval_agent(state.subspan(static_cast<size_t>(i) * dim, dim),
                        actions.subspan(static_cast<size_t>(i) * dim, dim));
    }
    return v;
}

double AnalyticFlow::lipschitz() const {
    // Per-agent factor bounds; the product over N agents is Lipschitz with
    // L <= sum_i L_i * prod_{j != i} M_j = N * L_1 * M_1^{N-1} here since
    // all factors are identical.
    double factor_sup = 0.0;
    double factor_lip = 0.0;
    switch (kind) {
        case Kind::constant:
            factor_sup = c;
            factor_lip = 0.0;
            break;
        case Kind::gaussian_bump:
            factor_sup = height;
            // sup |grad| of an isotropic gaussian is h * e^{-1/2} / sigma.
            factor_lip = height * std::exp(-0.5) / sigma;
            break;
        case Kind::separable_product: {
            const double ma = base_a + slope_a;  // per-dim sups
            const double ms = base_s + slope_s;
            factor_sup = std::pow(ma, dim) * std::pow(ms, dim);
            const double ga = slope_a / (2.0 * action_bound) * std::pow(ma, dim - 1) *
                              std::pow(ms, dim);
            const double gs = slope_s / (state_hi - state_lo) * std::pow(ms, dim - 1) *
                              std::pow(ma, dim);
            factor_lip = std::sqrt(static_cast<double>(dim) * (ga * ga + gs * gs));
            break;
        }
    }
    return n_agents * factor_lip * std::pow(factor_sup, n_agents - 1);
}

double AnalyticFlow::closed_form_action_integral(std::span<const double> state) const {
    double v = 1.0;
    for (int i = 0; i < n_agents; ++i) {
        const auto obs = state.subspan(static_cast<size_t>(i) * dim, dim);
        switch (kind) {
            case Kind::constant:
                v *= c * std::pow(2.0 * action_bound, dim);
                break;
            case Kind::gaussian_bump: {
                double agent = height;
                for (int j = 0; j < dim; ++j) {
                    agent *= gauss_line_integral(-action_bound, action_bound, center_a, sigma);
                }
                if (state_coupled) {
                    double sq = 0.0;
                    for (int j = 0; j < dim; ++j) {
                        const double ds = obs[j] - center_s;
                        sq += ds * ds;
                    }
                    agent *= std::exp(-sq / (2.0 * sigma * sigma));
                }
                v *= agent;
                break;
            }
            case Kind::separable_product: {
                const double sw = state_hi - state_lo;
                double agent = std::pow((base_a + 0.5 * slope_a) * 2.0 * action_bound, dim);
                for (int j = 0; j < dim; ++j) {
                    const double u = std::clamp((obs[j] - state_lo) / sw, 0.0, 1.0);
                    agent *= base_s + slope_s * u;
                }
                v *= agent;
                break;
            }
        }
    }
    return v;
}

double mc_estimate(const AnalyticFlow& flow, std::span<const double> state, int K,
                   RngStream& rng) {
    if (K < 1) throw UsageError("mc_estimate: K must be >= 1");
    const int jd = flow.joint_dims();
    std::vector<double> actions(static_cast<size_t>(jd));
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
        for (double& a : actions) a = rng.uniform(-flow.action_bound, flow.action_bound);
        sum += flow.eval_joint(state, actions);
    }
    return flow.mu_A() * (sum / static_cast<double>(K));
}

double inflow_estimate_with_inverse(const AnalyticFlow& flow, double eta,
                                    std::span<const double> state, int K, RngStream& rng) {
    if (K < 1) throw UsageError("inflow_estimate_with_inverse: K must be >= 1");
    const int jd = flow.joint_dims();
    std::vector<double> actions(static_cast<size_t>(jd));
    std::vector<double> parent(static_cast<size_t>(jd));
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
        for (double& a : actions) a = rng.uniform(-flow.action_bound, flow.action_bound);
        for (int j = 0; j < jd; ++j) parent[j] = state[j] - actions[j];
        parent[0] += eta;  // injected inverse error of magnitude eta
        sum += flow.eval_joint(parent, actions);
    }
    return flow.mu_A() * (sum / static_cast<double>(K));
}

namespace {

// Midpoint rule for one agent's box, in fixed chunk order so serial and
// parallel sums agree bitwise.
double agent_quadrature(const AnalyticFlow& flow, std::span<const double> obs,
                        int nodes_per_dim, bool parent_side, ExecMode exec) {
    const int d = flow.dim;
    int64_t cells = 1;
    for (int j = 0; j < d; ++j) cells *= nodes_per_dim;
    const double w = 2.0 * flow.action_bound / nodes_per_dim;

    constexpr int64_t kChunk = 8192;
    const int64_t n_chunks = (cells + kChunk - 1) / kChunk;
    std::vector<double> partial(static_cast<size_t>(n_chunks), 0.0);
    parallel_for(n_chunks, exec, [&](int64_t chunk) {
        std::vector<double> a(static_cast<size_t>(d));
        std::vector<double> o(obs.begin(), obs.end());
        double acc = 0.0;
        const int64_t end = std::min(cells, (chunk + 1) * kChunk);
        for (int64_t cell = chunk * kChunk; cell < end; ++cell) {
            int64_t rem = cell;
            for (int j = d - 1; j >= 0; --j) {
                a[j] = -flow.action_bound + (static_cast<double>(rem % nodes_per_dim) + 0.5) * w;
                rem /= nodes_per_dim;
            }
            if (parent_side) {
                for (int j = 0; j < d; ++j) o[j] = obs[j] - a[j];
            }
            acc += flow.eval_agent(o, a);
        }
        partial[chunk] = acc;
    });
    double sum = 0.0;
    for (double p : partial) sum += p;
    double volume = 1.0;
    for (int j = 0; j < d; ++j) volume *= w;
    return sum * volume;
}

double joint_quadrature(const AnalyticFlow& flow, std::span<const double> state,
                        int nodes_per_dim, bool parent_side, ExecMode exec) {
    if (nodes_per_dim < 16) throw UsageError("quadrature: need >= 16 nodes per dimension");
    double v = 1.0;
    for (int i = 0; i < flow.n_agents; ++i) {
        v *= agent_quadrature(flow, state.subspan(static_cast<size_t>(i) * flow.dim, flow.dim),
                              nodes_per_dim, parent_side, exec);
    }
    return v;
}

}  // namespace

double quadrature_integral(const AnalyticFlow& flow, std::span<const double> state,
                           int nodes_per_dim, ExecMode exec) {
    return joint_quadrature(flow, state, nodes_per_dim, false, exec);
}

double quadrature_parent_integral(const AnalyticFlow& flow, std::span<const double> state,
                                  int nodes_per_dim, ExecMode exec) {
    return joint_quadrature(flow, state, nodes_per_dim, true, exec);
}

double converged_quadrature(const AnalyticFlow& flow, std::span<const double> state,
                            bool parent_side, double rel_tol, ExecMode exec) {
    int nodes = 64;
    double prev = joint_quadrature(flow, state, nodes, parent_side, exec);
    const int max_nodes = flow.dim >= 2 ? 4096 : 1 << 20;
    while (nodes < max_nodes) {
        nodes *= 2;
        const double cur = joint_quadrature(flow, state, nodes, parent_side, exec);
        const double scale = std::max(std::abs(cur), 1e-300);
        if (std::abs(cur - prev) / scale < rel_tol) return cur;
        prev = cur;
    }
    throw OracleError("quadrature did not converge to the requested tolerance");
}

std::vector<double> run_mc_trials(const AnalyticFlow& flow, std::span<const double> state,
                                  int K, int n_trials, const RngStream& base,
                                  bool parent_side, double eta, ExecMode exec) {
    std::vector<double> estimates(static_cast<size_t>(n_trials), 0.0);
    parallel_for(n_trials, exec, [&](int64_t trial) {
        RngStream rng = base.split("trial", static_cast<uint64_t>(trial));
        estimates[trial] = parent_side
                               ? inflow_estimate_with_inverse(flow, eta, state, K, rng)
                               : mc_estimate(flow, state, K, rng);
    });
    return estimates;
}

ConcentrationResult concentration_trial(const AnalyticFlow& flow,
                                        std::span<const double> state, int K, double delta,
                                        int n_trials, const RngStream& base, bool parent_side,
                                        double lipschitz_scale, ExecMode exec) {
    if (n_trials < 1) throw UsageError("concentration_trial: n_trials must be >= 1");
    const double truth = converged_quadrature(flow, state, parent_side, 1e-6, exec);
    const auto estimates = run_mc_trials(flow, state, K, n_trials, base, parent_side, 0.0, exec);

    const double diam = parent_side ? flow.diam_A() + flow.diam_S() : flow.diam_A();
    ConcentrationResult r;
    r.delta = delta;
    r.K = K;
    r.n_trials = n_trials;
    r.radius = delta * lipschitz_scale * flow.lipschitz() * flow.mu_A() * diam / std::sqrt(K);
    r.bound = 2.0 * std::exp(-delta * delta / 2.0);

    // Strict inequality: a zero-variance estimator with a zero radius (the
    // constant flow) never counts as an exceedance.
    int64_t exceed = 0;
    for (double e : estimates) {
        if (std::abs(e - truth) > r.radius) ++exceed;
    }
    r.exceedance = static_cast<double>(exceed) / n_trials;
    const double p = std::min(r.bound, 1.0);
    r.binomial_stderr = std::sqrt(p * (1.0 - p) / n_trials);
    r.pass = r.exceedance <= r.bound + 3.0 * r.binomial_stderr;
    return r;
}

UnbiasednessResult unbiasedness_trial(const AnalyticFlow& flow, std::span<const double> state,
                                      int K, int n_estimates, const RngStream& base,
                                      bool parent_side, ExecMode exec) {
    if (n_estimates < 2) throw UsageError("unbiasedness_trial: need >= 2 estimates");
    const auto estimates =
        run_mc_trials(flow, state, K, n_estimates, base, parent_side, 0.0, exec);
    UnbiasednessResult r;
    r.n_estimates = n_estimates;
    r.truth = converged_quadrature(flow, state, parent_side, 1e-6, exec);
    double sum = 0.0;
    for (double e : estimates) sum += e;
    r.mc_mean = sum / n_estimates;
    double sq = 0.0;
    for (double e : estimates) sq += (e - r.mc_mean) * (e - r.mc_mean);
    const double sample_var = sq / (n_estimates - 1);
    r.mc_stderr = std::sqrt(sample_var / n_estimates);
    r.pass = std::abs(r.mc_mean - r.truth) <= 3.0 * r.mc_stderr;
    return r;
}

}  // namespace maflow
