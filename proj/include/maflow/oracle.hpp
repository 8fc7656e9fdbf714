#pragma once

#include <span>
#include <string>
#include <vector>

#include "maflow/parallel.hpp"
#include "maflow/rng.hpp"

namespace maflow {

// Closed-form flow functions with known Lipschitz constants, used to test
// the Monte-Carlo integral estimator against quadrature ground truth. The
// joint flow is a product of identical per-agent factors, each defined over
// a state box [state_lo, state_hi]^dim and an action box
// [-action_bound, action_bound]^dim:
//
//   constant:           f(o, a) = c
//   gaussian_bump:      f(o, a) = h * exp(-(w|o-m_s|^2 + |a-m_a|^2)/(2 s^2))
//                       (w = 1 when state-coupled, else 0)
//   separable_product:  f(o, a) = prod_d ramp_a(a_d) * prod_d ramp_s(o_d)
//                       with affine ramps, state ramp clamped to its box.
struct AnalyticFlow {
    enum class Kind { constant, gaussian_bump, separable_product };

    Kind kind = Kind::constant;
    int n_agents = 1;
    int dim = 1;  // per agent
    double action_bound = 1.0;
    double state_lo = -1.0;
    double state_hi = 1.0;

    double c = 1.0;  // constant

    double height = 1.0;  // gaussian
    double sigma = 0.5;
    double center_a = 0.0;
    double center_s = 0.0;
    bool state_coupled = false;

    double base_a = 1.0;  // ramps
    double slope_a = 0.0;
    double base_s = 1.0;
    double slope_s = 0.0;

    static AnalyticFlow constant_flow(int n_agents, int dim, double bound, double value);
    static AnalyticFlow gaussian(int n_agents, int dim, double bound, double height,
                                 double sigma, double center_a = 0.0,
                                 bool state_coupled = false, double center_s = 0.0);
    static AnalyticFlow ramp(int n_agents, int dim, double bound, double base_a,
                             double slope_a, double base_s = 1.0, double slope_s = 0.0);

    int joint_dims() const { return n_agents * dim; }
    double mu_A() const;    // measure of the joint action box
    double diam_A() const;  // Euclidean diameter of the joint action box
    double diam_S() const;  // Euclidean diameter of the joint state box

    // Analytic upper bound on the Lipschitz constant of the joint flow over
    // (state, action).
    double lipschitz() const;

    double eval_agent(std::span<const double> obs, std::span<const double> action) const;
    double eval_joint(std::span<const double> state, std::span<const double> actions) const;

    // Exact integral over the joint action box at a fixed state, where a
    // closed form exists (all kinds, outflow side).
    double closed_form_action_integral(std::span<const double> state) const;
};

// mu(A)/K * sum_k prod_i F_i(o_i, a_i^k) over i.i.d. uniform joint samples.
double mc_estimate(const AnalyticFlow& flow, std::span<const double> state, int K,
                   RngStream& rng);

// Parent-side estimate: flows evaluated at (o_i - a + eta * e_0, a). With
// eta = 0 the inverse map is exact. Degenerate boxes (bound 0) yield 0.
double inflow_estimate_with_inverse(const AnalyticFlow& flow, double eta,
                                    std::span<const double> state, int K, RngStream& rng);

// Composite midpoint rule over the joint action box at a fixed state;
// separability makes the product of per-agent grids exact. Requires
// nodes_per_dim >= 16.
double quadrature_integral(const AnalyticFlow& flow, std::span<const double> state,
                           int nodes_per_dim, ExecMode exec = ExecMode::parallel);

// Same for the parent-side integrand F(s - a, a).
double quadrature_parent_integral(const AnalyticFlow& flow, std::span<const double> state,
                                  int nodes_per_dim, ExecMode exec = ExecMode::parallel);

// Doubles the node count until the relative change drops below rel_tol.
// Throws OracleError when it fails to settle.
double converged_quadrature(const AnalyticFlow& flow, std::span<const double> state,
                            bool parent_side, double rel_tol = 1e-6,
                            ExecMode exec = ExecMode::parallel);

// n_trials independent estimates, one derived RNG stream per trial slot.
std::vector<double> run_mc_trials(const AnalyticFlow& flow, std::span<const double> state,
                                  int K, int n_trials, const RngStream& base,
                                  bool parent_side = false, double eta = 0.0,
                                  ExecMode exec = ExecMode::parallel);

struct ConcentrationResult {
    double delta = 0.0;
    int K = 0;
    double radius = 0.0;        // delta * L * mu(A) * diam / sqrt(K)
    double bound = 0.0;         // 2 * exp(-delta^2 / 2)
    double exceedance = 0.0;    // fraction of trials with |err| > radius
    double binomial_stderr = 0.0;
    int n_trials = 0;
    bool pass = false;          // exceedance <= bound + 3 * stderr
};

// Tail-bound check: deviation radius uses diam(A) on the outflow side and
// diam(A) + diam(S) on the parent side. lipschitz_scale deliberately mis-
// scales L to probe the check itself.
ConcentrationResult concentration_trial(const AnalyticFlow& flow,
                                        std::span<const double> state, int K, double delta,
                                        int n_trials, const RngStream& base,
                                        bool parent_side = false,
                                        double lipschitz_scale = 1.0,
                                        ExecMode exec = ExecMode::parallel);

struct UnbiasednessResult {
    double mc_mean = 0.0;
    double mc_stderr = 0.0;  // sample stddev / sqrt(n)
    double truth = 0.0;
    int n_estimates = 0;
    bool pass = false;  // |mc_mean - truth| <= 3 * stderr
};

UnbiasednessResult unbiasedness_trial(const AnalyticFlow& flow, std::span<const double> state,
                                      int K, int n_estimates, const RngStream& base,
                                      bool parent_side = false,
                                      ExecMode exec = ExecMode::parallel);

}  // namespace maflow
