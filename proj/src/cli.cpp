#include "maflow/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include "maflow/checkpoint.hpp"
#include "maflow/errors.hpp"
#include "maflow/metrics.hpp"
#include "maflow/oracle.hpp"
#include "maflow/trainer.hpp"

namespace maflow::cli {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-11.6g", v);
    return buf;
}

int report_error(const std::exception& e, int code) {
    std::cerr << "error: " << e.what() << "\n";
    return code;
}

}  // namespace

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    try {
        RunConfig config = RunConfig::parse_file(config_path);
        config.apply_overrides(overrides);
        config.validate();
        const TrainResult result = train_loop(config);
        std::cout << "env_steps = " << result.env_steps << "\n"
                  << "episodes = " << result.episodes << "\n"
                  << "updates = " << result.updates << "\n"
                  << "fm_loss = " << fmt(result.last_fm_loss) << "\n"
                  << "inverse_loss = " << fmt(result.last_inverse_loss) << "\n"
                  << "metrics = " << result.metrics_path << "\n"
                  << "checkpoint = " << result.checkpoint_path << "\n";
        return kExitOk;
    } catch (const DivergedError& e) {
        return report_error(e, kExitDiverged);
    } catch (const ConfigError& e) {
        return report_error(e, kExitConfig);
    } catch (const UsageError& e) {
        return report_error(e, kExitConfig);
    } catch (const std::exception& e) {
        return report_error(e, kExitError);
    }
}

int cmd_eval(const std::string& checkpoint_path, const std::string& mode, int episodes,
             uint64_t seed) {
    try {
        if (episodes < 1) throw UsageError("eval: episodes must be >= 1");
        const Checkpoint cp = load_checkpoint(checkpoint_path);
        const EnvSpec spec = cp.config.env_spec();
        const SelectMode select = select_mode_from_string(mode);
        RngStream rng(seed, "cli-eval");
        const ReturnStats stats =
            avg_test_return(spec, cp.bundle->flow, select, cp.config.temperature,
                            cp.config.k_hat, episodes, rng);
        std::cout << "checkpoint = " << checkpoint_path << "\n"
                  << "mode = " << mode << "\n"
                  << "episodes = " << episodes << "\n"
                  << "mean_return = " << fmt(stats.mean) << "\n"
                  << "stddev_return = " << fmt(stats.stddev) << "\n";
        std::cout << "episode_returns = ";
        for (size_t i = 0; i < stats.returns.size(); ++i) {
            if (i > 0) std::cout << ',';
            std::cout << fmt(stats.returns[i]);
        }
        std::cout << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        return report_error(e, kExitConfig);
    } catch (const UsageError& e) {
        return report_error(e, kExitConfig);
    } catch (const std::exception& e) {
        return report_error(e, kExitError);
    }
}

int cmd_diversity(const std::string& checkpoint_path, const std::string& mode,
                  int n_trajectories, double threshold, uint64_t seed) {
    try {
        if (n_trajectories < 1) throw UsageError("diversity: n_trajectories must be >= 1");
        const Checkpoint cp = load_checkpoint(checkpoint_path);
        const EnvSpec spec = cp.config.env_spec();
        const SelectMode select = select_mode_from_string(mode);
        const double thr =
            threshold > 0.0 ? threshold : cp.config.resolved_diversity_threshold();
        RngStream rng(seed, "cli-diversity");
        const auto tracks =
            collect_tracks(spec, &cp.bundle->flow, select, cp.config.temperature,
                           cp.config.k_hat, n_trajectories, rng);
        const DiversityReport report =
            count_distinct(tracks, thr, cp.config.resolved_validity_floor());
        std::cout << "checkpoint = " << checkpoint_path << "\n"
                  << "mode = " << mode << "\n"
                  << "n_collected = " << report.n_collected << "\n"
                  << "n_valid = " << report.n_valid << "\n"
                  << "n_distinct = " << report.n_distinct << "\n"
                  << "threshold = " << fmt(report.threshold) << "\n"
                  << "validity_floor = " << fmt(report.validity_floor) << "\n"
                  << "nearest_min = " << fmt(report.nearest_min) << "\n"
                  << "nearest_mean = " << fmt(report.nearest_mean) << "\n"
                  << "nearest_max = " << fmt(report.nearest_max) << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        return report_error(e, kExitConfig);
    } catch (const UsageError& e) {
        return report_error(e, kExitConfig);
    } catch (const std::exception& e) {
        return report_error(e, kExitError);
    }
}

namespace {

struct SuiteState {
    bool all_pass = true;
};

AnalyticFlow oracle_gaussian(int n_agents, int dim, bool state_coupled) {
    return AnalyticFlow::gaussian(n_agents, dim, 1.0, 1.0, 0.5, 0.1, state_coupled, 0.0);
}

AnalyticFlow oracle_ramp(int n_agents, bool state_coupled) {
    return AnalyticFlow::ramp(n_agents, 1, 1.0, 0.5, 1.0, 1.0, state_coupled ? 0.5 : 0.0);
}

void run_unbiasedness(const OracleOptions& options, SuiteState& state) {
    std::cout << "suite = unbiasedness (samples K=" << options.mc_samples
              << ", estimates R=" << options.n_estimates << ")\n";
    std::cout << "flow       N  mc_mean      truth        |diff|       3*stderr    verdict\n";
    struct Row {
        const char* name;
        AnalyticFlow flow;
    };
    const Row rows[] = {
        {"gaussian", oracle_gaussian(1, 2, false)},
        {"gaussian", oracle_gaussian(2, 1, false)},
        {"separable", oracle_ramp(1, false)},
        {"separable", oracle_ramp(2, false)},
    };
    int idx = 0;
    for (const auto& row : rows) {
        const std::vector<double> at(static_cast<size_t>(row.flow.joint_dims()), 0.0);
        RngStream base(options.seed, "oracle-unbiased", static_cast<uint64_t>(idx++));
        const auto r = unbiasedness_trial(row.flow, at, options.mc_samples,
                                          options.n_estimates, base);
        std::printf("%-10s %d  %s %s %s %s %s\n", row.name, row.flow.n_agents,
                    fmt6(r.mc_mean).c_str(), fmt6(r.truth).c_str(),
                    fmt6(std::abs(r.mc_mean - r.truth)).c_str(),
                    fmt6(3.0 * r.mc_stderr).c_str(), r.pass ? "PASS" : "FAIL");
        state.all_pass = state.all_pass && r.pass;
    }
}

void run_concentration(const OracleOptions& options, SuiteState& state, bool parent_side) {
    std::cout << "suite = " << (parent_side ? "inverse-concentration" : "concentration")
              << " (trials=" << options.n_trials
              << ", lipschitz_scale=" << options.lipschitz_scale << ")\n";
    std::cout << "flow       N  K     delta  radius      bound       exceedance  3*stderr  "
                 "  verdict\n";
    struct Row {
        const char* name;
        AnalyticFlow flow;
    };
    const Row rows[] = {
        {"gaussian", oracle_gaussian(1, 1, parent_side)},
        {"gaussian", oracle_gaussian(2, 1, parent_side)},
        {"separable", oracle_ramp(1, parent_side)},
        {"separable", oracle_ramp(2, parent_side)},
    };
    int idx = 0;
    for (const auto& row : rows) {
        const std::vector<double> at(static_cast<size_t>(row.flow.joint_dims()), 0.25);
        for (int K : {100, 1000}) {
            RngStream base(options.seed, "oracle-conc", static_cast<uint64_t>(idx++));
            for (double delta : {1.0, 2.0, 3.0}) {
                const auto r =
                    concentration_trial(row.flow, at, K, delta, options.n_trials, base,
                                        parent_side, options.lipschitz_scale);
                std::printf("%-10s %d  %-5d %-6g %s %s %s %s %s\n", row.name,
                            row.flow.n_agents, K, delta, fmt6(r.radius).c_str(),
                            fmt6(r.bound).c_str(), fmt6(r.exceedance).c_str(),
                            fmt6(3.0 * r.binomial_stderr).c_str(), r.pass ? "PASS" : "FAIL");
                state.all_pass = state.all_pass && r.pass;
            }
        }
    }
}

void run_constant(const OracleOptions& options, SuiteState& state) {
    std::cout << "suite = constant\n";
    const AnalyticFlow flow = AnalyticFlow::constant_flow(1, 1, 1.0, 0.5);
    const std::vector<double> at(1, 0.0);

    RngStream rng(options.seed, "oracle-const");
    const double est = mc_estimate(flow, at, 64, rng);
    const bool exact = est == 2.0 * 0.5;
    std::printf("mc_estimate = %s (expect exactly 1), %s\n", fmt(est).c_str(),
                exact ? "PASS" : "FAIL");
    state.all_pass = state.all_pass && exact;

    RngStream base(options.seed, "oracle-const-conc");
    const auto r = concentration_trial(flow, at, 100, 1.0, std::min(options.n_trials, 1000),
                                       base, false, options.lipschitz_scale);
    const bool zero = r.exceedance == 0.0;
    std::printf("constant-flow exceedance = %s (expect 0), %s\n", fmt(r.exceedance).c_str(),
                zero ? "PASS" : "FAIL");
    state.all_pass = state.all_pass && zero;
}

void run_inverse_bias(const OracleOptions& options, SuiteState& state) {
    std::cout << "suite = inverse-bias (injected parent error)\n";
    const AnalyticFlow flow = oracle_ramp(1, true);
    const std::vector<double> at(1, 0.25);
    const double eta = 0.01;
    const int n = std::min(options.n_trials, 1000);
    RngStream base(options.seed, "oracle-inv-bias");
    const auto exact = run_mc_trials(flow, at, 1000, n, base, true, 0.0);
    const auto biased = run_mc_trials(flow, at, 1000, n, base, true, eta);
    const double bound = flow.mu_A() * flow.lipschitz() * eta;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(biased[i] - exact[i]));
    const bool pass = worst <= bound * (1.0 + 1e-9);
    std::printf("max added error = %s <= mu*L*eta = %s, %s\n", fmt(worst).c_str(),
                fmt(bound).c_str(), pass ? "PASS" : "FAIL");
    state.all_pass = state.all_pass && pass;
}

}  // namespace

int cmd_oracle(const OracleOptions& options) {
    try {
        SuiteState state;
        const std::string& suite = options.suite;
        const bool all = suite == "all";
        if (!all && suite != "constant" && suite != "unbiasedness" &&
            suite != "concentration" && suite != "inverse") {
            throw UsageError("unknown oracle suite: " + suite);
        }
        if (all || suite == "constant") run_constant(options, state);
        if (all || suite == "unbiasedness") run_unbiasedness(options, state);
        if (all || suite == "concentration") run_concentration(options, state, false);
        if (all || suite == "inverse") {
            run_concentration(options, state, true);
            run_inverse_bias(options, state);
        }
        std::cout << (state.all_pass ? "oracle: all checks passed\n"
                                     : "oracle: BOUND CHECK FAILED\n");
        return state.all_pass ? kExitOk : kExitOracle;
    } catch (const ConfigError& e) {
        return report_error(e, kExitConfig);
    } catch (const UsageError& e) {
        return report_error(e, kExitConfig);
    } catch (const OracleError& e) {
        return report_error(e, kExitOracle);
    } catch (const std::exception& e) {
        return report_error(e, kExitError);
    }
}

}  // namespace maflow::cli
