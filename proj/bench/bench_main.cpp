// Times every parallel kernel against its serial reference and verifies the
// results agree bitwise. Build and run:
//   cmake --build build --target maflow-bench && ./build/bench/maflow-bench

#include <chrono>
#include <cstdio>
#include <string>

#include "maflow/metrics.hpp"
#include "maflow/models.hpp"
#include "maflow/oracle.hpp"
#include "maflow/trainer.hpp"

using namespace maflow;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool match) {
    std::printf("%-28s %10.1f ms %10.1f ms   x%.2f   %s\n", name.c_str(), serial_ms,
                parallel_ms, serial_ms / parallel_ms, match ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
    std::printf("%-28s %13s %13s   %s\n", "kernel", "serial", "openmp", "speedup");

    int mismatches = 0;

    {
        RunConfig config;
        config.scenario = "food_collection";
        config.n_agents = 3;
        config.inverse_mode = "analytic";
        config.hidden_dims = "32,32";
        config.seed = 1;
        auto bundle = build_models(config);
        const EnvSpec spec = config.env_spec();

        std::vector<Trajectory> trajs;
        for (int e = 0; e < 8; ++e) {
            trajs.push_back(rollout(spec, bundle->flow, SelectMode::sample, 1.0, 16,
                                    RngStream(2, "env", e), RngStream(2, "act", e)));
        }
        std::vector<const Trajectory*> batch;
        for (const auto& t : trajs) batch.push_back(&t);

        auto t0 = Clock::now();
        BatchGradient serial;
        for (int r = 0; r < 10; ++r) {
            serial = batch_flow_gradient(*bundle, spec, batch, 1.0, 16,
                                         TerminalOutflowMode::boundary, 3, r,
                                         ExecMode::serial);
        }
        const double serial_ms = ms_since(t0);

        t0 = Clock::now();
        BatchGradient parallel;
        for (int r = 0; r < 10; ++r) {
            parallel = batch_flow_gradient(*bundle, spec, batch, 1.0, 16,
                                           TerminalOutflowMode::boundary, 3, r,
                                           ExecMode::parallel);
        }
        const double parallel_ms = ms_since(t0);
        const bool ok = serial.grad == parallel.grad && serial.mean_loss == parallel.mean_loss;
        mismatches += !ok;
        report("batch flow gradient", serial_ms, parallel_ms, ok);
    }

    {
        const auto flow = AnalyticFlow::gaussian(2, 1, 1.0, 1.0, 0.5);
        const std::vector<double> state{0.1, -0.1};
        RngStream base(4, "bench-trials");

        auto t0 = Clock::now();
        const auto serial =
            run_mc_trials(flow, state, 1000, 2000, base, false, 0.0, ExecMode::serial);
        const double serial_ms = ms_since(t0);

        t0 = Clock::now();
        const auto parallel =
            run_mc_trials(flow, state, 1000, 2000, base, false, 0.0, ExecMode::parallel);
        const double parallel_ms = ms_since(t0);
        const bool ok = serial == parallel;
        mismatches += !ok;
        report("mc oracle trials", serial_ms, parallel_ms, ok);
    }

    {
        const auto flow = AnalyticFlow::gaussian(1, 2, 1.0, 1.0, 0.45, 0.2);
        const std::vector<double> state{0.0, 0.0};

        auto t0 = Clock::now();
        const double serial = quadrature_integral(flow, state, 4096, ExecMode::serial);
        const double serial_ms = ms_since(t0);

        t0 = Clock::now();
        const double parallel = quadrature_integral(flow, state, 4096, ExecMode::parallel);
        const double parallel_ms = ms_since(t0);
        const bool ok = serial == parallel;
        mismatches += !ok;
        report("midpoint quadrature", serial_ms, parallel_ms, ok);
    }

    {
        RunConfig config;
        config.scenario = "predator_prey";
        config.n_agents = 3;
        config.hidden_dims = "32,32";
        config.seed = 5;
        auto bundle = build_models(config);
        const EnvSpec spec = config.env_spec();

        auto t0 = Clock::now();
        const auto serial = collect_tracks(spec, &bundle->flow, SelectMode::sample, 1.0, 16,
                                           400, RngStream(6, "bench"), ExecMode::serial);
        const double serial_ms = ms_since(t0);

        t0 = Clock::now();
        const auto parallel = collect_tracks(spec, &bundle->flow, SelectMode::sample, 1.0, 16,
                                             400, RngStream(6, "bench"), ExecMode::parallel);
        const double parallel_ms = ms_since(t0);
        bool ok = serial.size() == parallel.size();
        for (size_t i = 0; ok && i < serial.size(); ++i) {
            ok = serial[i].positions == parallel[i].positions &&
                 serial[i].terminal_reward == parallel[i].terminal_reward;
        }
        mismatches += !ok;
        report("evaluation rollouts", serial_ms, parallel_ms, ok);

        t0 = Clock::now();
        const auto dserial = count_distinct(serial, 0.1, 0.0, ExecMode::serial);
        const double dserial_ms = ms_since(t0);

        t0 = Clock::now();
        const auto dparallel = count_distinct(serial, 0.1, 0.0, ExecMode::parallel);
        const double dparallel_ms = ms_since(t0);
        const bool dok = dserial.n_distinct == dparallel.n_distinct &&
                         dserial.nearest_mean == dparallel.nearest_mean;
        mismatches += !dok;
        report("diversity dedup", dserial_ms, dparallel_ms, dok);
    }

    return mismatches == 0 ? 0 : 1;
}
