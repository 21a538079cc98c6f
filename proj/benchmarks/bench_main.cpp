#include <benchmark/benchmark.h>

#include "resopt/projection.hpp"
#include "resopt/reservoir.hpp"
#include "resopt/rng.hpp"
#include "resopt/sampling.hpp"
#include "resopt/surrogate.hpp"

using namespace resopt;

namespace {

const ConstraintSpec kSpec{};

ControlTrajectory default_ramp(const std::vector<double>& times) {
    ControlTrajectory traj;
    traj.step_end_times = times;
    for (std::size_t t = 0; t < times.size(); ++t)
        traj.values.push_back(std::max(kSpec.p_min, kSpec.p_max - kSpec.dp_max * double(t)));
    return traj;
}

SurrogateModel trained_proxy(const std::vector<double>& times) {
    ModelConfig cfg;
    cfg.nx = 11;
    cfg.ny = 5;
    cfg.substeps_per_control = 2;
    const Dataset ds = build_dataset(cfg, SamplingStrategy::Combined, 30, 1, kSpec, times, 2);
    TrainConfig tc;
    tc.rng_seed = 1;
    tc.max_epochs = 60;
    tc.hidden_dims = {16, 16};
    return train(ds, tc).first;
}

void BM_SimulateDefault(benchmark::State& state) {
    const ModelConfig cfg;
    const ReservoirModel model = build_model(cfg);
    const auto times = geometric_time_grid();
    const ControlTrajectory traj = default_ramp(times);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            simulate(model, traj, cfg.substeps_per_control).cumulative_per_control_step.back());
}
BENCHMARK(BM_SimulateDefault)->Unit(benchmark::kMillisecond);

void BM_CoupledStep(benchmark::State& state) {
    const ModelConfig cfg;
    const ReservoirModel model = build_model(cfg);
    const ReservoirState s0 = model.initial_state();
    for (auto _ : state)
        benchmark::DoNotOptimize(
            coupled_step(s0, 86400.0, 15e6, model, model.coupling_tol, model.coupling_max_iter)
                .production_m3);
}
BENCHMARK(BM_CoupledStep)->Unit(benchmark::kMicrosecond);

void BM_SurrogateForward(benchmark::State& state) {
    const auto times = geometric_time_grid();
    const SurrogateModel proxy = trained_proxy(times);
    const ControlTrajectory traj = default_ramp(times);
    for (auto _ : state) benchmark::DoNotOptimize(forward(proxy, traj.values));
}
BENCHMARK(BM_SurrogateForward)->Unit(benchmark::kMicrosecond);

void BM_SurrogateInputGradient(benchmark::State& state) {
    const auto times = geometric_time_grid();
    const SurrogateModel proxy = trained_proxy(times);
    const ControlTrajectory traj = default_ramp(times);
    for (auto _ : state) benchmark::DoNotOptimize(input_gradient(proxy, traj.values));
}
BENCHMARK(BM_SurrogateInputGradient)->Unit(benchmark::kMicrosecond);

void BM_ProjectFeasible(benchmark::State& state) {
    Rng rng(3);
    std::vector<std::vector<double>> inputs;
    for (int i = 0; i < 64; ++i) {
        std::vector<double> x(20);
        for (auto& v : x) v = rng.uniform(5e6, 45e6);
        inputs.push_back(std::move(x));
    }
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(project_feasible(inputs[i % inputs.size()], kSpec));
        ++i;
    }
}
BENCHMARK(BM_ProjectFeasible)->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();
