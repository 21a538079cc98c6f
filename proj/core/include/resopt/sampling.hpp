#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "resopt/reservoir.hpp"
#include "resopt/trajectory.hpp"

namespace resopt {

enum class SamplingStrategy {
    LinearDeclineNoise,   // linear decline plus Gaussian noise, projected to feasibility
    MovingUniform,        // random walk, uniform in a moving window
    VariableDeclineNoise, // two-slope decline with a random breakpoint, plus noise
    LinearDecline,        // smooth random linear ramps
    ConstantOrDecline,    // piecewise constant-or-declining segments, non-increasing
    Combined              // mixture of linear-decline / constant-or-decline / decline-hold-decline
};

std::string strategy_name(SamplingStrategy s);
SamplingStrategy parse_strategy(const std::string& name); // throws ConfigError

struct GeneratorParams {
    double noise_sd_frac = 0.02;       // noise sd as a fraction of (p_max - p_min)
    double moving_window_frac = 0.10;  // moving-uniform window as a fraction of the range
    int min_segments = 2, max_segments = 4;             // constant-or-decline
    std::array<double, 3> combined_probs = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
};

ControlTrajectory gen_linear_decline_noise(const ConstraintSpec& spec,
                                           const std::vector<double>& step_end_times,
                                           double noise_sd_pa, std::uint64_t rng_seed);
ControlTrajectory gen_moving_uniform(const ConstraintSpec& spec,
                                     const std::vector<double>& step_end_times, double window_pa,
                                     std::uint64_t rng_seed);
ControlTrajectory gen_variable_decline_noise(const ConstraintSpec& spec,
                                             const std::vector<double>& step_end_times,
                                             std::uint64_t rng_seed, double noise_sd_pa = -1.0);
ControlTrajectory gen_linear_decline(const ConstraintSpec& spec,
                                     const std::vector<double>& step_end_times,
                                     std::uint64_t rng_seed);
ControlTrajectory gen_constant_or_decline(const ConstraintSpec& spec,
                                          const std::vector<double>& step_end_times,
                                          std::uint64_t rng_seed,
                                          const GeneratorParams& params = {});
ControlTrajectory gen_combined(const ConstraintSpec& spec,
                               const std::vector<double>& step_end_times, std::uint64_t rng_seed,
                               const std::array<double, 3>& class_probs = {1.0 / 3.0, 1.0 / 3.0,
                                                                           1.0 / 3.0});

// Single-draw dispatch used by dataset generation; the returned tag names the
// concrete class that produced the trajectory.
std::pair<ControlTrajectory, std::string> draw_trajectory(SamplingStrategy strategy,
                                                          const ConstraintSpec& spec,
                                                          const std::vector<double>& step_end_times,
                                                          std::uint64_t sample_seed,
                                                          const GeneratorParams& params = {});

struct Dataset {
    struct Sample {
        ControlTrajectory trajectory;
        double J = 0.0; // m^3
        std::string tag;
    };
    std::vector<Sample> samples;
    ConstraintSpec constraint_spec;
    std::string model_fingerprint;
    std::string strategy;
    std::uint64_t seed = 0;
    std::vector<double> step_end_times; // shared control grid

    std::size_t size() const { return samples.size(); }
};

// Generates N feasible trajectories under the given strategy and labels each
// with a coupled simulation of the model built from `config`. Labeling is
// parallelizable; assembly order is by sample index, so results do not depend
// on the thread count. `Combined` is stratified: floor(N/3) per class, the
// remainder going to the decline-hold-decline class.
Dataset build_dataset(const ModelConfig& config, SamplingStrategy strategy, int n,
                      std::uint64_t seed, const ConstraintSpec& spec,
                      const std::vector<double>& step_end_times, int threads = 1,
                      const GeneratorParams& params = {});

// CSV persistence. Main file columns: tag,p_1..p_T,J_m3. A sidecar
// "<path>.meta" carries the constraint spec, seed, grid, and model fingerprint.
void write_dataset_csv(const std::string& path, const Dataset& dataset);
Dataset read_dataset_csv(const std::string& path);

namespace sampling_detail {
// Deterministic trajectory builders used by the generators; exposed for tests.
std::vector<double> linear_ramp(double p_start, double p_end, std::size_t steps);
ControlTrajectory combined_decline_hold_decline(const ConstraintSpec& spec,
                                                const std::vector<double>& step_end_times,
                                                std::uint64_t rng_seed);
} // namespace sampling_detail

} // namespace resopt
