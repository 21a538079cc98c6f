#include "resopt/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "resopt/errors.hpp"
#include "resopt/projection.hpp"
#include "resopt/rng.hpp"
#include "resopt/util.hpp"
#include "resopt/version.hpp"

namespace resopt {

namespace {

constexpr std::uint64_t kCombinedClassStream = 0x636f6d62u; // class-choice stream salt

ControlTrajectory with_times(std::vector<double> values, const std::vector<double>& times) {
    ControlTrajectory traj;
    traj.values = std::move(values);
    traj.step_end_times = times;
    return traj;
}

std::size_t steps_of(const std::vector<double>& times) {
    if (times.empty()) throw ArgumentError("generator: empty control-time grid");
    return times.size();
}

} // namespace

namespace sampling_detail {

std::vector<double> linear_ramp(double p_start, double p_end, std::size_t steps) {
    std::vector<double> v(steps, p_start);
    if (steps > 1) {
        const double slope = (p_end - p_start) / static_cast<double>(steps - 1);
        for (std::size_t t = 0; t < steps; ++t) v[t] = p_start + slope * static_cast<double>(t);
    }
    return v;
}

ControlTrajectory combined_decline_hold_decline(const ConstraintSpec& spec,
                                                const std::vector<double>& step_end_times,
                                                std::uint64_t rng_seed) {
    spec.validate();
    const std::size_t T = steps_of(step_end_times);
    Rng rng(rng_seed);
    const int last = static_cast<int>(T) - 1;
    const int b1 = std::min(last, rng.uniform_int(1, std::max(1, last / 3)));
    const int b2 = std::min(last, rng.uniform_int(b1, std::max(b1, 2 * last / 3)));
    const double p_start = rng.uniform(spec.p_min, spec.p_max);
    const double slope1 = rng.uniform(0.0, spec.dp_max);
    const double slope2 = rng.uniform(0.0, spec.dp_max);

    std::vector<double> v(T, p_start);
    for (std::size_t t = 1; t < T; ++t) {
        const int i = static_cast<int>(t);
        double drop = 0.0;
        if (i <= b1)
            drop = slope1;
        else if (i > b2)
            drop = slope2;
        v[t] = std::max(spec.p_min, v[t - 1] - drop);
    }
    return with_times(std::move(v), step_end_times);
}

} // namespace sampling_detail

std::string strategy_name(SamplingStrategy s) {
    switch (s) {
        case SamplingStrategy::LinearDeclineNoise: return "linear-noise";
        case SamplingStrategy::MovingUniform: return "moving-uniform";
        case SamplingStrategy::VariableDeclineNoise: return "variable-noise";
        case SamplingStrategy::LinearDecline: return "linear";
        case SamplingStrategy::ConstantOrDecline: return "constant-or-decline";
        case SamplingStrategy::Combined: return "combined";
    }
    return "unknown";
}

SamplingStrategy parse_strategy(const std::string& name) {
    for (SamplingStrategy s :
         {SamplingStrategy::LinearDeclineNoise, SamplingStrategy::MovingUniform,
          SamplingStrategy::VariableDeclineNoise, SamplingStrategy::LinearDecline,
          SamplingStrategy::ConstantOrDecline, SamplingStrategy::Combined}) {
        if (strategy_name(s) == name) return s;
    }
    throw ConfigError("unknown sampling strategy '" + name +
                      "' (expected linear-noise, moving-uniform, variable-noise, linear, "
                      "constant-or-decline, or combined)");
}

ControlTrajectory gen_linear_decline_noise(const ConstraintSpec& spec,
                                           const std::vector<double>& step_end_times,
                                           double noise_sd_pa, std::uint64_t rng_seed) {
    spec.validate();
    if (noise_sd_pa < 0.0) throw ArgumentError("gen_linear_decline_noise: noise_sd must be >= 0");
    const std::size_t T = steps_of(step_end_times);
    Rng rng(rng_seed);
    const double p_start = rng.uniform(spec.p_min, spec.p_max);
    const double p_end = rng.uniform(spec.p_min, p_start);
    std::vector<double> v = sampling_detail::linear_ramp(p_start, p_end, T);
    if (noise_sd_pa > 0.0)
        for (auto& x : v) x += rng.normal(0.0, noise_sd_pa);
    return with_times(project_feasible(std::move(v), spec), step_end_times);
}

ControlTrajectory gen_moving_uniform(const ConstraintSpec& spec,
                                     const std::vector<double>& step_end_times, double window_pa,
                                     std::uint64_t rng_seed) {
    spec.validate();
    if (!(window_pa > 0.0)) throw ArgumentError("gen_moving_uniform: window must be > 0");
    const std::size_t T = steps_of(step_end_times);
    Rng rng(rng_seed);
    const double w = std::min(window_pa, spec.dp_max);
    std::vector<double> v(T);
    v[0] = rng.uniform(spec.p_min, spec.p_max);
    for (std::size_t t = 1; t < T; ++t) {
        const double lo = std::max(spec.p_min, v[t - 1] - w);
        const double hi = spec.monotone ? v[t - 1] : std::min(spec.p_max, v[t - 1] + w);
        v[t] = rng.uniform(lo, hi);
    }
    return with_times(std::move(v), step_end_times);
}

ControlTrajectory gen_variable_decline_noise(const ConstraintSpec& spec,
                                             const std::vector<double>& step_end_times,
                                             std::uint64_t rng_seed, double noise_sd_pa) {
    spec.validate();
    const std::size_t T = steps_of(step_end_times);
    if (noise_sd_pa < 0.0) noise_sd_pa = 0.02 * spec.range();
    Rng rng(rng_seed);

    // Breakpoint away from the ends when the horizon allows it.
    const int last = static_cast<int>(T) - 1;
    const int b_lo = std::min(last, 3);
    const int b_hi = std::max(b_lo, last - 3);
    const int b = rng.uniform_int(b_lo, b_hi);

    const double p_start = rng.uniform(spec.p_min, spec.p_max);
    const double p_mid = rng.uniform(spec.p_min, p_start);
    const double p_end = rng.uniform(spec.p_min, p_mid);

    std::vector<double> v(T, p_start);
    for (std::size_t t = 0; t < T; ++t) {
        const int i = static_cast<int>(t);
        if (i <= b)
            v[t] = b > 0 ? p_start + (p_mid - p_start) * i / static_cast<double>(b) : p_mid;
        else
            v[t] = p_mid + (p_end - p_mid) * (i - b) / static_cast<double>(last - b);
    }
    if (noise_sd_pa > 0.0)
        for (auto& x : v) x += rng.normal(0.0, noise_sd_pa);
    return with_times(project_feasible(std::move(v), spec), step_end_times);
}

ControlTrajectory gen_linear_decline(const ConstraintSpec& spec,
                                     const std::vector<double>& step_end_times,
                                     std::uint64_t rng_seed) {
    spec.validate();
    const std::size_t T = steps_of(step_end_times);
    Rng rng(rng_seed);
    const double p_start = rng.uniform(spec.p_min, spec.p_max);
    // End drawn so the per-step drop stays within dp_max: feasible by construction.
    const double reachable =
        T > 1 ? std::max(spec.p_min, p_start - spec.dp_max * static_cast<double>(T - 1))
              : p_start;
    const double p_end = rng.uniform(reachable, p_start);
    return with_times(sampling_detail::linear_ramp(p_start, p_end, T), step_end_times);
}

ControlTrajectory gen_constant_or_decline(const ConstraintSpec& spec,
                                          const std::vector<double>& step_end_times,
                                          std::uint64_t rng_seed, const GeneratorParams& params) {
    spec.validate();
    const std::size_t T = steps_of(step_end_times);
    Rng rng(rng_seed);

    const int max_seg = std::max(1, std::min(params.max_segments, static_cast<int>(T)));
    const int min_seg = std::max(1, std::min(params.min_segments, max_seg));
    const int n_seg = rng.uniform_int(min_seg, max_seg);

    // Segment boundaries: sorted distinct interior cut points. n_seg <= T, so
    // enough distinct points always exist.
    std::vector<int> cuts;
    while (static_cast<int>(cuts.size()) < n_seg - 1) {
        const int c = rng.uniform_int(1, static_cast<int>(T) - 1);
        if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(static_cast<int>(T));

    std::vector<double> v(T);
    v[0] = rng.uniform(spec.p_min, spec.p_max);
    std::size_t t = 1;
    for (std::size_t seg = 0; seg < cuts.size(); ++seg) {
        const bool declining = rng.uniform01() < 0.5;
        const double rate = declining ? rng.uniform(0.0, spec.dp_max) : 0.0;
        for (; t < static_cast<std::size_t>(cuts[seg]); ++t)
            v[t] = std::max(spec.p_min, v[t - 1] - rate);
    }
    for (; t < T; ++t) v[t] = v[t - 1];
    return with_times(std::move(v), step_end_times);
}

ControlTrajectory gen_combined(const ConstraintSpec& spec,
                               const std::vector<double>& step_end_times, std::uint64_t rng_seed,
                               const std::array<double, 3>& class_probs) {
    spec.validate();
    double total = class_probs[0] + class_probs[1] + class_probs[2];
    if (!(total > 0.0)) throw ArgumentError("gen_combined: class probabilities must sum to > 0");

    // Class choice uses its own stream so a degenerate mixture reproduces the
    // underlying generator exactly under the same seed.
    Rng class_rng(Rng::derive(rng_seed, kCombinedClassStream));
    const double r = class_rng.uniform01() * total;
    if (r < class_probs[0]) return gen_linear_decline(spec, step_end_times, rng_seed);
    if (r < class_probs[0] + class_probs[1])
        return gen_constant_or_decline(spec, step_end_times, rng_seed);
    return sampling_detail::combined_decline_hold_decline(spec, step_end_times, rng_seed);
}

std::pair<ControlTrajectory, std::string> draw_trajectory(SamplingStrategy strategy,
                                                          const ConstraintSpec& spec,
                                                          const std::vector<double>& step_end_times,
                                                          std::uint64_t sample_seed,
                                                          const GeneratorParams& params) {
    const double noise_sd = params.noise_sd_frac * spec.range();
    const double window = params.moving_window_frac * spec.range();
    switch (strategy) {
        case SamplingStrategy::LinearDeclineNoise:
            return {gen_linear_decline_noise(spec, step_end_times, noise_sd, sample_seed),
                    "linear-noise"};
        case SamplingStrategy::MovingUniform:
            return {gen_moving_uniform(spec, step_end_times, window, sample_seed), "moving-uniform"};
        case SamplingStrategy::VariableDeclineNoise:
            return {gen_variable_decline_noise(spec, step_end_times, sample_seed, noise_sd),
                    "variable-noise"};
        case SamplingStrategy::LinearDecline:
            return {gen_linear_decline(spec, step_end_times, sample_seed), "linear"};
        case SamplingStrategy::ConstantOrDecline:
            return {gen_constant_or_decline(spec, step_end_times, sample_seed, params),
                    "constant-or-decline"};
        case SamplingStrategy::Combined: {
            // Single draws use the probabilistic mixture; dataset generation
            // stratifies classes instead (see build_dataset).
            ControlTrajectory traj = gen_combined(spec, step_end_times, sample_seed,
                                                  params.combined_probs);
            return {std::move(traj), "combined"};
        }
    }
    throw ArgumentError("draw_trajectory: unknown strategy");
}

Dataset build_dataset(const ModelConfig& config, SamplingStrategy strategy, int n,
                      std::uint64_t seed, const ConstraintSpec& spec,
                      const std::vector<double>& step_end_times, int threads,
                      const GeneratorParams& params) {
    if (n < 1) throw ArgumentError("build_dataset: N must be >= 1");
    spec.validate();
    const ReservoirModel model = build_model(config);

    // Stratified combined mixing: floor(N/3) per class, remainder to the
    // decline-hold-decline class, so class coverage is deterministic.
    const int per_class = n / 3;

    Dataset ds;
    ds.samples.resize(n);
    ds.constraint_spec = spec;
    ds.model_fingerprint = config.fingerprint();
    ds.strategy = strategy_name(strategy);
    ds.seed = seed;
    ds.step_end_times = step_end_times;

    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        const std::uint64_t sample_seed = Rng::derive(seed, i);
        ControlTrajectory traj;
        std::string tag;
        if (strategy == SamplingStrategy::Combined) {
            const int idx = static_cast<int>(i);
            if (idx < per_class) {
                traj = gen_linear_decline(spec, step_end_times, sample_seed);
                tag = "combined/linear";
            } else if (idx < 2 * per_class) {
                traj = gen_constant_or_decline(spec, step_end_times, sample_seed, params);
                tag = "combined/constant-or-decline";
            } else {
                traj = sampling_detail::combined_decline_hold_decline(spec, step_end_times,
                                                                      sample_seed);
                tag = "combined/decline-hold-decline";
            }
        } else {
            std::tie(traj, tag) = draw_trajectory(strategy, spec, step_end_times, sample_seed,
                                                  params);
        }

        double J = 0.0;
        try {
            J = simulate(model, traj, config.substeps_per_control)
                    .cumulative_per_control_step.back();
        } catch (const CouplingError& e) {
            throw CouplingError("build_dataset: sample " + std::to_string(i) + ": " + e.what(),
                                e.last_change_pa());
        } catch (const NumericError& e) {
            throw NumericError("build_dataset: sample " + std::to_string(i) + ": " + e.what(),
                               e.residual());
        }
        if (!(J >= 0.0))
            throw NumericError("build_dataset: sample " + std::to_string(i) +
                                   ": negative production label",
                               J);
        ds.samples[i] = Dataset::Sample{std::move(traj), J, std::move(tag)};
    });
    return ds;
}

void write_dataset_csv(const std::string& path, const Dataset& dataset) {
    if (dataset.samples.empty()) throw ArgumentError("write_dataset_csv: empty dataset");
    const std::size_t T = dataset.step_end_times.size();
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    out << "tag";
    for (std::size_t t = 1; t <= T; ++t) out << ",p_" << t;
    out << ",J_m3\n";
    for (const auto& s : dataset.samples) {
        out << s.tag;
        for (double v : s.trajectory.values) out << ',' << fmt_g17(v);
        out << ',' << fmt_g17(s.J) << '\n';
    }

    std::ofstream meta(path + ".meta");
    if (!meta) throw ArgumentError("cannot open for writing: " + path + ".meta");
    meta << kDatasetMetaSchema << '\n';
    meta << "strategy " << dataset.strategy << '\n';
    meta << "n " << dataset.samples.size() << '\n';
    meta << "seed " << dataset.seed << '\n';
    meta << "t " << T << '\n';
    meta << "p_min " << fmt_g17(dataset.constraint_spec.p_min) << '\n';
    meta << "p_max " << fmt_g17(dataset.constraint_spec.p_max) << '\n';
    meta << "dp_max " << fmt_g17(dataset.constraint_spec.dp_max) << '\n';
    meta << "monotone " << (dataset.constraint_spec.monotone ? 1 : 0) << '\n';
    meta << "model_fingerprint " << dataset.model_fingerprint << '\n';
    meta << "step_end_times";
    for (double t : dataset.step_end_times) meta << ' ' << fmt_g17(t);
    meta << '\n';
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream meta(path + ".meta");
    if (!meta) throw ParseError("missing dataset sidecar: " + path + ".meta");
    Dataset ds;
    std::string line;
    if (!std::getline(meta, line) || line != kDatasetMetaSchema)
        throw ParseError(path + ".meta: expected header '" + std::string(kDatasetMetaSchema) + "'");
    std::size_t expected_t = 0, expected_n = 0;
    while (std::getline(meta, line)) {
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        if (key == "strategy") {
            ss >> ds.strategy;
        } else if (key == "n") {
            ss >> expected_n;
        } else if (key == "seed") {
            ss >> ds.seed;
        } else if (key == "t") {
            ss >> expected_t;
        } else if (key == "p_min") {
            ss >> ds.constraint_spec.p_min;
        } else if (key == "p_max") {
            ss >> ds.constraint_spec.p_max;
        } else if (key == "dp_max") {
            ss >> ds.constraint_spec.dp_max;
        } else if (key == "monotone") {
            int m = 0;
            ss >> m;
            ds.constraint_spec.monotone = m != 0;
        } else if (key == "model_fingerprint") {
            ss >> ds.model_fingerprint;
        } else if (key == "step_end_times") {
            double v;
            while (ss >> v) ds.step_end_times.push_back(v);
        } else {
            throw ParseError(path + ".meta: unknown key '" + key + "'");
        }
    }
    if (ds.step_end_times.size() != expected_t)
        throw ParseError(path + ".meta: step_end_times length does not match t");

    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset: " + path);
    if (!std::getline(in, line) || line.rfind("tag,p_1", 0) != 0)
        throw ParseError(path + ": expected dataset header 'tag,p_1,...,J_m3'");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        Dataset::Sample s;
        if (!std::getline(ss, s.tag, ','))
            throw ParseError(path + ": line " + std::to_string(lineno) + ": missing tag");
        std::vector<double> nums;
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                nums.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw ParseError(path + ": line " + std::to_string(lineno) + ": bad number '" +
                                 tok + "'");
            }
        }
        if (nums.size() != expected_t + 1)
            throw ParseError(path + ": line " + std::to_string(lineno) + ": expected " +
                             std::to_string(expected_t + 1) + " numeric columns, got " +
                             std::to_string(nums.size()));
        s.J = nums.back();
        nums.pop_back();
        s.trajectory.values = std::move(nums);
        s.trajectory.step_end_times = ds.step_end_times;
        ds.samples.push_back(std::move(s));
    }
    if (expected_n != 0 && ds.samples.size() != expected_n)
        throw ParseError(path + ": sample count does not match sidecar n");
    return ds;
}

} // namespace resopt
