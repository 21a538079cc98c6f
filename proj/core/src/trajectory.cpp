#include "resopt/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "resopt/errors.hpp"
#include "resopt/util.hpp"

namespace resopt {

void ConstraintSpec::validate() const {
    if (!(p_min < p_max)) throw ConfigError("constraint spec: p_min must be < p_max");
    if (!(dp_max > 0.0)) throw ConfigError("constraint spec: dp_max must be > 0");
    if (!std::isfinite(p_min) || !std::isfinite(p_max) || !std::isfinite(dp_max))
        throw ConfigError("constraint spec: non-finite bound");
}

void ControlTrajectory::validate_shape() const {
    if (values.empty()) throw ArgumentError("trajectory: empty");
    if (values.size() != step_end_times.size())
        throw ArgumentError("trajectory: values and step_end_times lengths differ");
    double prev = 0.0;
    for (std::size_t t = 0; t < step_end_times.size(); ++t) {
        if (!std::isfinite(step_end_times[t]) || step_end_times[t] <= prev)
            throw ArgumentError("trajectory: step_end_times must be finite, positive, strictly increasing");
        prev = step_end_times[t];
        if (!std::isfinite(values[t])) throw ArgumentError("trajectory: non-finite BHP value");
    }
}

std::vector<double> geometric_time_grid(int steps, double total_days, double ratio) {
    if (steps < 1) throw ArgumentError("time grid: steps must be >= 1");
    if (total_days <= 0.0) throw ArgumentError("time grid: total_days must be > 0");
    if (ratio <= 0.0) throw ArgumentError("time grid: ratio must be > 0");

    // First length from the geometric-sum identity; lengths then grow by `ratio`.
    double first;
    if (std::abs(ratio - 1.0) < 1e-12) {
        first = total_days / steps;
    } else {
        first = total_days * (ratio - 1.0) / (std::pow(ratio, steps) - 1.0);
    }
    std::vector<double> ends(steps);
    double t = 0.0, len = first;
    for (int i = 0; i < steps; ++i) {
        t += len;
        ends[i] = t;
        len *= ratio;
    }
    ends.back() = total_days; // absorb rounding
    return ends;
}

ControlTrajectory constant_trajectory(double bhp_pa, const std::vector<double>& step_end_times) {
    ControlTrajectory traj;
    traj.values.assign(step_end_times.size(), bhp_pa);
    traj.step_end_times = step_end_times;
    return traj;
}

double feasibility_violation(std::span<const double> values, const ConstraintSpec& spec) {
    double worst = 0.0;
    for (std::size_t t = 0; t < values.size(); ++t) {
        worst = std::max(worst, spec.p_min - values[t]);
        worst = std::max(worst, values[t] - spec.p_max);
        if (t >= 1) {
            const double d = values[t] - values[t - 1];
            worst = std::max(worst, std::abs(d) - spec.dp_max);
            if (spec.monotone) worst = std::max(worst, d);
        }
    }
    return worst;
}

void write_trajectory_csv(const std::string& path, const ControlTrajectory& traj) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    out << "step,end_time_days,bhp_pa\n";
    for (std::size_t t = 0; t < traj.size(); ++t)
        out << (t + 1) << ',' << fmt_g17(traj.step_end_times[t]) << ',' << fmt_g17(traj.values[t])
            << '\n';
}

ControlTrajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trajectory file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("step,end_time_days,bhp_pa", 0) != 0)
        throw ParseError(path + ": expected header 'step,end_time_days,bhp_pa'");
    ControlTrajectory traj;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string step_s, time_s, bhp_s;
        if (!std::getline(ss, step_s, ',') || !std::getline(ss, time_s, ',') ||
            !std::getline(ss, bhp_s, ','))
            throw ParseError(path + ": line " + std::to_string(lineno) + ": expected 3 columns");
        try {
            traj.step_end_times.push_back(std::stod(time_s));
            traj.values.push_back(std::stod(bhp_s));
        } catch (const std::exception&) {
            throw ParseError(path + ": line " + std::to_string(lineno) + ": bad number");
        }
    }
    traj.validate_shape();
    return traj;
}

} // namespace resopt
