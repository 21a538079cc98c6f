#pragma once

#include <span>
#include <string>
#include <vector>

namespace resopt {

// Operational constraints on a BHP control trajectory: box bounds, a limit on
// the step-to-step change, and an optional non-increasing requirement.
struct ConstraintSpec {
    double p_min = 10.0e6;  // Pa
    double p_max = 38.0e6;  // Pa
    double dp_max = 3.0e6;  // Pa, max |p_t - p_{t-1}|
    bool monotone = false;  // if set, p_t <= p_{t-1}

    double range() const { return p_max - p_min; }
    void validate() const; // throws ConfigError
};

// The optimization variable u: one bottomhole pressure per control step, on a
// non-uniform control-time grid.
struct ControlTrajectory {
    std::vector<double> values;         // Pa, length T
    std::vector<double> step_end_times; // days, strictly increasing, length T

    std::size_t size() const { return values.size(); }
    void validate_shape() const; // lengths match, times increasing, values finite
};

// Control-step end times (days): T steps whose lengths grow geometrically, so
// early production transients get finer resolution. The first length is derived
// from (total, ratio).
std::vector<double> geometric_time_grid(int steps = 20, double total_days = 3600.0,
                                        double ratio = 1.25);

ControlTrajectory constant_trajectory(double bhp_pa, const std::vector<double>& step_end_times);

// Largest constraint violation in Pa (0 when feasible).
double feasibility_violation(std::span<const double> values, const ConstraintSpec& spec);

inline bool is_feasible(std::span<const double> values, const ConstraintSpec& spec,
                        double tol_pa = 1e-9) {
    return feasibility_violation(values, spec) <= tol_pa;
}

// CSV persistence; columns: step,end_time_days,bhp_pa
void write_trajectory_csv(const std::string& path, const ControlTrajectory& traj);
ControlTrajectory read_trajectory_csv(const std::string& path);

} // namespace resopt
