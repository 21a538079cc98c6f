#pragma once

#include <vector>

#include "resopt/trajectory.hpp"

namespace resopt {

// L2 projection onto the non-increasing cone (pool-adjacent-violators).
std::vector<double> nonincreasing_projection(std::vector<double> v);

// Euclidean projection onto the feasible polytope
//   { p_min <= v_t <= p_max } ∩ { |v_t - v_{t-1}| <= dp_max } ∩ (optional) { v_t <= v_{t-1} }
// via Dykstra's alternating projections over the individual sets (box clip,
// pairwise step-band clip, isotonic cone), followed by an exact feasibility
// finisher so the output satisfies the constraints to strict tolerance.
// Feasible inputs are returned unchanged. Throws ArgumentError on non-finite input.
std::vector<double> project_feasible(std::vector<double> values, const ConstraintSpec& spec);

} // namespace resopt
