#pragma once

#include <vector>

#include "resopt/trajectory.hpp"

namespace resopt::testsupport {

// Brute-force Euclidean projection onto the trajectory polytope by solving the
// QP  min 1/2 ||v - x||^2  s.t.  box / step-band / optional monotone cone
// with a primal log-barrier interior-point method (dense Newton steps).
// Independent of the production Dykstra path.
std::vector<double> qp_project(const std::vector<double>& x, const ConstraintSpec& spec);

} // namespace resopt::testsupport
