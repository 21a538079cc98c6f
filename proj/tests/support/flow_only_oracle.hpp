#pragma once

#include <vector>

#include "resopt/reservoir.hpp"
#include "resopt/trajectory.hpp"

namespace resopt::testsupport {

// Independently coded flow-only simulator (fixed permeability k0, no coupling
// loop): sparse row assembly + Jacobi-preconditioned conjugate gradients,
// deliberately sharing no code with the production banded-Cholesky path.
// Returns cumulative production at each control-step end.
std::vector<double> flow_only_cumulative(const ReservoirModel& model,
                                         const ControlTrajectory& trajectory,
                                         int substeps_per_control);

} // namespace resopt::testsupport
