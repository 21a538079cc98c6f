#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "resopt/trajectory.hpp"

namespace resopt {

enum class Region : std::uint8_t { Matrix = 0, ProppedFracture = 1, UnproppedFracture = 2 };

const char* region_name(Region r);

// Uniform 2D areal grid; cells ordered by index = ix*ny + iy.
struct Grid {
    int nx = 41;
    int ny = 21;
    double dx = 10.0;        // m
    double dy = 10.0;        // m
    double thickness = 10.0; // m

    int cell_count() const { return nx * ny; }
    int index(int ix, int iy) const { return ix * ny + iy; }
    double cell_volume() const { return dx * dy * thickness; }
};

// Per-region rock properties.
struct RegionProps {
    double k0 = 1e-18;   // initial permeability (m^2)
    double alpha = 0.0;  // stress-sensitivity coefficient (1/Pa)
    double phi = 0.08;   // porosity (-)
};

struct FluidProps {
    double mu = 1.0e-3;     // viscosity (Pa*s)
    double ct = 1.0e-9;     // total compressibility (1/Pa)
    double rho_ref = 800.0; // reference density (kg/m^3)
};

struct GeomechParams {
    double biot_b = 0.8;
    double poisson_nu = 0.25;
    double youngs_E = 20.0e9; // Pa; carried but unused by the uniaxial closure

    // Uniaxial effective-stress coefficient b*(1-2nu)/(1-nu); always derived
    // from the current biot_b / poisson_nu, never stored.
    double eta() const { return biot_b * (1.0 - 2.0 * poisson_nu) / (1.0 - poisson_nu); }
};

struct WellSpec {
    int cell_index = -1;
    double well_index_WI = 20.0;         // geometric coupling factor in q = WI*(k/mu)*(p - bhp)
    bool rate_clamp_nonnegative = true;  // production only: q clamped to >= 0
};

// Full key-value model configuration. All keys are documented in the README;
// unknown keys in a config file are rejected.
struct ModelConfig {
    int nx = 41, ny = 21;
    double dx_m = 10.0, dy_m = 10.0, thickness_m = 10.0;

    double p_init_pa = 40.0e6;
    double p_floor_pa = 1.0e6;    // absolute floor for any pressure/BHP
    double p_ceiling_pa = 100.0e6;

    double phi_matrix = 0.08, phi_propped = 0.30, phi_unpropped = 0.30;
    double k0_matrix_m2 = 1e-18, k0_propped_m2 = 1e-13, k0_unpropped_m2 = 1e-15;
    double alpha_matrix_painv = 5e-8, alpha_propped_painv = 1e-7, alpha_unpropped_painv = 2e-7;

    double mu_pas = 1.0e-3;
    double ct_painv = 1.0e-9;
    double rho_ref_kgm3 = 800.0;

    double biot_b = 0.8, poisson_nu = 0.25, youngs_e_pa = 20.0e9;

    int frac_col = -1;    // fracture column; -1 means nx/2
    int halo_width = 1;   // unpropped columns on each side of the fracture
    int well_ix = -1;     // -1 means frac_col
    int well_iy = -1;     // -1 means ny/2
    double well_index_m = 20.0;
    bool rate_clamp = true;

    double coupling_tol_pa = 100.0;
    int coupling_max_iter = 50;
    int substeps_per_control = 5;
    double lin_solver_tol = 1e-10;

    void validate() const;                      // throws ConfigError naming the offending key
    std::string canonical_text() const;         // stable key-sorted serialization
    std::string fingerprint() const;            // hex FNV-1a of canonical_text()
    static ModelConfig from_file(const std::string& path);
    void save(const std::string& path) const;
};

struct ReservoirState {
    std::vector<double> pressure;     // Pa, per cell
    std::vector<double> dsigma_eff;   // Pa, per cell effective-stress change
    std::vector<double> k_current;    // m^2, per cell
    double time_s = 0.0;
    double cumulative_oil_m3 = 0.0;
};

struct ReservoirModel {
    Grid grid;
    std::vector<Region> region_of_cell;
    RegionProps matrix, propped, unpropped;
    FluidProps fluid;
    GeomechParams geomech;
    WellSpec well;
    double p_init = 40.0e6;
    double p_floor = 1.0e6;
    double p_ceiling = 100.0e6;
    double coupling_tol = 100.0;
    int coupling_max_iter = 50;
    int substeps_per_control = 5;
    double lin_solver_tol = 1e-10;
    std::string config_fingerprint;

    // Per-cell property arrays derived from the region map.
    std::vector<double> k0_cell, alpha_cell, phi_cell;

    const RegionProps& props(Region r) const;
    ReservoirState initial_state() const;
};

struct SimulationResult {
    std::vector<double> cumulative_per_control_step; // m^3, at each control-step end
    std::vector<double> rate_series;                 // m^3/s, one per substep
    ReservoirState final_state;
    double mass_balance_error = 0.0;                 // relative
    std::vector<int> coupling_iterations;            // one per substep
};

ReservoirModel build_model(const ModelConfig& config);

// k = k0 * exp(-alpha * dsigma_eff)
double update_permeability(double k0, double alpha, double dsigma_eff);

// Local uniaxial-strain closure: dsigma_eff = eta * (p_init - p), per cell.
std::vector<double> effective_stress_update(std::span<const double> pressure, double p_init,
                                            double eta);

// One implicit (backward-Euler) finite-volume pressure step at fixed permeability.
// Returns the advanced state and the step production q*dt (end-of-step rate).
std::pair<ReservoirState, double> step_flow(const ReservoirState& state, double dt_s, double bhp_pa,
                                            std::span<const double> k_field,
                                            const ReservoirModel& model);

struct CoupledStepResult {
    ReservoirState state;
    double production_m3 = 0.0;
    int iterations = 0;
    double last_change_pa = 0.0; // max per-cell pressure change at convergence
};

// Sequential iterative coupling: flow solve, stress update, permeability update,
// repeated from the same start-of-step state until the pressure iterates settle.
CoupledStepResult coupled_step(const ReservoirState& state, double dt_s, double bhp_pa,
                               const ReservoirModel& model, double tol_pa, int max_iter);

// Advances the coupled model through every control interval (BHP held constant
// within an interval, each split into substeps). Deterministic.
SimulationResult simulate(const ReservoirModel& model, const ControlTrajectory& trajectory,
                          int substeps_per_control);

// CSV export; columns: step,time_days,bhp_pa,step_oil_m3,cum_oil_m3,coupling_iters
void write_simulation_csv(const std::string& path, const SimulationResult& result,
                          const ControlTrajectory& trajectory);

// Stress-sensitivity scenario presets: matrix alpha = base, propped = 2x, unpropped = 4x.
struct StressScenario {
    std::string name;
    double alpha_base; // 1/Pa
};
std::vector<StressScenario> default_scenarios(); // flow-only, low, medium, high
ModelConfig apply_scenario(ModelConfig config, double alpha_base);

struct BaselineTable {
    std::vector<std::string> scenario;            // row names
    std::vector<double> time_days;                // control-step end times
    std::vector<std::vector<double>> cumulative;  // [scenario][step], m^3
    void write_csv(const std::string& path) const;
};

BaselineTable baseline_study(const std::vector<std::pair<std::string, ModelConfig>>& presets,
                             const ControlTrajectory& trajectory);

} // namespace resopt
