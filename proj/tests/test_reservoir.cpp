#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "resopt/errors.hpp"
#include "resopt/reservoir.hpp"
#include "resopt/rng.hpp"
#include "resopt/sampling.hpp"
#include "resopt/trajectory.hpp"

#include "support/flow_only_oracle.hpp"
#include "support/test_util.hpp"

using namespace resopt;
using namespace resopt::testsupport;

namespace {

ControlTrajectory aggressive_ramp(const std::vector<double>& times, double p_max, double p_min,
                                  double dp) {
    ControlTrajectory traj;
    traj.step_end_times = times;
    traj.values.resize(times.size());
    for (std::size_t t = 0; t < times.size(); ++t)
        traj.values[t] = std::max(p_min, p_max - dp * static_cast<double>(t));
    return traj;
}

double final_cum(const ReservoirModel& m, const ControlTrajectory& u, int substeps) {
    return simulate(m, u, substeps).cumulative_per_control_step.back();
}

} // namespace

TEST_CASE("geomech eta derived from biot and poisson") {
    GeomechParams g;
    g.biot_b = 0.8;
    g.poisson_nu = 0.25;
    CHECK(g.eta() == doctest::Approx(0.8 * 0.5 / 0.75).epsilon(1e-14));
    g.poisson_nu = 0.0;
    CHECK(g.eta() == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("build_model: minimal 1x1 grid") {
    ModelConfig cfg;
    cfg.nx = 1;
    cfg.ny = 1;
    const ReservoirModel m = build_model(cfg);
    CHECK(m.grid.cell_count() == 1);
    CHECK(m.region_of_cell[0] == Region::ProppedFracture);
    const ReservoirState s = m.initial_state();
    CHECK(s.pressure[0] == cfg.p_init_pa);
    CHECK(s.dsigma_eff[0] == 0.0);
    CHECK(s.k_current[0] == cfg.k0_propped_m2);
}

TEST_CASE("build_model: default region counts match direct enumeration of the rule") {
    ModelConfig cfg; // 41x21 defaults, fracture at nx/2, halo 1
    const ReservoirModel m = build_model(cfg);

    // Independent enumeration of the documented region rule.
    int propped = 0, unpropped = 0, matrix = 0;
    const int frac_col = cfg.nx / 2;
    for (int ix = 0; ix < cfg.nx; ++ix) {
        for (int iy = 0; iy < cfg.ny; ++iy) {
            const int dist = std::abs(ix - frac_col);
            if (dist == 0)
                ++propped;
            else if (dist <= 1)
                ++unpropped;
            else
                ++matrix;
            (void)iy;
        }
    }
    int got_propped = 0, got_unpropped = 0, got_matrix = 0;
    for (Region r : m.region_of_cell) {
        if (r == Region::ProppedFracture) ++got_propped;
        if (r == Region::UnproppedFracture) ++got_unpropped;
        if (r == Region::Matrix) ++got_matrix;
    }
    CHECK(got_propped == propped);
    CHECK(got_unpropped == unpropped);
    CHECK(got_matrix == matrix);
    CHECK(propped == cfg.ny);
    CHECK(unpropped == 2 * cfg.ny);
    CHECK(m.region_of_cell[m.well.cell_index] == Region::ProppedFracture);
}

TEST_CASE("build_model: configuration errors name the offending key") {
    ModelConfig cfg;
    cfg.nx = 0;
    CHECK_THROWS_WITH_AS(build_model(cfg), doctest::Contains("nx"), ConfigError);

    ModelConfig outside;
    outside.well_ix = 99;
    CHECK_THROWS_WITH_AS(build_model(outside), doctest::Contains("well_ix"), ConfigError);

    ModelConfig in_matrix;
    in_matrix.well_ix = 0; // far from the fracture column
    CHECK_THROWS_WITH_AS(build_model(in_matrix), doctest::Contains("propped"), ConfigError);
}

TEST_CASE("model config file round-trip, unknown keys rejected") {
    TempDir dir("reservoir_cfg");
    ModelConfig cfg = tiny_config();
    cfg.save(dir.file("m.cfg"));
    const ModelConfig loaded = ModelConfig::from_file(dir.file("m.cfg"));
    CHECK(loaded.canonical_text() == cfg.canonical_text());
    CHECK(loaded.fingerprint() == cfg.fingerprint());

    {
        std::ofstream bad(dir.file("bad.cfg"));
        bad << "nx = 5\nny = 5\nnot_a_key = 1\n";
    }
    CHECK_THROWS_WITH_AS(ModelConfig::from_file(dir.file("bad.cfg")),
                         doctest::Contains("not_a_key"), ConfigError);
}

TEST_CASE("update_permeability: spec examples and properties") {
    CHECK(update_permeability(1e-16, 0.0, 1e7) == 1e-16);           // alpha = 0 -> k0, exact
    CHECK(update_permeability(1e-16, 5e-8, 0.0) == 1e-16);          // dsigma = 0 -> k0, exact
    const double expected = 1e-16 * std::exp(-0.5);                 // direct scalar evaluation
    CHECK(update_permeability(1e-16, 5e-8, 1e7) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(6.0653e-17).epsilon(1e-4));

    // Strictly decreasing in alpha and dsigma; bounded by (0, k0].
    double prev = 1e-16 + 1.0;
    for (double a : {0.0, 1e-9, 1e-8, 1e-7}) {
        const double k = update_permeability(1e-16, a, 2e7);
        CHECK(k > 0.0);
        CHECK(k <= 1e-16);
        if (a > 0.0) CHECK(k < prev);
        prev = k;
    }
    prev = 1e-16 + 1.0;
    for (double s : {0.0, 1e6, 1e7, 5e7}) {
        const double k = update_permeability(1e-16, 5e-8, s);
        if (s > 0.0) CHECK(k < prev);
        prev = k;
    }
}

TEST_CASE("effective_stress_update: closure evaluation") {
    const std::vector<double> uniform(5, 40e6);
    const auto zero = effective_stress_update(uniform, 40e6, 0.6);
    for (double d : zero) CHECK(d == 0.0);

    const std::vector<double> one_depleted = {40e6, 35e6, 40e6};
    const auto eta_one = effective_stress_update(one_depleted, 40e6, 1.0);
    CHECK(eta_one[0] == 0.0);
    CHECK(eta_one[1] == doctest::Approx(5e6).epsilon(1e-14));
    CHECK(eta_one[2] == 0.0);

    const std::vector<double> depleted = {30e6};
    const auto scaled = effective_stress_update(depleted, 40e6, 0.6);
    CHECK(scaled[0] == doctest::Approx(6e6).epsilon(1e-14));
}

TEST_CASE("step_flow: zero drawdown leaves the state still") {
    const ReservoirModel m = build_model(tiny_config());
    const ReservoirState s0 = m.initial_state();
    const auto [s1, produced] = step_flow(s0, 86400.0, m.p_init, s0.k_current, m);
    CHECK(std::abs(produced) < 1e-9);
    for (int i = 0; i < m.grid.cell_count(); ++i)
        CHECK(std::abs(s1.pressure[i] - m.p_init) < 1e-5);
}

TEST_CASE("step_flow: argument errors") {
    const ReservoirModel m = build_model(mini_config());
    const ReservoirState s0 = m.initial_state();
    CHECK_THROWS_AS(step_flow(s0, 0.0, 20e6, s0.k_current, m), ArgumentError);
    CHECK_THROWS_AS(step_flow(s0, -5.0, 20e6, s0.k_current, m), ArgumentError);
    CHECK_THROWS_AS(step_flow(s0, 60.0, 1e3, s0.k_current, m), ArgumentError); // below floor
    std::vector<double> bad_k = s0.k_current;
    bad_k[0] = 0.0;
    CHECK_THROWS_AS(step_flow(s0, 60.0, 20e6, bad_k, m), ArgumentError);
}

TEST_CASE("step_flow: single-tank depletion matches the closed-form exponential") {
    ModelConfig cfg;
    cfg.nx = 1;
    cfg.ny = 1;
    const ReservoirModel m = build_model(cfg);

    const double k = cfg.k0_propped_m2;
    const double vol = cfg.dx_m * cfg.dy_m * cfg.thickness_m;
    const double tau = cfg.phi_propped * cfg.ct_painv * vol * cfg.mu_pas /
                       (cfg.well_index_m * k);
    const double bhp = 20e6;
    const double dt = tau / 100.0;

    ReservoirState state = m.initial_state();
    for (int step = 1; step <= 100; ++step) {
        auto [next, produced] = step_flow(state, dt, bhp, state.k_current, m);
        (void)produced;
        state = std::move(next);
        const double exact = bhp + (cfg.p_init_pa - bhp) * std::exp(-state.time_s / tau);
        // Compare on the decaying amplitude, the strict scale.
        const double amp_exact = exact - bhp;
        const double amp_num = state.pressure[0] - bhp;
        CHECK(std::abs(amp_num - amp_exact) / amp_exact < 0.01);
    }
}

TEST_CASE("step_flow: shut-in clamp conserves mass in a two-cell exchange") {
    ModelConfig cfg;
    cfg.nx = 2;
    cfg.ny = 1;
    cfg.frac_col = 0;
    cfg.halo_width = 0;
    cfg.p_ceiling_pa = 200e6;
    const ReservoirModel m = build_model(cfg);

    ReservoirState s = m.initial_state();
    s.pressure = {35e6, 39e6}; // unequal pressures, no net source
    const double vol = cfg.dx_m * cfg.dy_m * cfg.thickness_m;
    double mass0 = 0.0;
    for (int i = 0; i < 2; ++i) mass0 += m.phi_cell[i] * m.fluid.ct * vol * s.pressure[i];

    // BHP above both cell pressures: unclamped rate would inject, so the well
    // shuts in and the step is a pure inter-cell exchange.
    const auto [s1, produced] = step_flow(s, 3600.0, 60e6, s.k_current, m);
    CHECK(produced == 0.0);
    double mass1 = 0.0;
    for (int i = 0; i < 2; ++i) mass1 += m.phi_cell[i] * m.fluid.ct * vol * s1.pressure[i];
    CHECK(std::abs(mass1 - mass0) / mass0 < 1e-12);
    CHECK(s1.pressure[0] > 35e6);
    CHECK(s1.pressure[1] < 39e6);

    // Same situation with the clamp disabled: the well injects.
    ModelConfig inj = cfg;
    inj.rate_clamp = false;
    const ReservoirModel m2 = build_model(inj);
    const auto [s2, produced2] = step_flow(s, 3600.0, 60e6, s.k_current, m2);
    (void)s2;
    CHECK(produced2 < 0.0);
}

TEST_CASE("coupled_step: alpha = 0 reduces to a single flow step, bitwise") {
    ModelConfig cfg = apply_scenario(tiny_config(), 0.0);
    const ReservoirModel m = build_model(cfg);
    ReservoirState s0 = m.initial_state();

    const double dt = 5.0 * 86400.0, bhp = 15e6;
    const CoupledStepResult coupled = coupled_step(s0, dt, bhp, m, 100.0, 50);
    CHECK(coupled.iterations == 2);

    const auto [flow_state, flow_prod] = step_flow(s0, dt, bhp, s0.k_current, m);
    CHECK(coupled.production_m3 == flow_prod);
    CHECK(coupled.state.cumulative_oil_m3 == flow_state.cumulative_oil_m3);
    CHECK(coupled.state.time_s == flow_state.time_s);
    for (int i = 0; i < m.grid.cell_count(); ++i) {
        CHECK(coupled.state.pressure[i] == flow_state.pressure[i]);
        CHECK(coupled.state.k_current[i] == flow_state.k_current[i]);
    }
    // step_flow leaves stress bookkeeping to the coupling loop; applying the
    // closure to its pressures must reproduce the coupled stress field exactly.
    const auto dsig = effective_stress_update(flow_state.pressure, m.p_init, m.geomech.eta());
    for (int i = 0; i < m.grid.cell_count(); ++i) CHECK(coupled.state.dsigma_eff[i] == dsig[i]);
}

TEST_CASE("coupled_step: vacuous tolerance converges in exactly 2 iterations") {
    const ReservoirModel m = build_model(tiny_config());
    const ReservoirState s0 = m.initial_state();
    const CoupledStepResult r = coupled_step(s0, 86400.0, 15e6, m, 1e30, 50);
    CHECK(r.iterations == 2);
}

TEST_CASE("coupled_step: medium-alpha first control step converges within tolerance") {
    const ReservoirModel m = build_model(tiny_config()); // medium-alpha defaults
    const ReservoirState s0 = m.initial_state();
    const CoupledStepResult r = coupled_step(s0, 2.0 * 86400.0, 12e6, m, m.coupling_tol,
                                             m.coupling_max_iter);
    CHECK(r.iterations <= m.coupling_max_iter);
    CHECK(r.last_change_pa < m.coupling_tol);
    for (int i = 0; i < m.grid.cell_count(); ++i) {
        CHECK(r.state.dsigma_eff[i] >= 0.0);
        CHECK(r.state.k_current[i] <= m.k0_cell[i]);
    }
}

TEST_CASE("coupled_step: non-convergence raises a coupling error with the change norm") {
    ModelConfig cfg = tiny_config();
    cfg.alpha_matrix_painv = 3e-6; // extreme sensitivity: k collapses between iterates
    cfg.alpha_propped_painv = 3e-6;
    cfg.alpha_unpropped_painv = 3e-6;
    const ReservoirModel m = build_model(cfg);
    const ReservoirState s0 = m.initial_state();
    try {
        coupled_step(s0, 30.0 * 86400.0, 10e6, m, 1e-8, 2);
        FAIL("expected CouplingError");
    } catch (const CouplingError& e) {
        CHECK(e.last_change_pa() > 0.0);
    }
}

TEST_CASE("simulate: zero-drawdown trajectory produces nothing") {
    ModelConfig cfg = tiny_config();
    cfg.p_ceiling_pa = 60e6;
    const ReservoirModel m = build_model(cfg);
    const ControlTrajectory traj = constant_trajectory(cfg.p_init_pa, uniform_grid(8));
    const SimulationResult res = simulate(m, traj, 2);
    // Zero up to solver rounding (production scale here is ~1e3 m3).
    for (double c : res.cumulative_per_control_step) CHECK(std::abs(c) < 1e-6);
    CHECK(res.mass_balance_error < 1e-6);
}

TEST_CASE("simulate: flow-only model matches the independent oracle") {
    ModelConfig cfg = apply_scenario(tiny_config(), 0.0);
    const ReservoirModel m = build_model(cfg);
    const auto times = geometric_time_grid(10, 900.0, 1.25);

    Rng rng(42);
    ControlTrajectory traj;
    traj.step_end_times = times;
    double p = rng.uniform(30e6, 38e6);
    for (std::size_t t = 0; t < times.size(); ++t) {
        traj.values.push_back(p);
        p = std::clamp(p + rng.uniform(-3e6, 1.5e6), 10e6, 38e6);
    }

    const SimulationResult res = simulate(m, traj, 3);
    const auto oracle = testsupport::flow_only_cumulative(m, traj, 3);
    REQUIRE(oracle.size() == res.cumulative_per_control_step.size());
    for (std::size_t t = 0; t < oracle.size(); ++t) {
        const double scale = std::max(std::abs(oracle[t]), 1e-9);
        CHECK(std::abs(res.cumulative_per_control_step[t] - oracle[t]) / scale < 1e-8);
    }
    CHECK(res.mass_balance_error < 1e-6);
}

TEST_CASE("simulate: lower final BHP yields strictly more production at fixed permeability") {
    ModelConfig cfg = apply_scenario(tiny_config(), 0.0);
    const ReservoirModel m = build_model(cfg);
    const auto times = uniform_grid(6);

    ControlTrajectory a = constant_trajectory(30e6, times);
    ControlTrajectory b = a;
    b.values.back() = 25e6;
    CHECK(final_cum(m, b, 2) > final_cum(m, a, 2));
}

TEST_CASE("simulate: deterministic and cumulative non-decreasing") {
    const ReservoirModel m = build_model(tiny_config());
    const auto times = uniform_grid(8);
    const ControlTrajectory traj = aggressive_ramp(times, 38e6, 10e6, 3e6);

    const SimulationResult r1 = simulate(m, traj, 3);
    const SimulationResult r2 = simulate(m, traj, 3);
    REQUIRE(r1.cumulative_per_control_step.size() == r2.cumulative_per_control_step.size());
    for (std::size_t t = 0; t < r1.cumulative_per_control_step.size(); ++t)
        CHECK(r1.cumulative_per_control_step[t] == r2.cumulative_per_control_step[t]);

    double prev = 0.0;
    for (double c : r1.cumulative_per_control_step) {
        CHECK(c >= prev - 1e-12);
        prev = c;
    }
    CHECK(r1.mass_balance_error < 1e-6);
}

TEST_CASE("simulate: final production non-increasing along a uniform alpha ladder") {
    const auto times = uniform_grid(8);
    const ControlTrajectory traj = aggressive_ramp(times, 38e6, 10e6, 3e6);
    double prev = std::numeric_limits<double>::infinity();
    for (double scale : {0.0, 1.0, 2.0, 4.0}) {
        const ModelConfig cfg = apply_scenario(tiny_config(), scale * 5e-8);
        const double j = final_cum(build_model(cfg), traj, 3);
        CHECK(j <= prev + 1e-9);
        prev = j;
    }
}

TEST_CASE("simulate: coupling/solver errors carry the control-step index") {
    ModelConfig cfg = tiny_config();
    cfg.alpha_matrix_painv = 3e-6;
    cfg.alpha_propped_painv = 3e-6;
    cfg.alpha_unpropped_painv = 3e-6;
    cfg.coupling_max_iter = 2;
    cfg.coupling_tol_pa = 1e-8;
    const ReservoirModel m = build_model(cfg);
    const ControlTrajectory traj = constant_trajectory(10e6, uniform_grid(4));
    CHECK_THROWS_WITH_AS(simulate(m, traj, 2), doctest::Contains("control step"), CouplingError);
}

TEST_CASE("simulation CSV export: schema and byte determinism") {
    TempDir dir("reservoir_csv");
    const ReservoirModel m = build_model(mini_config());
    const ControlTrajectory traj = aggressive_ramp(uniform_grid(5), 38e6, 10e6, 3e6);
    const SimulationResult res = simulate(m, traj, 2);
    write_simulation_csv(dir.file("a.csv"), res, traj);
    write_simulation_csv(dir.file("b.csv"), res, traj);
    CHECK(files_identical(dir.file("a.csv"), dir.file("b.csv")));
    const std::string contents = slurp(dir.file("a.csv"));
    CHECK(contents.rfind("step,time_days,bhp_pa,step_oil_m3,cum_oil_m3,coupling_iters", 0) == 0);
}

TEST_CASE("baseline_study: ordering, early-step similarity, degenerate presets") {
    ModelConfig base = tiny_config();
    const auto times = geometric_time_grid(10, 1200.0, 1.25);
    const ControlTrajectory traj = aggressive_ramp(times, 38e6, 10e6, 3e6);

    std::vector<std::pair<std::string, ModelConfig>> presets;
    for (const StressScenario& sc : default_scenarios())
        presets.emplace_back(sc.name, apply_scenario(base, sc.alpha_base));
    const BaselineTable table = baseline_study(presets, traj);
    REQUIRE(table.cumulative.size() == 4);

    const std::size_t last = table.cumulative[0].size() - 1;
    for (std::size_t r = 1; r < 4; ++r)
        CHECK(table.cumulative[r][last] < table.cumulative[r - 1][last]);

    auto spread = [&](std::size_t step) {
        double lo = table.cumulative[0][step], hi = lo, sum = 0.0;
        for (const auto& row : table.cumulative) {
            lo = std::min(lo, row[step]);
            hi = std::max(hi, row[step]);
            sum += row[step];
        }
        return (hi - lo) / (sum / table.cumulative.size());
    };
    CHECK(spread(0) < spread(last));

    std::vector<std::pair<std::string, ModelConfig>> degenerate;
    for (const char* name : {"a", "b", "c"})
        degenerate.emplace_back(name, apply_scenario(base, 0.0));
    const BaselineTable same = baseline_study(degenerate, traj);
    for (std::size_t r = 1; r < same.cumulative.size(); ++r)
        CHECK(same.cumulative[r] == same.cumulative[0]);
}
