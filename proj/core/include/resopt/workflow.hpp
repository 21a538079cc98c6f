#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "resopt/optimizer.hpp"
#include "resopt/reservoir.hpp"
#include "resopt/sampling.hpp"
#include "resopt/surrogate.hpp"

namespace resopt {

// |J_hat - J| / J; requires J > 0.
double relative_error(double j_hat, double j);

struct ValidationReport {
    ControlTrajectory u_star;
    double J_proxy = 0.0;        // m^3
    double J_sim = 0.0;          // m^3
    double relative_error = 0.0;
    bool pass = false;
    bool retrain_recommended = false;
};

// Study table cell: numeric or text.
struct Cell {
    bool numeric = false;
    double num = 0.0;
    std::string text;

    static Cell n(double v) { return Cell{true, v, {}}; }
    static Cell s(std::string v) { return Cell{false, 0.0, std::move(v)}; }
    std::string csv() const;
};

// Named rows/columns with a provenance block (seeds, fingerprints, configs);
// written as CSV plus a structured-text sidecar.
struct StudyTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::pair<std::string, std::string>> provenance;

    void add_provenance(const std::string& key, const std::string& value);
    void write_csv(const std::string& path) const;
    void write_provenance(const std::string& path) const;
};

// Objective adapters. The physics objective captures the control-time grid so
// a bare value vector can be simulated.
ObjectiveHandle make_physics_objective(const ReservoirModel& model,
                                       const std::vector<double>& step_end_times);
ObjectiveHandle make_proxy_objective(const SurrogateModel& proxy);

// Physics-based optimization: the objective is the coupled simulator,
// gradients by finite differences.
OptimizationResult optimize_physics(const ReservoirModel& model, const ControlTrajectory& u0,
                                    const ConstraintSpec& spec, const OptimizerConfig& cfg);

// Proxy-based optimization: surrogate forward passes with analytic gradients.
OptimizationResult optimize_proxy(const SurrogateModel& proxy, const ControlTrajectory& u0,
                                  const ConstraintSpec& spec, const OptimizerConfig& cfg);

// One simulator run at the proxy optimum; pass/fail against the tolerance.
ValidationReport hybrid_validate(const SurrogateModel& proxy, const ReservoirModel& model,
                                 const ControlTrajectory& u_star, double tol);

// One refinement round: appends (u_star, J_sim) to the dataset and retrains.
std::pair<ValidationReport, SurrogateModel> hybrid_validate_refine(
    const SurrogateModel& proxy, const ReservoirModel& model, const ControlTrajectory& u_star,
    double tol, Dataset& dataset, const TrainConfig& train_cfg);

struct SavingsReport {
    long warm_physics_evals = 0; // simulator evals in the physics stage after proxy warm start
    long cold_physics_evals = 0; // simulator evals for a cold start from u0
    long proxy_evals = 0;
    double warm_J = 0.0, cold_J = 0.0;
    double warm_time_s = 0.0, cold_time_s = 0.0;
};

// Proxy-assisted initialization: proxy optimum seeds the physics optimization;
// a cold-start physics run from u0 provides the savings baseline.
std::pair<OptimizationResult, SavingsReport> proxy_assisted(const ReservoirModel& model,
                                                            const SurrogateModel& proxy,
                                                            const ControlTrajectory& u0,
                                                            const ConstraintSpec& spec,
                                                            const OptimizerConfig& cfg_physics,
                                                            const OptimizerConfig& cfg_proxy);

// Training-set envelope diagnostic: a trajectory is out-of-distribution if any
// coordinate leaves the per-step [min,max] envelope of the training set, or any
// step increment leaves the increment envelope.
struct OodEnvelope {
    std::vector<double> lo, hi;   // per control step
    std::vector<double> dlo, dhi; // per increment
    static OodEnvelope from_dataset(const Dataset& dataset);
    bool is_ood(std::span<const double> values, double tol_pa = 1e-9) const;
    std::string describe(std::span<const double> values, double tol_pa = 1e-9) const;
};

// Six standard initializations spanning conservative to aggressive profiles
// (projected to feasibility under the given spec).
std::vector<std::pair<std::string, ControlTrajectory>> standard_initializations(
    const ConstraintSpec& spec, const std::vector<double>& step_end_times);

struct MultiInitRow {
    std::string name;
    ControlTrajectory u0;
    OptimizationResult physics;
    OptimizationResult proxy;
    double j0_sim = 0.0, j0_proxy = 0.0, init_rel_err = 0.0;
    double j_proxy_star = 0.0;     // proxy prediction at its optimum
    double j_realized = 0.0;       // simulator at the proxy optimum
    double final_rel_err = 0.0;    // proxy vs realized at the proxy optimum
    double realized_vs_physics = 0.0;
    double traj_distance_frac = 0.0; // max |u_proxy* - u_physics*| / range
    bool ood = false;
    bool divergence = false;
    bool problematic = false;
    bool failed = false;
    std::string status; // "ok" or the error message
};

struct MultiInitOutcome {
    StudyTable table;
    std::vector<MultiInitRow> rows;
};

MultiInitOutcome multi_init_study(const ReservoirModel& model, const SurrogateModel& proxy,
                                  const std::vector<std::pair<std::string, ControlTrajectory>>& inits,
                                  const ConstraintSpec& spec, const OptimizerConfig& cfg_physics,
                                  const OptimizerConfig& cfg_proxy, const Dataset& train_data,
                                  double init_gate = 0.02, double final_gate = 0.05);

struct SamplingStrategyResult {
    std::string name;
    RegressionMetrics test_metrics;                // fresh in-distribution test set
    std::vector<std::pair<double, double>> scatter; // (J_sim, J_proxy) on the test set
    double mean_init_err = 0.0;   // mean relative error over the standard inits
    double mean_final_err = 0.0;  // mean realized error at proxy optima
    double max_final_err = 0.0;
    int n_ood = 0;                // proxy optima flagged OOD vs this training set
    std::string coverage;         // in-distribution / partially OOD / frequently OOD
};

struct SamplingComparisonOutcome {
    StudyTable table;
    std::vector<SamplingStrategyResult> rows;
};

// Trains one proxy per strategy at equal N and seed, then measures initial and
// final (post-optimization, simulator-realized) relative errors.
SamplingComparisonOutcome sampling_comparison(const ModelConfig& config,
                                              const std::vector<SamplingStrategy>& strategies,
                                              int n, const ConstraintSpec& spec,
                                              const std::vector<double>& step_end_times,
                                              const OptimizerConfig& cfg_proxy, std::uint64_t seed,
                                              const TrainConfig& train_cfg, int threads = 1);

struct BenchmarkNumbers {
    double sim_eval_s = 0.0;
    double proxy_eval_s = 0.0;
    double physics_opt_s = 0.0;
    double proxy_opt_s = 0.0;
    long physics_evals = 0;
    long proxy_evals = 0;
    double eval_speedup = 0.0;
    double opt_speedup = 0.0;
};

struct BenchmarkOutcome {
    StudyTable table;
    BenchmarkNumbers numbers;
    OptimizationResult physics_result;
    OptimizationResult proxy_result;
};

// Wall-time comparison (monotonic clock, warm-up excluded) of simulator vs
// proxy evaluation and full optimizations from the same initialization.
BenchmarkOutcome benchmark_study(const ReservoirModel& model, const SurrogateModel& proxy,
                                 const ControlTrajectory& u0, const ConstraintSpec& spec,
                                 const OptimizerConfig& cfg_physics,
                                 const OptimizerConfig& cfg_proxy);

// Figure-analogue rendering: reads study artifacts from a directory and emits
// plot-ready long-format CSVs plus a human-readable summary. Returns the list
// of files written.
std::vector<std::string> render_report(const std::string& dir);

} // namespace resopt
