#pragma once

#include <atomic>
#include <functional>
#include <string>
#include <vector>

#include "resopt/trajectory.hpp"

namespace resopt {

// Objective adapter: evaluation plus optional analytic gradient, with running
// evaluation counters. `parallel_safe` declares eval() safe for concurrent
// calls (true for the simulator, whose runs share no mutable state).
struct ObjectiveHandle {
    enum class CostClass { Expensive, Cheap };

    std::function<double(const std::vector<double>&)> eval;
    std::function<std::vector<double>(const std::vector<double>&)> grad; // may be empty
    CostClass cost_class = CostClass::Expensive;
    bool parallel_safe = false;

    mutable std::atomic<long> eval_count{0};
    mutable std::atomic<long> grad_count{0};

    ObjectiveHandle() = default;
    ObjectiveHandle(ObjectiveHandle&& other) noexcept
        : eval(std::move(other.eval)),
          grad(std::move(other.grad)),
          cost_class(other.cost_class),
          parallel_safe(other.parallel_safe),
          eval_count(other.eval_count.load()),
          grad_count(other.grad_count.load()) {}
    ObjectiveHandle& operator=(ObjectiveHandle&& other) noexcept {
        eval = std::move(other.eval);
        grad = std::move(other.grad);
        cost_class = other.cost_class;
        parallel_safe = other.parallel_safe;
        eval_count.store(other.eval_count.load());
        grad_count.store(other.grad_count.load());
        return *this;
    }
    ObjectiveHandle(const ObjectiveHandle&) = delete;
    ObjectiveHandle& operator=(const ObjectiveHandle&) = delete;

    double value(const std::vector<double>& u) const {
        ++eval_count;
        return eval(u);
    }
    std::vector<double> gradient(const std::vector<double>& u) const {
        ++grad_count;
        return grad(u);
    }
    bool has_gradient() const { return static_cast<bool>(grad); }
};

struct OptimizerConfig {
    int max_iters = 200;
    double step_init = 0.5e6;      // Pa; largest per-coordinate move of the first trial step
    double backtrack_factor = 0.5;
    double armijo_c = 1e-4;
    // Stopping tolerance on the dimensionless projected-gradient measure
    // (coordinates scaled by the control range, objective by |J(u0)|).
    double grad_tol = 1e-4;
    double fd_step = 1e4;          // Pa, finite-difference step for simulator gradients
    int max_backtracks = 40;
    int threads = 1;               // finite-difference evaluation parallelism

    void validate() const;
};

enum class Termination { GradientTolerance, StepCollapse, MaxIterations };
const char* termination_name(Termination t);

struct IterateRecord {
    std::vector<double> values;
    double J = 0.0;
    double step_size = 0.0; // accepted step (Pa); 0 for the initial iterate
    double pg_norm = 0.0;   // dimensionless projected-gradient measure
};

struct OptimizationResult {
    ControlTrajectory u_star;
    double J_star_est = 0.0;
    std::vector<IterateRecord> iterate_history;
    long n_objective_evals = 0;
    long n_gradient_evals = 0;
    double wall_time_s = 0.0;
    Termination termination_reason = Termination::MaxIterations;
};

// Central finite differences per coordinate, with a one-sided fallback at
// active box bounds (never probes outside [p_min, p_max] when `box` is given).
// Makes exactly 2T objective evaluations away from bounds.
std::vector<double> fd_gradient(const ObjectiveHandle& objective, const std::vector<double>& u,
                                double h, const ConstraintSpec* box = nullptr, int threads = 1);

// Projected gradient ascent with Armijo backtracking over the trajectory
// polytope. Uses the analytic gradient when present, finite differences
// otherwise. Every recorded iterate is feasible; J along accepted iterates is
// non-decreasing.
OptimizationResult maximize(const ObjectiveHandle& objective, const ControlTrajectory& u0,
                            const ConstraintSpec& spec, const OptimizerConfig& cfg);

struct CostSummary {
    long n_objective_evals = 0;
    long n_gradient_evals = 0;
    int iterations = 0;
    double wall_time_s = 0.0;
    double mean_eval_time_s = 0.0;
};

CostSummary count_report(const OptimizationResult& result);

// Iterate history CSV; columns: iter,J,step_size,pg_norm,p_1..p_T
void write_history_csv(const std::string& path, const OptimizationResult& result);

} // namespace resopt
