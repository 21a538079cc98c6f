#include "resopt/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "resopt/errors.hpp"
#include "resopt/projection.hpp"
#include "resopt/util.hpp"

namespace resopt {

void OptimizerConfig::validate() const {
    if (max_iters < 1) throw ConfigError("optimizer config: max_iters must be >= 1");
    if (!(step_init > 0.0)) throw ConfigError("optimizer config: step_init must be > 0");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
        throw ConfigError("optimizer config: backtrack_factor must be in (0, 1)");
    if (!(armijo_c > 0.0)) throw ConfigError("optimizer config: armijo_c must be > 0");
    if (!(grad_tol > 0.0)) throw ConfigError("optimizer config: grad_tol must be > 0");
    if (!(fd_step > 0.0)) throw ConfigError("optimizer config: fd_step must be > 0");
    if (max_backtracks < 1) throw ConfigError("optimizer config: max_backtracks must be >= 1");
}

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::GradientTolerance: return "gradient-tolerance";
        case Termination::StepCollapse: return "step-collapse";
        case Termination::MaxIterations: return "max-iterations";
    }
    return "unknown";
}

namespace {

[[noreturn]] void rethrow_with_coordinate(std::size_t i) {
    try {
        throw;
    } catch (const ArgumentError& e) {
        throw ArgumentError("fd_gradient: coordinate " + std::to_string(i + 1) + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError("fd_gradient: coordinate " + std::to_string(i + 1) + ": " + e.what(),
                           e.residual());
    } catch (const CouplingError& e) {
        throw CouplingError("fd_gradient: coordinate " + std::to_string(i + 1) + ": " + e.what(),
                            e.last_change_pa());
    } catch (const std::exception& e) {
        throw std::runtime_error("fd_gradient: coordinate " + std::to_string(i + 1) + ": " +
                                 e.what());
    }
}

} // namespace

std::vector<double> fd_gradient(const ObjectiveHandle& objective, const std::vector<double>& u,
                                double h, const ConstraintSpec* box, int threads) {
    if (!(h > 0.0)) throw ArgumentError("fd_gradient: h must be > 0");
    const std::size_t T = u.size();

    enum class Mode { Central, OneSidedDown, OneSidedUp };
    std::vector<Mode> mode(T, Mode::Central);
    bool need_f0 = false;
    if (box) {
        for (std::size_t i = 0; i < T; ++i) {
            const bool up_blocked = u[i] + h > box->p_max;
            const bool down_blocked = u[i] - h < box->p_min;
            if (up_blocked && !down_blocked) {
                mode[i] = Mode::OneSidedDown;
                need_f0 = true;
            } else if (down_blocked && !up_blocked) {
                mode[i] = Mode::OneSidedUp;
                need_f0 = true;
            }
            // both blocked (h wider than the box): fall back to central probes
        }
    }
    const double f0 = need_f0 ? objective.value(u) : 0.0;

    std::vector<double> g(T, 0.0);
    const int workers = objective.parallel_safe ? threads : 1;
    parallel_for(T, workers, [&](std::size_t i) {
        try {
            std::vector<double> probe = u;
            switch (mode[i]) {
                case Mode::Central: {
                    probe[i] = u[i] + h;
                    const double fp = objective.value(probe);
                    probe[i] = u[i] - h;
                    const double fm = objective.value(probe);
                    g[i] = (fp - fm) / (2.0 * h);
                    break;
                }
                case Mode::OneSidedDown: {
                    probe[i] = u[i] - h;
                    g[i] = (f0 - objective.value(probe)) / h;
                    break;
                }
                case Mode::OneSidedUp: {
                    probe[i] = u[i] + h;
                    g[i] = (objective.value(probe) - f0) / h;
                    break;
                }
            }
        } catch (...) {
            rethrow_with_coordinate(i);
        }
    });
    return g;
}

OptimizationResult maximize(const ObjectiveHandle& objective, const ControlTrajectory& u0,
                            const ConstraintSpec& spec, const OptimizerConfig& cfg) {
    cfg.validate();
    spec.validate();
    u0.validate_shape();
    if (!is_feasible(u0.values, spec, 1e-9))
        throw ArgumentError("maximize: initial trajectory is infeasible (violation " +
                            fmt_g17(feasibility_violation(u0.values, spec)) + " Pa)");

    const auto t_start = std::chrono::steady_clock::now();
    const long evals_before = objective.eval_count.load();
    const double range = spec.range();
    const std::size_t T = u0.size();

    long n_grad = 0;
    auto compute_gradient = [&](const std::vector<double>& u) {
        ++n_grad;
        if (objective.has_gradient()) return objective.gradient(u);
        return fd_gradient(objective, u, cfg.fd_step, &spec, cfg.threads);
    };

    std::vector<double> u = u0.values;
    double J_u = objective.value(u);
    const double J_ref = std::max(std::abs(J_u), 1e-12);
    // Step that corresponds to a unit gradient step on the normalized problem
    // (coordinates over `range`, objective over J_ref); used for the
    // dimensionless projected-gradient stationarity measure.
    const double t_pg = range * range / J_ref;

    OptimizationResult result;
    result.iterate_history.push_back(IterateRecord{u, J_u, 0.0, 0.0});
    result.termination_reason = Termination::MaxIterations;

    double s_carry = 0.0; // arc step carried between iterations
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const std::vector<double> g = compute_gradient(u);

        std::vector<double> probe(T);
        for (std::size_t i = 0; i < T; ++i) probe[i] = u[i] + t_pg * g[i];
        const std::vector<double> w_pg = project_feasible(probe, spec);
        double pg_sq = 0.0;
        for (std::size_t i = 0; i < T; ++i) {
            const double d = (w_pg[i] - u[i]) / range;
            pg_sq += d * d;
        }
        const double pg = std::sqrt(pg_sq);
        result.iterate_history.back().pg_norm = pg;

        if (pg < cfg.grad_tol) {
            result.termination_reason = Termination::GradientTolerance;
            break;
        }

        double gmax = 0.0;
        for (double gi : g) gmax = std::max(gmax, std::abs(gi));
        if (gmax == 0.0) {
            result.termination_reason = Termination::GradientTolerance;
            break;
        }

        // Line search along the projection arc w(s) = P(u + s*g). The first
        // trial moves the largest-gradient coordinate by step_init; accepted
        // steps are carried over doubled, so coordinates whose gradients are
        // dwarfed by bound-pinned ones still make progress.
        if (iter == 1) s_carry = cfg.step_init / gmax;
        double s = std::min(s_carry, range / gmax);
        bool accepted = false;
        for (int bt = 0; bt <= cfg.max_backtracks && !accepted; ++bt) {
            for (std::size_t i = 0; i < T; ++i) probe[i] = u[i] + s * g[i];
            std::vector<double> w = project_feasible(probe, spec);
            double move = 0.0, gTd = 0.0;
            for (std::size_t i = 0; i < T; ++i) {
                move = std::max(move, std::abs(w[i] - u[i]));
                gTd += g[i] * (w[i] - u[i]);
            }
            if (move < 1e-12 * range) break; // projection blocks this direction entirely
            if (gTd > 0.0) {
                const double J_w = objective.value(w);
                if (J_w - J_u >= cfg.armijo_c * gTd) {
                    u = std::move(w);
                    J_u = J_w;
                    result.iterate_history.push_back(IterateRecord{u, J_u, move, 0.0});
                    s_carry = 2.0 * s;
                    accepted = true;
                }
            }
            if (!accepted) s *= cfg.backtrack_factor;
        }
        if (!accepted) {
            result.termination_reason = Termination::StepCollapse;
            break;
        }
    }

    result.u_star = ControlTrajectory{u, u0.step_end_times};
    result.J_star_est = J_u;
    result.n_objective_evals = objective.eval_count.load() - evals_before;
    result.n_gradient_evals = n_grad;
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

CostSummary count_report(const OptimizationResult& result) {
    CostSummary s;
    s.n_objective_evals = result.n_objective_evals;
    s.n_gradient_evals = result.n_gradient_evals;
    s.iterations = result.iterate_history.empty()
                       ? 0
                       : static_cast<int>(result.iterate_history.size()) - 1;
    s.wall_time_s = result.wall_time_s;
    s.mean_eval_time_s =
        result.n_objective_evals > 0 ? result.wall_time_s / result.n_objective_evals : 0.0;
    return s;
}

void write_history_csv(const std::string& path, const OptimizationResult& result) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    const std::size_t T = result.u_star.size();
    out << "iter,J,step_size,pg_norm";
    for (std::size_t i = 1; i <= T; ++i) out << ",p_" << i;
    out << '\n';
    for (std::size_t k = 0; k < result.iterate_history.size(); ++k) {
        const IterateRecord& rec = result.iterate_history[k];
        out << k << ',' << fmt_g17(rec.J) << ',' << fmt_g17(rec.step_size) << ','
            << fmt_g17(rec.pg_norm);
        for (double v : rec.values) out << ',' << fmt_g17(v);
        out << '\n';
    }
}

} // namespace resopt
