#include "resopt/workflow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "resopt/errors.hpp"
#include "resopt/projection.hpp"
#include "resopt/rng.hpp"
#include "resopt/util.hpp"
#include "resopt/version.hpp"

namespace resopt {

double relative_error(double j_hat, double j) {
    if (!(j > 0.0)) throw ArgumentError("relative_error: J must be > 0");
    return std::abs(j_hat - j) / j;
}

std::string Cell::csv() const {
    if (numeric) return fmt_g17(num);
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

void StudyTable::add_provenance(const std::string& key, const std::string& value) {
    provenance.emplace_back(key, value);
}

void StudyTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c].csv();
        out << '\n';
    }
}

void StudyTable::write_provenance(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    out << "study " << name << '\n';
    out << "tool_version " << kToolVersion << '\n';
    for (const auto& [k, v] : provenance) out << k << ' ' << v << '\n';
}

ObjectiveHandle make_physics_objective(const ReservoirModel& model,
                                       const std::vector<double>& step_end_times) {
    ObjectiveHandle h;
    h.cost_class = ObjectiveHandle::CostClass::Expensive;
    h.parallel_safe = true; // simulate() runs share no mutable state
    h.eval = [&model, step_end_times](const std::vector<double>& values) {
        ControlTrajectory traj{values, step_end_times};
        return simulate(model, traj, model.substeps_per_control)
            .cumulative_per_control_step.back();
    };
    return h;
}

ObjectiveHandle make_proxy_objective(const SurrogateModel& proxy) {
    ObjectiveHandle h;
    h.cost_class = ObjectiveHandle::CostClass::Cheap;
    h.parallel_safe = true;
    h.eval = [&proxy](const std::vector<double>& values) { return forward(proxy, values); };
    h.grad = [&proxy](const std::vector<double>& values) { return input_gradient(proxy, values); };
    return h;
}

OptimizationResult optimize_physics(const ReservoirModel& model, const ControlTrajectory& u0,
                                    const ConstraintSpec& spec, const OptimizerConfig& cfg) {
    const ObjectiveHandle h = make_physics_objective(model, u0.step_end_times);
    return maximize(h, u0, spec, cfg);
}

OptimizationResult optimize_proxy(const SurrogateModel& proxy, const ControlTrajectory& u0,
                                  const ConstraintSpec& spec, const OptimizerConfig& cfg) {
    const ObjectiveHandle h = make_proxy_objective(proxy);
    return maximize(h, u0, spec, cfg);
}

ValidationReport hybrid_validate(const SurrogateModel& proxy, const ReservoirModel& model,
                                 const ControlTrajectory& u_star, double tol) {
    ValidationReport report;
    report.u_star = u_star;
    report.J_proxy = forward(proxy, u_star.values);
    report.J_sim = simulate(model, u_star, model.substeps_per_control)
                       .cumulative_per_control_step.back();
    report.relative_error = report.J_sim > 0.0
                                ? relative_error(report.J_proxy, report.J_sim)
                                : std::numeric_limits<double>::infinity();
    report.pass = report.relative_error <= tol;
    report.retrain_recommended = !report.pass;
    return report;
}

std::pair<ValidationReport, SurrogateModel> hybrid_validate_refine(
    const SurrogateModel& proxy, const ReservoirModel& model, const ControlTrajectory& u_star,
    double tol, Dataset& dataset, const TrainConfig& train_cfg) {
    ValidationReport report = hybrid_validate(proxy, model, u_star, tol);
    dataset.samples.push_back(Dataset::Sample{u_star, report.J_sim, "hybrid-refine"});
    auto [refined, train_report] = train(dataset, train_cfg);
    (void)train_report;
    return {std::move(report), std::move(refined)};
}

std::pair<OptimizationResult, SavingsReport> proxy_assisted(const ReservoirModel& model,
                                                            const SurrogateModel& proxy,
                                                            const ControlTrajectory& u0,
                                                            const ConstraintSpec& spec,
                                                            const OptimizerConfig& cfg_physics,
                                                            const OptimizerConfig& cfg_proxy) {
    const OptimizationResult proxy_stage = optimize_proxy(proxy, u0, spec, cfg_proxy);
    const OptimizationResult warm = optimize_physics(model, proxy_stage.u_star, spec, cfg_physics);
    const OptimizationResult cold = optimize_physics(model, u0, spec, cfg_physics);

    SavingsReport savings;
    savings.warm_physics_evals = warm.n_objective_evals;
    savings.cold_physics_evals = cold.n_objective_evals;
    savings.proxy_evals = proxy_stage.n_objective_evals;
    savings.warm_J = warm.J_star_est;
    savings.cold_J = cold.J_star_est;
    savings.warm_time_s = warm.wall_time_s;
    savings.cold_time_s = cold.wall_time_s;
    return {warm, savings};
}

OodEnvelope OodEnvelope::from_dataset(const Dataset& dataset) {
    if (dataset.samples.empty()) throw ArgumentError("ood envelope: empty dataset");
    const std::size_t T = dataset.samples.front().trajectory.values.size();
    OodEnvelope env;
    env.lo.assign(T, std::numeric_limits<double>::infinity());
    env.hi.assign(T, -std::numeric_limits<double>::infinity());
    if (T > 1) {
        env.dlo.assign(T - 1, std::numeric_limits<double>::infinity());
        env.dhi.assign(T - 1, -std::numeric_limits<double>::infinity());
    }
    for (const auto& s : dataset.samples) {
        const auto& v = s.trajectory.values;
        if (v.size() != T) throw ArgumentError("ood envelope: inconsistent trajectory lengths");
        for (std::size_t t = 0; t < T; ++t) {
            env.lo[t] = std::min(env.lo[t], v[t]);
            env.hi[t] = std::max(env.hi[t], v[t]);
        }
        for (std::size_t t = 1; t < T; ++t) {
            const double d = v[t] - v[t - 1];
            env.dlo[t - 1] = std::min(env.dlo[t - 1], d);
            env.dhi[t - 1] = std::max(env.dhi[t - 1], d);
        }
    }
    return env;
}

bool OodEnvelope::is_ood(std::span<const double> values, double tol_pa) const {
    if (values.size() != lo.size()) throw ArgumentError("ood envelope: dimension mismatch");
    for (std::size_t t = 0; t < values.size(); ++t)
        if (values[t] < lo[t] - tol_pa || values[t] > hi[t] + tol_pa) return true;
    for (std::size_t t = 1; t < values.size(); ++t) {
        const double d = values[t] - values[t - 1];
        if (d < dlo[t - 1] - tol_pa || d > dhi[t - 1] + tol_pa) return true;
    }
    return false;
}

std::string OodEnvelope::describe(std::span<const double> values, double tol_pa) const {
    std::string out;
    for (std::size_t t = 0; t < values.size(); ++t) {
        if (values[t] < lo[t] - tol_pa)
            out += "step " + std::to_string(t + 1) + " below envelope; ";
        else if (values[t] > hi[t] + tol_pa)
            out += "step " + std::to_string(t + 1) + " above envelope; ";
    }
    for (std::size_t t = 1; t < values.size(); ++t) {
        const double d = values[t] - values[t - 1];
        if (d < dlo[t - 1] - tol_pa || d > dhi[t - 1] + tol_pa)
            out += "increment " + std::to_string(t) + " outside envelope; ";
    }
    return out.empty() ? "in-distribution" : out;
}

std::vector<std::pair<std::string, ControlTrajectory>> standard_initializations(
    const ConstraintSpec& spec, const std::vector<double>& step_end_times) {
    spec.validate();
    const std::size_t T = step_end_times.size();
    const double range = spec.range();
    auto level = [&](double frac) { return spec.p_min + frac * range; };

    std::vector<std::pair<std::string, ControlTrajectory>> inits;
    auto add = [&](const std::string& name, std::vector<double> v) {
        inits.emplace_back(name,
                           ControlTrajectory{project_feasible(std::move(v), spec), step_end_times});
    };

    add("conservative-hold", std::vector<double>(T, level(0.93)));

    {
        std::vector<double> v(T);
        for (std::size_t t = 0; t < T; ++t)
            v[t] = std::max(spec.p_min, spec.p_max - spec.dp_max * static_cast<double>(t));
        add("aggressive-ramp", std::move(v));
    }
    {
        std::vector<double> v(T);
        for (std::size_t t = 0; t < T; ++t)
            v[t] = spec.p_max + (spec.p_min - spec.p_max) * static_cast<double>(t) /
                                    std::max<std::size_t>(1, T - 1);
        add("linear-ramp", std::move(v));
    }
    {
        std::vector<double> v(T);
        for (std::size_t t = 0; t < T; ++t)
            v[t] = level(0.89) + (level(0.36) - level(0.89)) * static_cast<double>(t) /
                                     std::max<std::size_t>(1, T - 1);
        add("moderate-ramp", std::move(v));
    }
    {
        std::vector<double> v(T, level(0.96));
        const std::size_t hold = T / 2;
        for (std::size_t t = hold; t < T; ++t)
            v[t] = level(0.96) + (level(0.18) - level(0.96)) * static_cast<double>(t - hold) /
                                     std::max<std::size_t>(1, T - 1 - hold);
        add("late-decline", std::move(v));
    }
    {
        // Non-monotone probe: descends, rebounds, descends, rebounds.
        std::vector<double> v(T);
        double x = level(0.71);
        const double d = 0.85 * spec.dp_max;
        for (std::size_t t = 0; t < T; ++t) {
            v[t] = std::clamp(x, spec.p_min, spec.p_max);
            if (t < T / 4)
                x -= d;
            else if (t < T / 4 + T / 5)
                x += d;
            else if (t < T / 4 + T / 5 + T / 3)
                x -= d;
            else
                x += 0.5 * d;
        }
        add("zigzag", std::move(v));
    }
    return inits;
}

namespace {

double simulate_J(const ReservoirModel& model, const ControlTrajectory& traj) {
    return simulate(model, traj, model.substeps_per_control).cumulative_per_control_step.back();
}

double max_dist_frac(const std::vector<double>& a, const std::vector<double>& b, double range) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m / range;
}

} // namespace

MultiInitOutcome multi_init_study(const ReservoirModel& model, const SurrogateModel& proxy,
                                  const std::vector<std::pair<std::string, ControlTrajectory>>& inits,
                                  const ConstraintSpec& spec, const OptimizerConfig& cfg_physics,
                                  const OptimizerConfig& cfg_proxy, const Dataset& train_data,
                                  double init_gate, double final_gate) {
    if (inits.size() < 3)
        throw ArgumentError("multi_init_study: need >= 3 initializations spanning "
                            "conservative and aggressive profiles");
    const OodEnvelope env = OodEnvelope::from_dataset(train_data);
    const double range = spec.range();

    MultiInitOutcome outcome;
    outcome.table.name = "multi-init";
    outcome.table.columns = {"init",          "status",        "J0_sim_m3",
                             "J0_proxy_m3",   "init_rel_err",  "J_physics_m3",
                             "J_proxy_pred_m3", "J_realized_m3", "final_rel_err",
                             "realized_vs_physics", "traj_dist_frac", "ood",
                             "divergence",    "problematic"};

    for (const auto& [name, u0] : inits) {
        MultiInitRow row;
        row.name = name;
        row.u0 = u0;
        try {
            row.j0_sim = simulate_J(model, u0);
            row.j0_proxy = forward(proxy, u0.values);
            row.init_rel_err = relative_error(row.j0_proxy, row.j0_sim);

            row.physics = optimize_physics(model, u0, spec, cfg_physics);
            row.proxy = optimize_proxy(proxy, u0, spec, cfg_proxy);
            row.j_proxy_star = row.proxy.J_star_est;
            row.j_realized = simulate_J(model, row.proxy.u_star);
            row.final_rel_err = relative_error(row.j_proxy_star, row.j_realized);
            row.realized_vs_physics = relative_error(row.j_realized, row.physics.J_star_est);
            row.traj_distance_frac =
                max_dist_frac(row.proxy.u_star.values, row.physics.u_star.values, range);
            row.ood = env.is_ood(row.proxy.u_star.values);
            row.divergence = row.traj_distance_frac > 0.10;
            row.problematic =
                row.final_rel_err > final_gate || row.realized_vs_physics > final_gate;
            row.status = "ok";
        } catch (const std::exception& e) {
            row.failed = true;
            row.status = e.what();
        }

        outcome.table.rows.push_back(
            {Cell::s(row.name), Cell::s(row.failed ? row.status : "ok"), Cell::n(row.j0_sim),
             Cell::n(row.j0_proxy), Cell::n(row.init_rel_err), Cell::n(row.physics.J_star_est),
             Cell::n(row.j_proxy_star), Cell::n(row.j_realized), Cell::n(row.final_rel_err),
             Cell::n(row.realized_vs_physics), Cell::n(row.traj_distance_frac),
             Cell::s(row.ood ? "yes" : "no"), Cell::s(row.divergence ? "yes" : "no"),
             Cell::s(row.problematic ? "yes" : "no")});
        outcome.rows.push_back(std::move(row));
    }

    outcome.table.add_provenance("model_fingerprint", model.config_fingerprint);
    outcome.table.add_provenance("init_gate", fmt_g17(init_gate));
    outcome.table.add_provenance("final_gate", fmt_g17(final_gate));
    outcome.table.add_provenance("proxy_train_seed", std::to_string(proxy.meta.seed));
    outcome.table.add_provenance("constraints",
                                 fmt_g17(spec.p_min) + " " + fmt_g17(spec.p_max) + " " +
                                     fmt_g17(spec.dp_max) + " " + (spec.monotone ? "1" : "0"));
    return outcome;
}

SamplingComparisonOutcome sampling_comparison(const ModelConfig& config,
                                              const std::vector<SamplingStrategy>& strategies,
                                              int n, const ConstraintSpec& spec,
                                              const std::vector<double>& step_end_times,
                                              const OptimizerConfig& cfg_proxy, std::uint64_t seed,
                                              const TrainConfig& train_cfg, int threads) {
    if (strategies.empty()) throw ArgumentError("sampling_comparison: no strategies given");
    const ReservoirModel model = build_model(config);
    const auto inits = standard_initializations(spec, step_end_times);

    // Reference values at the standard inits are strategy-independent.
    std::vector<double> j0_sim(inits.size());
    for (std::size_t i = 0; i < inits.size(); ++i) j0_sim[i] = simulate_J(model, inits[i].second);

    SamplingComparisonOutcome outcome;
    outcome.table.name = "sampling-comparison";
    outcome.table.columns = {"strategy",      "coverage",       "mean_init_err", "mean_final_err",
                             "max_final_err", "test_r2",        "test_mre",      "n_ood"};

    const int n_test = std::max(20, n / 5);
    for (SamplingStrategy strategy : strategies) {
        SamplingStrategyResult r;
        r.name = strategy_name(strategy);

        const Dataset ds = build_dataset(config, strategy, n, seed, spec, step_end_times, threads);
        TrainConfig tc = train_cfg;
        tc.rng_seed = seed;
        auto [proxy, train_report] = train(ds, tc);
        (void)train_report;

        const Dataset test_ds = build_dataset(config, strategy, n_test, Rng::derive(seed, 101),
                                              spec, step_end_times, threads);
        r.test_metrics = evaluate_metrics(proxy, test_ds);
        for (const auto& s : test_ds.samples)
            r.scatter.emplace_back(s.J, forward(proxy, s.trajectory.values));

        const OodEnvelope env = OodEnvelope::from_dataset(ds);
        double init_sum = 0.0, final_sum = 0.0;
        for (std::size_t i = 0; i < inits.size(); ++i) {
            init_sum += relative_error(forward(proxy, inits[i].second.values), j0_sim[i]);
            const OptimizationResult popt = optimize_proxy(proxy, inits[i].second, spec, cfg_proxy);
            const double j_real = simulate_J(model, popt.u_star);
            const double ferr = relative_error(popt.J_star_est, j_real);
            final_sum += ferr;
            r.max_final_err = std::max(r.max_final_err, ferr);
            if (env.is_ood(popt.u_star.values)) ++r.n_ood;
        }
        r.mean_init_err = init_sum / static_cast<double>(inits.size());
        r.mean_final_err = final_sum / static_cast<double>(inits.size());
        r.coverage = r.n_ood == 0
                         ? "in-distribution"
                         : (r.n_ood <= static_cast<int>(inits.size()) / 2
                                ? "partially out-of-distribution"
                                : "frequently out-of-distribution");

        outcome.table.rows.push_back({Cell::s(r.name), Cell::s(r.coverage),
                                      Cell::n(r.mean_init_err), Cell::n(r.mean_final_err),
                                      Cell::n(r.max_final_err), Cell::n(r.test_metrics.r2),
                                      Cell::n(r.test_metrics.mean_relative_error),
                                      Cell::n(r.n_ood)});
        outcome.rows.push_back(std::move(r));
    }

    outcome.table.add_provenance("model_fingerprint", config.fingerprint());
    outcome.table.add_provenance("n", std::to_string(n));
    outcome.table.add_provenance("n_test", std::to_string(n_test));
    outcome.table.add_provenance("seed", std::to_string(seed));
    outcome.table.add_provenance("constraints",
                                 fmt_g17(spec.p_min) + " " + fmt_g17(spec.p_max) + " " +
                                     fmt_g17(spec.dp_max) + " " + (spec.monotone ? "1" : "0"));
    return outcome;
}

BenchmarkOutcome benchmark_study(const ReservoirModel& model, const SurrogateModel& proxy,
                                 const ControlTrajectory& u0, const ConstraintSpec& spec,
                                 const OptimizerConfig& cfg_physics,
                                 const OptimizerConfig& cfg_proxy) {
    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point t0) {
        return std::chrono::duration<double>(clock::now() - t0).count();
    };

    BenchmarkOutcome out;
    // Warm-up runs excluded from timing.
    (void)simulate_J(model, u0);
    (void)forward(proxy, u0.values);

    {
        const auto t0 = clock::now();
        (void)simulate_J(model, u0);
        out.numbers.sim_eval_s = seconds_since(t0);
    }
    {
        constexpr int reps = 1000;
        const auto t0 = clock::now();
        double sink = 0.0;
        for (int i = 0; i < reps; ++i) sink += forward(proxy, u0.values);
        out.numbers.proxy_eval_s = seconds_since(t0) / reps;
        if (!std::isfinite(sink)) throw NumericError("benchmark: non-finite proxy output", sink);
    }
    {
        const auto t0 = clock::now();
        out.physics_result = optimize_physics(model, u0, spec, cfg_physics);
        out.numbers.physics_opt_s = seconds_since(t0);
    }
    {
        const auto t0 = clock::now();
        out.proxy_result = optimize_proxy(proxy, u0, spec, cfg_proxy);
        out.numbers.proxy_opt_s = seconds_since(t0);
    }
    out.numbers.physics_evals = out.physics_result.n_objective_evals;
    out.numbers.proxy_evals = out.proxy_result.n_objective_evals;
    out.numbers.eval_speedup = out.numbers.proxy_eval_s > 0.0
                                   ? out.numbers.sim_eval_s / out.numbers.proxy_eval_s
                                   : std::numeric_limits<double>::infinity();
    out.numbers.opt_speedup = out.numbers.proxy_opt_s > 0.0
                                  ? out.numbers.physics_opt_s / out.numbers.proxy_opt_s
                                  : std::numeric_limits<double>::infinity();

    // Deterministic cells only; wall times live in the provenance sidecar so
    // CSV reruns stay byte-identical.
    out.table.name = "benchmark";
    out.table.columns = {"metric", "physics", "proxy"};
    out.table.rows.push_back({Cell::s("objective_evals"), Cell::n(out.numbers.physics_evals),
                              Cell::n(out.numbers.proxy_evals)});
    out.table.rows.push_back(
        {Cell::s("iterations"),
         Cell::n(static_cast<double>(out.physics_result.iterate_history.size()) - 1),
         Cell::n(static_cast<double>(out.proxy_result.iterate_history.size()) - 1)});
    out.table.rows.push_back({Cell::s("J_star_m3"), Cell::n(out.physics_result.J_star_est),
                              Cell::n(out.proxy_result.J_star_est)});
    out.table.add_provenance("model_fingerprint", model.config_fingerprint);
    out.table.add_provenance("sim_eval_s", fmt_g17(out.numbers.sim_eval_s));
    out.table.add_provenance("proxy_eval_s", fmt_g17(out.numbers.proxy_eval_s));
    out.table.add_provenance("physics_opt_s", fmt_g17(out.numbers.physics_opt_s));
    out.table.add_provenance("proxy_opt_s", fmt_g17(out.numbers.proxy_opt_s));
    out.table.add_provenance("eval_speedup", fmt_g17(out.numbers.eval_speedup));
    out.table.add_provenance("opt_speedup", fmt_g17(out.numbers.opt_speedup));
    return out;
}

} // namespace resopt
