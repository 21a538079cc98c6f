// resopt: surrogate-accelerated well-control optimization for stress-sensitive
// reservoirs. Single binary, subcommand style; every run is scriptable and
// seed-reproducible.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "resopt/errors.hpp"
#include "resopt/optimizer.hpp"
#include "resopt/projection.hpp"
#include "resopt/reservoir.hpp"
#include "resopt/rng.hpp"
#include "resopt/sampling.hpp"
#include "resopt/surrogate.hpp"
#include "resopt/trajectory.hpp"
#include "resopt/util.hpp"
#include "resopt/version.hpp"
#include "resopt/workflow.hpp"

namespace fs = std::filesystem;
using namespace resopt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;   // unknown flag, missing required option
constexpr int kExitConfig = 3;  // config/schema violation, malformed input file
constexpr int kExitNumeric = 4; // solver or coupling failure
constexpr int kExitInternal = 5;

struct ConstraintFlags {
    double p_min = 10.0e6, p_max = 38.0e6, dp_max = 3.0e6;
    bool monotone = false;

    ConstraintSpec spec() const { return ConstraintSpec{p_min, p_max, dp_max, monotone}; }
    void attach(CLI::App* cmd) {
        cmd->add_option("--p-min", p_min, "Minimum allowable BHP (Pa)")->capture_default_str();
        cmd->add_option("--p-max", p_max, "Maximum allowable BHP (Pa)")->capture_default_str();
        cmd->add_option("--dp-max", dp_max, "Maximum step-to-step BHP change (Pa)")
            ->capture_default_str();
        cmd->add_flag("--monotone", monotone, "Enforce non-increasing BHP trajectories");
    }
};

struct TimeGridFlags {
    int steps = 20;
    double horizon_days = 3600.0;
    double ratio = 1.25;

    std::vector<double> grid() const { return geometric_time_grid(steps, horizon_days, ratio); }
    void attach(CLI::App* cmd) {
        cmd->add_option("--steps", steps, "Number of control steps T")->capture_default_str();
        cmd->add_option("--horizon-days", horizon_days, "Production horizon (days)")
            ->capture_default_str();
        cmd->add_option("--time-ratio", ratio, "Geometric growth of control-step lengths")
            ->capture_default_str();
    }
};

struct OptimizerFlags {
    int max_iters = 0; // 0: engine default (physics 40, proxy 200)
    double step_init = 0.5e6;
    double fd_step = 1e4;
    double grad_tol = 1e-4;
    int threads = 0;

    OptimizerConfig config(bool physics) const {
        OptimizerConfig cfg;
        cfg.max_iters = max_iters > 0 ? max_iters : (physics ? 40 : 200);
        cfg.step_init = step_init;
        cfg.fd_step = fd_step;
        cfg.grad_tol = grad_tol;
        cfg.threads = resolve_threads(threads);
        return cfg;
    }
    void attach(CLI::App* cmd) {
        cmd->add_option("--max-iters", max_iters,
                        "Optimizer iteration cap (0 = engine default: physics 40, proxy 200)")
            ->capture_default_str();
        cmd->add_option("--step-init", step_init, "Initial line-search step (Pa)")
            ->capture_default_str();
        cmd->add_option("--fd-step", fd_step, "Finite-difference step (Pa)")->capture_default_str();
        cmd->add_option("--grad-tol", grad_tol, "Projected-gradient stopping tolerance")
            ->capture_default_str();
    }
};

ControlTrajectory resolve_init(const std::string& init_file, const std::string& preset,
                               const ConstraintSpec& spec, const std::vector<double>& times) {
    if (!init_file.empty()) {
        ControlTrajectory traj = read_trajectory_csv(init_file);
        if (!is_feasible(traj.values, spec))
            throw ConfigError("initial trajectory in " + init_file +
                              " violates the constraint spec");
        return traj;
    }
    for (auto& [name, traj] : standard_initializations(spec, times))
        if (name == preset) return traj;
    throw ConfigError("unknown --init-preset '" + preset +
                      "' (expected conservative-hold, aggressive-ramp, linear-ramp, "
                      "moderate-ramp, late-decline, or zigzag)");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory: " + dir);
}

void write_result_txt(const std::string& path, const OptimizationResult& res) {
    std::ofstream out(path);
    const CostSummary cost = count_report(res);
    out << "J_star_m3 " << fmt_g17(res.J_star_est) << '\n';
    out << "termination " << termination_name(res.termination_reason) << '\n';
    out << "iterations " << cost.iterations << '\n';
    out << "objective_evals " << cost.n_objective_evals << '\n';
    out << "gradient_evals " << cost.n_gradient_evals << '\n';
    out << "wall_time_s " << fmt_g17(cost.wall_time_s) << '\n';
    out << "mean_eval_time_s " << fmt_g17(cost.mean_eval_time_s) << '\n';
}

void write_validation_csv(const std::string& path, const ValidationReport& rep) {
    std::ofstream out(path);
    out << "J_proxy_m3,J_sim_m3,relative_error,pass,retrain_recommended\n";
    out << fmt_g17(rep.J_proxy) << ',' << fmt_g17(rep.J_sim) << ',' << fmt_g17(rep.relative_error)
        << ',' << (rep.pass ? "yes" : "no") << ',' << (rep.retrain_recommended ? "yes" : "no")
        << '\n';
}

int run(int argc, char** argv) {
    CLI::App app{
        "resopt: coupled flow-geomechanics well-control optimization with a neural-network "
        "surrogate.\nExit codes: 0 success, 2 usage error, 3 configuration/schema error, "
        "4 numerical error, 5 internal error."};
    app.require_subcommand(1);
    std::ostringstream version;
    version << "resopt " << kToolVersion << " (schemas: " << kTrajectoryCsvSchema << ", "
            << kSimulationCsvSchema << ", " << kDatasetCsvSchema << ", " << kSurrogateFileSchema
            << ", " << kDatasetMetaSchema << ")";
    app.set_version_flag("--version", version.str());

    // ---- simulate ----
    auto* cmd_sim = app.add_subcommand("simulate", "Run the coupled simulator on a trajectory");
    std::string sim_model, sim_traj, sim_out;
    int sim_substeps = 0;
    cmd_sim->add_option("--model", sim_model, "Model config file")->required();
    cmd_sim->add_option("--trajectory", sim_traj, "Trajectory CSV (step,end_time_days,bhp_pa)")
        ->required();
    cmd_sim->add_option("--out", sim_out, "Output simulation CSV")->required();
    cmd_sim->add_option("--substeps", sim_substeps, "Substeps per control step (0 = config value)");
    cmd_sim->callback([&] {
        const ModelConfig cfg = ModelConfig::from_file(sim_model);
        const ReservoirModel model = build_model(cfg);
        const ControlTrajectory traj = read_trajectory_csv(sim_traj);
        const int substeps = sim_substeps > 0 ? sim_substeps : cfg.substeps_per_control;
        const SimulationResult res = simulate(model, traj, substeps);
        write_simulation_csv(sim_out, res, traj);
        std::cout << "J_m3 " << fmt_g17(res.cumulative_per_control_step.back())
                  << " mass_balance_error " << fmt_g17(res.mass_balance_error) << '\n';
    });

    // ---- gen-data ----
    auto* cmd_gen = app.add_subcommand("gen-data", "Generate a labeled training dataset");
    std::string gen_model, gen_out, gen_strategy = "combined";
    int gen_n = 100, gen_threads = 0;
    std::uint64_t gen_seed = 0;
    double gen_noise_frac = 0.02, gen_window_frac = 0.10;
    ConstraintFlags gen_cons;
    TimeGridFlags gen_grid;
    cmd_gen->add_option("--model", gen_model, "Model config file")->required();
    cmd_gen->add_option("--strategy", gen_strategy,
                        "linear-noise | moving-uniform | variable-noise | linear | "
                        "constant-or-decline | combined")
        ->capture_default_str();
    cmd_gen->add_option("--n", gen_n, "Number of samples")->capture_default_str();
    cmd_gen->add_option("--seed", gen_seed, "RNG seed")->capture_default_str();
    cmd_gen->add_option("--out", gen_out, "Output dataset CSV (sidecar .meta written too)")
        ->required();
    cmd_gen->add_option("--threads", gen_threads, "Labeling threads (0 = hardware)")
        ->capture_default_str();
    cmd_gen->add_option("--noise-frac", gen_noise_frac, "Noise sd as a fraction of the BHP range")
        ->capture_default_str();
    cmd_gen->add_option("--window-frac", gen_window_frac,
                        "Moving-uniform window as a fraction of the BHP range")
        ->capture_default_str();
    gen_cons.attach(cmd_gen);
    gen_grid.attach(cmd_gen);
    cmd_gen->callback([&] {
        const ModelConfig cfg = ModelConfig::from_file(gen_model);
        GeneratorParams params;
        params.noise_sd_frac = gen_noise_frac;
        params.moving_window_frac = gen_window_frac;
        const Dataset ds =
            build_dataset(cfg, parse_strategy(gen_strategy), gen_n, gen_seed, gen_cons.spec(),
                          gen_grid.grid(), resolve_threads(gen_threads), params);
        write_dataset_csv(gen_out, ds);
        std::cout << "samples " << ds.size() << " written " << gen_out << '\n';
    });

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "Train the surrogate on a dataset");
    std::string train_data, train_out, train_report_path;
    TrainConfig tc;
    cmd_train->add_option("--data", train_data, "Dataset CSV (with .meta sidecar)")->required();
    cmd_train->add_option("--out-model", train_out, "Output surrogate model file")->required();
    cmd_train->add_option("--seed", tc.rng_seed, "RNG seed")->capture_default_str();
    cmd_train->add_option("--report", train_report_path, "Optional per-epoch loss CSV");
    cmd_train->add_option("--lr", tc.learning_rate, "Learning rate")->capture_default_str();
    cmd_train->add_option("--batch", tc.batch_size, "Batch size")->capture_default_str();
    cmd_train->add_option("--epochs", tc.max_epochs, "Epoch cap")->capture_default_str();
    cmd_train->add_option("--patience", tc.early_stop_patience, "Early-stopping patience (epochs)")
        ->capture_default_str();
    cmd_train->add_option("--l2", tc.l2_weight_decay, "L2 weight decay")->capture_default_str();
    cmd_train->add_option("--val-frac", tc.val_fraction, "Validation fraction")
        ->capture_default_str();
    cmd_train->callback([&] {
        const Dataset ds = read_dataset_csv(train_data);
        auto [model, report] = train(ds, tc);
        save_model(model, train_out);
        if (!train_report_path.empty()) write_train_report_csv(train_report_path, report);
        std::cout << "epochs_run " << report.epochs_run << " best_epoch " << report.best_epoch
                  << " best_val_mse " << fmt_g17(report.best_val_mse) << '\n';
    });

    // ---- optimize ----
    auto* cmd_opt = app.add_subcommand("optimize", "Run constrained optimization");
    std::string opt_engine, opt_model, opt_proxy, opt_init_file, opt_preset = "linear-ramp";
    std::string opt_out, opt_retrain_data, opt_retrain_out;
    double opt_tol = 0.05;
    ConstraintFlags opt_cons;
    TimeGridFlags opt_grid;
    OptimizerFlags opt_flags;
    cmd_opt->add_option("--engine", opt_engine, "physics | proxy | hybrid | proxy-assisted")
        ->required()
        ->check(CLI::IsMember({"physics", "proxy", "hybrid", "proxy-assisted"}));
    cmd_opt->add_option("--model", opt_model, "Model config file (physics/hybrid/proxy-assisted)");
    cmd_opt->add_option("--proxy", opt_proxy, "Surrogate model file (proxy/hybrid/proxy-assisted)");
    cmd_opt->add_option("--init", opt_init_file, "Initial trajectory CSV");
    cmd_opt->add_option("--init-preset", opt_preset, "Named standard initialization")
        ->capture_default_str();
    cmd_opt->add_option("--out", opt_out, "Output directory")->required();
    cmd_opt->add_option("--tol", opt_tol, "Hybrid validation gate (relative error)")
        ->capture_default_str();
    cmd_opt->add_option("--retrain-data", opt_retrain_data,
                        "hybrid: dataset to refine when validation is requested");
    cmd_opt->add_option("--retrain-out", opt_retrain_out, "hybrid: path for the refined model");
    cmd_opt->add_option("--threads", opt_flags.threads, "Worker threads (0 = hardware)")
        ->capture_default_str();
    opt_cons.attach(cmd_opt);
    opt_grid.attach(cmd_opt);
    opt_flags.attach(cmd_opt);
    cmd_opt->callback([&] {
        const ConstraintSpec spec = opt_cons.spec();
        const bool needs_model = opt_engine != "proxy";
        const bool needs_proxy = opt_engine != "physics";
        if (needs_model && opt_model.empty())
            throw ConfigError("--model is required for engine '" + opt_engine + "'");
        if (needs_proxy && opt_proxy.empty())
            throw ConfigError("--proxy is required for engine '" + opt_engine + "'");
        ensure_dir(opt_out);

        ModelConfig cfg;
        ReservoirModel model;
        if (needs_model) {
            cfg = ModelConfig::from_file(opt_model);
            model = build_model(cfg);
        }
        SurrogateModel proxy;
        if (needs_proxy) proxy = load_model(opt_proxy);

        std::vector<double> times = opt_grid.grid();
        if (needs_proxy && opt_init_file.empty() &&
            proxy.input_dim() != static_cast<int>(times.size())) {
            // Keep the preset grid consistent with the surrogate input dimension.
            times = geometric_time_grid(proxy.input_dim(), opt_grid.horizon_days, opt_grid.ratio);
        }
        const ControlTrajectory u0 = resolve_init(opt_init_file, opt_preset, spec, times);

        const auto out_path = [&](const char* name) { return (fs::path(opt_out) / name).string(); };
        if (opt_engine == "physics") {
            const OptimizationResult res =
                optimize_physics(model, u0, spec, opt_flags.config(true));
            write_trajectory_csv(out_path("optimum.csv"), res.u_star);
            write_history_csv(out_path("history.csv"), res);
            write_result_txt(out_path("result.txt"), res);
            std::cout << "J_star_m3 " << fmt_g17(res.J_star_est) << '\n';
        } else if (opt_engine == "proxy") {
            const OptimizationResult res = optimize_proxy(proxy, u0, spec, opt_flags.config(false));
            write_trajectory_csv(out_path("optimum.csv"), res.u_star);
            write_history_csv(out_path("history.csv"), res);
            write_result_txt(out_path("result.txt"), res);
            std::cout << "J_star_m3 " << fmt_g17(res.J_star_est) << '\n';
        } else if (opt_engine == "hybrid") {
            const OptimizationResult res = optimize_proxy(proxy, u0, spec, opt_flags.config(false));
            write_trajectory_csv(out_path("optimum.csv"), res.u_star);
            write_history_csv(out_path("history.csv"), res);
            write_result_txt(out_path("result.txt"), res);
            ValidationReport rep;
            if (!opt_retrain_data.empty()) {
                Dataset ds = read_dataset_csv(opt_retrain_data);
                TrainConfig rtc;
                rtc.rng_seed = ds.seed;
                auto [r, refined] =
                    hybrid_validate_refine(proxy, model, res.u_star, opt_tol, ds, rtc);
                rep = r;
                if (!opt_retrain_out.empty()) save_model(refined, opt_retrain_out);
            } else {
                rep = hybrid_validate(proxy, model, res.u_star, opt_tol);
            }
            write_validation_csv(out_path("validation.csv"), rep);
            std::cout << "J_proxy_m3 " << fmt_g17(rep.J_proxy) << " J_sim_m3 "
                      << fmt_g17(rep.J_sim) << " relative_error " << fmt_g17(rep.relative_error)
                      << " pass " << (rep.pass ? "yes" : "no") << '\n';
        } else { // proxy-assisted
            auto [res, savings] = proxy_assisted(model, proxy, u0, spec, opt_flags.config(true),
                                                 opt_flags.config(false));
            write_trajectory_csv(out_path("optimum.csv"), res.u_star);
            write_history_csv(out_path("history.csv"), res);
            write_result_txt(out_path("result.txt"), res);
            std::ofstream sv(out_path("savings.csv"));
            sv << "warm_physics_evals,cold_physics_evals,proxy_evals,warm_J_m3,cold_J_m3\n";
            sv << savings.warm_physics_evals << ',' << savings.cold_physics_evals << ','
               << savings.proxy_evals << ',' << fmt_g17(savings.warm_J) << ','
               << fmt_g17(savings.cold_J) << '\n';
            std::cout << "J_star_m3 " << fmt_g17(res.J_star_est) << " warm_evals "
                      << savings.warm_physics_evals << " cold_evals " << savings.cold_physics_evals
                      << '\n';
        }
    });

    // ---- study ----
    auto* cmd_study = app.add_subcommand("study", "Run a multi-run study and write its tables");
    std::string study_kind, study_model, study_proxy, study_data, study_out, study_traj;
    std::string study_strategies = "linear-noise,constant-or-decline,combined";
    std::string study_preset = "linear-ramp";
    int study_n = 100, study_threads = 0;
    std::uint64_t study_seed = 0;
    double init_gate = 0.02, final_gate = 0.05;
    ConstraintFlags study_cons;
    TimeGridFlags study_grid;
    OptimizerFlags study_opt;
    cmd_study->add_option("--kind", study_kind, "baseline | multi-init | sampling | benchmark")
        ->required()
        ->check(CLI::IsMember({"baseline", "multi-init", "sampling", "benchmark"}));
    cmd_study->add_option("--model", study_model, "Model config file")->required();
    cmd_study->add_option("--proxy", study_proxy, "Surrogate model file (multi-init/benchmark)");
    cmd_study->add_option("--data", study_data, "Training dataset CSV (multi-init OOD envelope)");
    cmd_study->add_option("--out", study_out, "Output directory")->required();
    cmd_study->add_option("--trajectory", study_traj,
                          "baseline: trajectory CSV (default: aggressive ramp)");
    cmd_study->add_option("--strategies", study_strategies, "sampling: comma-separated strategies")
        ->capture_default_str();
    cmd_study->add_option("--init-preset", study_preset, "benchmark: initialization preset")
        ->capture_default_str();
    cmd_study->add_option("--n", study_n, "sampling: dataset size per strategy")
        ->capture_default_str();
    cmd_study->add_option("--seed", study_seed, "RNG seed")->capture_default_str();
    cmd_study->add_option("--threads", study_threads, "Worker threads (0 = hardware)")
        ->capture_default_str();
    cmd_study->add_option("--init-gate", init_gate, "Initial prediction error gate")
        ->capture_default_str();
    cmd_study->add_option("--final-gate", final_gate, "Final solution error gate")
        ->capture_default_str();
    study_cons.attach(cmd_study);
    study_grid.attach(cmd_study);
    study_opt.attach(cmd_study);
    cmd_study->callback([&] {
        study_opt.threads = study_threads;
        const ModelConfig cfg = ModelConfig::from_file(study_model);
        const ConstraintSpec spec = study_cons.spec();
        ensure_dir(study_out);
        const auto out_path = [&](const std::string& name) {
            return (fs::path(study_out) / name).string();
        };

        if (study_kind == "baseline") {
            std::vector<double> times = study_grid.grid();
            ControlTrajectory traj;
            if (!study_traj.empty()) {
                traj = read_trajectory_csv(study_traj);
                times = traj.step_end_times;
            } else {
                traj = resolve_init("", "aggressive-ramp", spec, times);
            }
            std::vector<std::pair<std::string, ModelConfig>> presets;
            for (const StressScenario& sc : default_scenarios())
                presets.emplace_back(sc.name, apply_scenario(cfg, sc.alpha_base));
            const BaselineTable table = baseline_study(presets, traj);
            table.write_csv(out_path("baseline.csv"));
            write_trajectory_csv(out_path("baseline_trajectory.csv"), traj);
            StudyTable prov;
            prov.name = "baseline";
            prov.add_provenance("model_fingerprint", cfg.fingerprint());
            std::string times_text;
            for (double t : times) times_text += (times_text.empty() ? "" : " ") + fmt_g17(t);
            prov.add_provenance("step_end_times", times_text);
            prov.write_provenance(out_path("baseline.prov.txt"));
            std::cout << "scenarios " << table.scenario.size() << " written "
                      << out_path("baseline.csv") << '\n';
        } else if (study_kind == "multi-init") {
            if (study_proxy.empty() || study_data.empty())
                throw ConfigError("multi-init study requires --proxy and --data");
            const ReservoirModel model = build_model(cfg);
            const SurrogateModel proxy = load_model(study_proxy);
            const Dataset ds = read_dataset_csv(study_data);
            const std::vector<double> times =
                ds.step_end_times.empty() ? study_grid.grid() : ds.step_end_times;
            const auto inits = standard_initializations(spec, times);
            MultiInitOutcome outcome =
                multi_init_study(model, proxy, inits, spec, study_opt.config(true),
                                 study_opt.config(false), ds, init_gate, final_gate);
            outcome.table.add_provenance("seed", std::to_string(study_seed));
            outcome.table.write_csv(out_path("multi_init.csv"));
            outcome.table.write_provenance(out_path("multi_init.prov.txt"));
            for (const MultiInitRow& row : outcome.rows) {
                if (row.failed) continue;
                write_trajectory_csv(out_path("traj_" + row.name + "_physics.csv"),
                                     row.physics.u_star);
                write_trajectory_csv(out_path("traj_" + row.name + "_proxy.csv"),
                                     row.proxy.u_star);
            }
            std::cout << "inits " << outcome.rows.size() << " written "
                      << out_path("multi_init.csv") << '\n';
        } else if (study_kind == "sampling") {
            std::vector<SamplingStrategy> strategies;
            std::istringstream ss(study_strategies);
            std::string tok;
            while (std::getline(ss, tok, ',')) strategies.push_back(parse_strategy(tok));
            TrainConfig train_cfg;
            train_cfg.rng_seed = study_seed;
            SamplingComparisonOutcome outcome = sampling_comparison(
                cfg, strategies, study_n, spec, study_grid.grid(), study_opt.config(false),
                study_seed, train_cfg, resolve_threads(study_threads));
            outcome.table.write_csv(out_path("sampling.csv"));
            outcome.table.write_provenance(out_path("sampling.prov.txt"));
            for (const SamplingStrategyResult& r : outcome.rows) {
                std::ofstream sc(out_path("scatter_" + r.name + ".csv"));
                sc << "sample,J_sim_m3,J_proxy_m3\n";
                for (std::size_t i = 0; i < r.scatter.size(); ++i)
                    sc << (i + 1) << ',' << fmt_g17(r.scatter[i].first) << ','
                       << fmt_g17(r.scatter[i].second) << '\n';
            }
            std::cout << "strategies " << outcome.rows.size() << " written "
                      << out_path("sampling.csv") << '\n';
        } else { // benchmark
            if (study_proxy.empty()) throw ConfigError("benchmark study requires --proxy");
            const ReservoirModel model = build_model(cfg);
            const SurrogateModel proxy = load_model(study_proxy);
            std::vector<double> times = study_grid.grid();
            if (proxy.input_dim() != static_cast<int>(times.size()))
                times = geometric_time_grid(proxy.input_dim(), study_grid.horizon_days,
                                            study_grid.ratio);
            const ControlTrajectory u0 = resolve_init("", study_preset, spec, times);
            BenchmarkOutcome outcome = benchmark_study(
                model, proxy, u0, spec, study_opt.config(true), study_opt.config(false));
            outcome.table.write_csv(out_path("benchmark.csv"));
            outcome.table.write_provenance(out_path("benchmark.prov.txt"));
            std::ofstream timing(out_path("benchmark_timing.txt"));
            timing << "single_sim_eval_s " << fmt_g17(outcome.numbers.sim_eval_s) << '\n';
            timing << "single_proxy_eval_s " << fmt_g17(outcome.numbers.proxy_eval_s) << '\n';
            timing << "physics_opt_s " << fmt_g17(outcome.numbers.physics_opt_s) << '\n';
            timing << "proxy_opt_s " << fmt_g17(outcome.numbers.proxy_opt_s) << '\n';
            timing << "eval_speedup " << fmt_g17(outcome.numbers.eval_speedup) << '\n';
            timing << "opt_speedup " << fmt_g17(outcome.numbers.opt_speedup) << '\n';
            std::cout << "opt_speedup " << fmt_g17(outcome.numbers.opt_speedup) << " written "
                      << out_path("benchmark.csv") << '\n';
        }
    });

    // ---- report ----
    auto* cmd_report = app.add_subcommand("report", "Render figure-analogue CSVs and a summary");
    std::string report_dir;
    cmd_report->add_option("--dir", report_dir, "Directory with study artifacts")->required();
    cmd_report->callback([&] {
        for (const std::string& f : render_report(report_dir)) std::cout << "wrote " << f << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "error: schema: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ArgumentError& e) {
        std::cerr << "error: argument: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const CouplingError& e) {
        std::cerr << "error: coupling: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return kExitInternal;
    }
}
