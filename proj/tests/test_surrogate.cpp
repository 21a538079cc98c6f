#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "resopt/errors.hpp"
#include "resopt/rng.hpp"
#include "resopt/surrogate.hpp"

#include "support/test_util.hpp"

using namespace resopt;
using namespace resopt::testsupport;

namespace {

NormalizationStats identity_stats(int dims) {
    NormalizationStats st;
    st.input_min.assign(dims, 0.0);
    st.input_max.assign(dims, 1.0);
    st.output_min = 0.0;
    st.output_max = 1.0;
    return st;
}

// Hand-built 2-2-1 network: identity first layer, summing output layer.
SurrogateModel hand_net() {
    SurrogateModel m;
    m.layer_dims = {2, 2, 1};
    m.weights = {{1.0, 0.0, 0.0, 1.0}, {1.0, 1.0}};
    m.biases = {{0.0, 0.0}, {0.0}};
    m.norm = identity_stats(2);
    return m;
}

SurrogateModel zero_net(int input_dim, double output_min = 0.0, double output_max = 1.0) {
    SurrogateModel m;
    m.layer_dims = {input_dim, 4, 1};
    m.weights = {std::vector<double>(4 * input_dim, 0.0), std::vector<double>(4, 0.0)};
    m.biases = {std::vector<double>(4, 0.0), {0.0}};
    m.norm = identity_stats(input_dim);
    m.norm.output_min = output_min;
    m.norm.output_max = output_max;
    return m;
}

// Synthetic dataset with an arbitrary labeling function on random feasible inputs.
template <typename F>
Dataset synthetic_dataset(int n, int T, std::uint64_t seed, F&& label) {
    Dataset ds;
    ds.constraint_spec = ConstraintSpec{};
    ds.step_end_times = uniform_grid(T);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        Dataset::Sample s;
        s.trajectory.step_end_times = ds.step_end_times;
        for (int t = 0; t < T; ++t)
            s.trajectory.values.push_back(rng.uniform(10e6, 38e6));
        s.J = label(s.trajectory.values);
        s.tag = "synthetic";
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

} // namespace

TEST_CASE("normalization: endpoints, midpoint, round-trip") {
    NormalizationStats st;
    st.input_min = {10e6, 20e6};
    st.input_max = {38e6, 40e6};
    st.output_min = 100.0;
    st.output_max = 900.0;

    const auto lo = normalize_input(std::vector<double>{10e6, 20e6}, st);
    CHECK(lo[0] == 0.0);
    CHECK(lo[1] == 0.0);
    const auto hi = normalize_input(std::vector<double>{38e6, 40e6}, st);
    CHECK(hi[0] == 1.0);
    CHECK(hi[1] == 1.0);
    const auto mid = normalize_input(std::vector<double>{24e6, 30e6}, st);
    CHECK(mid[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(mid[1] == doctest::Approx(0.5).epsilon(1e-14));

    CHECK(denormalize_output(normalize_output(432.1, st), st) ==
          doctest::Approx(432.1).epsilon(1e-12));

    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double j = rng.uniform(-1e4, 1e4);
        CHECK(denormalize_output(normalize_output(j, st), st) ==
              doctest::Approx(j).epsilon(1e-12).scale(1e4));
    }
}

TEST_CASE("normalization: zero-range dimension rejected") {
    NormalizationStats st;
    st.input_min = {1.0};
    st.input_max = {1.0};
    CHECK_THROWS_AS(normalize_input(std::vector<double>{1.0}, st), ConfigError);
}

TEST_CASE("forward: zero network returns output_min") {
    const SurrogateModel m = zero_net(3, 250.0, 750.0);
    CHECK(forward(m, std::vector<double>{0.2, 0.4, 0.9}) == 250.0);
}

TEST_CASE("forward: hand-built 2-2-1 network") {
    const SurrogateModel m = hand_net();
    CHECK(forward(m, std::vector<double>{0.3, 0.4}) == doctest::Approx(0.7).epsilon(1e-14));
    // First rectifier clamps the negative pre-activation.
    CHECK(forward(m, std::vector<double>{-0.3, 0.4}) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK_THROWS_AS(forward(m, std::vector<double>{1.0, 2.0, 3.0}), ArgumentError);
}

TEST_CASE("input_gradient: zero network, hand case, dimension check") {
    const SurrogateModel z = zero_net(3);
    for (double g : input_gradient(z, std::vector<double>{0.1, 0.2, 0.3})) CHECK(g == 0.0);

    const SurrogateModel m = hand_net();
    const auto g = input_gradient(m, std::vector<double>{0.3, 0.4});
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g[1] == doctest::Approx(1.0).epsilon(1e-14));
    // Clamped unit: gradient flows only through the active rectifier.
    const auto g2 = input_gradient(m, std::vector<double>{-0.3, 0.4});
    CHECK(g2[0] == 0.0);
    CHECK(g2[1] == doctest::Approx(1.0).epsilon(1e-14));

    CHECK_THROWS_AS(input_gradient(m, std::vector<double>{1.0}), ArgumentError);
}

TEST_CASE("input_gradient matches central finite differences on a trained model") {
    const Dataset ds = synthetic_dataset(60, 6, 11, [](const std::vector<double>& u) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += (i + 1) * u[i] / 38e6;
        return 100.0 + 40.0 * s + 5.0 * std::sin(s);
    });
    TrainConfig cfg;
    cfg.rng_seed = 4;
    cfg.max_epochs = 60;
    cfg.hidden_dims = {16, 16};
    const auto [model, report] = train(ds, cfg);
    (void)report;

    Rng rng(23);
    const double h = 1e-3 * 28e6;
    int checked = 0;
    double worst = 0.0;
    while (checked < 20) {
        std::vector<double> u(6);
        for (auto& v : u) v = rng.uniform(10e6 + 2 * h, 38e6 - 2 * h);
        const auto g = input_gradient(model, u);
        bool near_kink = false;
        std::vector<double> fd(6);
        for (int i = 0; i < 6; ++i) {
            auto up = u, dn = u;
            up[i] += h;
            dn[i] -= h;
            fd[i] = (forward(model, up) - forward(model, dn)) / (2.0 * h);
        }
        double scale = 0.0;
        for (int i = 0; i < 6; ++i) scale = std::max(scale, std::abs(g[i]));
        for (int i = 0; i < 6; ++i) {
            const double rel = std::abs(fd[i] - g[i]) / std::max(scale, 1e-300);
            if (rel > 1e-5) near_kink = true;
            worst = std::max(worst, rel);
        }
        // Kink crossings inside the stencil are excluded by resampling; the
        // analytic gradient must agree elsewhere.
        if (!near_kink) ++checked;
        else worst = 0.0;
    }
    CHECK(checked == 20);
    CHECK(worst < 1e-5);
}

TEST_CASE("train: constant labels are reproduced within 1 percent") {
    // Enough coverage that the interpolant stays flat between training points.
    const Dataset ds =
        synthetic_dataset(120, 5, 2, [](const std::vector<double>&) { return 500.0; });
    TrainConfig cfg;
    cfg.rng_seed = 1;
    cfg.max_epochs = 400;       // constant-bias fit needs enough Adam steps at lr 1e-3
    cfg.l2_weight_decay = 3e-3; // decay flattens the net between training points
    cfg.early_stop_patience = 400;
    cfg.hidden_dims = {8, 8};
    const auto [model, report] = train(ds, cfg);
    (void)report;
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> u(5);
        for (auto& v : u) v = rng.uniform(10e6, 38e6);
        CHECK(forward(model, u) == doctest::Approx(500.0).epsilon(0.01));
    }
}

TEST_CASE("train: linear function of one input reaches high validation R2") {
    const Dataset ds = synthetic_dataset(
        100, 5, 8, [](const std::vector<double>& u) { return 50.0 + 800.0 * (u[0] - 10e6) / 28e6; });
    TrainConfig cfg;
    cfg.rng_seed = 6;
    const auto [model, report] = train(ds, cfg);
    (void)report;

    const Dataset test = synthetic_dataset(
        40, 5, 99, [](const std::vector<double>& u) { return 50.0 + 800.0 * (u[0] - 10e6) / 28e6; });
    const RegressionMetrics m = evaluate_metrics(model, test);
    CHECK(m.r2_defined);
    CHECK(m.r2 > 0.99);
}

TEST_CASE("train: deterministic given the seed, byte-identical model files") {
    TempDir dir("surrogate_det");
    const Dataset ds = synthetic_dataset(40, 4, 12, [](const std::vector<double>& u) {
        return (u[0] + 0.5 * u[1]) / 1e5;
    });
    TrainConfig cfg;
    cfg.rng_seed = 77;
    cfg.max_epochs = 40;
    cfg.hidden_dims = {8, 8};
    const auto [m1, r1] = train(ds, cfg);
    const auto [m2, r2] = train(ds, cfg);
    CHECK(r1.epochs_run == r2.epochs_run);
    save_model(m1, dir.file("a.txt"));
    save_model(m2, dir.file("b.txt"));
    CHECK(files_identical(dir.file("a.txt"), dir.file("b.txt")));
}

TEST_CASE("train: best-so-far validation loss is non-increasing") {
    const Dataset ds = synthetic_dataset(50, 5, 9, [](const std::vector<double>& u) {
        return u[0] / 1e5 + u[3] / 2e5;
    });
    TrainConfig cfg;
    cfg.rng_seed = 10;
    cfg.max_epochs = 80;
    cfg.hidden_dims = {8, 8};
    const auto [model, report] = train(ds, cfg);
    (void)model;
    double best = std::numeric_limits<double>::infinity();
    for (double v : report.val_mse) {
        const double new_best = std::min(best, v);
        CHECK(new_best <= best);
        best = new_best;
    }
    CHECK(report.best_val_mse == doctest::Approx(best).epsilon(1e-14));
}

TEST_CASE("train: rejects tiny and non-finite datasets") {
    const Dataset tiny = synthetic_dataset(5, 4, 1, [](const std::vector<double>&) { return 1.0; });
    TrainConfig cfg;
    CHECK_THROWS_WITH_AS(train(tiny, cfg), doctest::Contains("too small"), ConfigError);

    Dataset bad = synthetic_dataset(20, 4, 1, [](const std::vector<double>&) { return 1.0; });
    bad.samples[3].J = std::nan("");
    CHECK_THROWS_AS(train(bad, cfg), ConfigError);
}

TEST_CASE("compute_metrics: exact, mean-predictor, and hand-computed cases") {
    const std::vector<double> targets = {1.0, 2.0, 3.0};
    const RegressionMetrics exact = compute_metrics(targets, targets);
    CHECK(exact.mae == 0.0);
    CHECK(exact.rmse == 0.0);
    CHECK(exact.r2 == 1.0);

    const std::vector<double> mean_pred = {2.0, 2.0, 2.0};
    const RegressionMetrics mean_m = compute_metrics(mean_pred, targets);
    CHECK(mean_m.r2 == doctest::Approx(0.0).epsilon(1e-14));

    const std::vector<double> preds = {1.0, 2.0, 4.0};
    const RegressionMetrics hand = compute_metrics(preds, targets);
    CHECK(hand.mae == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(hand.rmse == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(hand.r2 == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(hand.mean_relative_error == doctest::Approx((0.0 + 0.0 + 1.0 / 3.0) / 3.0).epsilon(1e-14));
}

TEST_CASE("compute_metrics: degenerate target variance flagged, J <= 0 excluded from MRE") {
    const std::vector<double> targets = {5.0, 5.0, 5.0};
    const RegressionMetrics m = compute_metrics(std::vector<double>{5.0, 5.0, 5.0}, targets);
    CHECK_FALSE(m.r2_defined);
    CHECK(std::isnan(m.r2));

    const std::vector<double> mixed_targets = {0.0, 2.0};
    const RegressionMetrics mm = compute_metrics(std::vector<double>{1.0, 2.2}, mixed_targets);
    CHECK(mm.n_relative_excluded == 1);
    CHECK(mm.mean_relative_error == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("save/load: round-trip reproduces forward outputs to 1e-12 relative") {
    TempDir dir("surrogate_io");
    const Dataset ds = synthetic_dataset(30, 4, 44, [](const std::vector<double>& u) {
        return u[0] / 1e5 + u[2] / 3e5;
    });
    TrainConfig cfg;
    cfg.rng_seed = 13;
    cfg.max_epochs = 30;
    cfg.hidden_dims = {8, 8};
    const auto [model, report] = train(ds, cfg);
    (void)report;
    save_model(model, dir.file("m.txt"));
    const SurrogateModel back = load_model(dir.file("m.txt"));
    CHECK(back.meta.seed == model.meta.seed);
    CHECK(back.meta.epochs_run == model.meta.epochs_run);

    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> u(4);
        for (auto& v : u) v = rng.uniform(10e6, 38e6);
        const double a = forward(model, u);
        const double b = forward(back, u);
        CHECK(std::abs(a - b) <= 1e-12 * std::max(std::abs(a), 1.0));
    }
}

TEST_CASE("load: malformed files rejected with line context") {
    TempDir dir("surrogate_badio");
    {
        std::ofstream f(dir.file("junk.txt"));
        f << "not a surrogate file\n";
    }
    CHECK_THROWS_AS(load_model(dir.file("junk.txt")), ParseError);

    const SurrogateModel m = zero_net(2);
    save_model(m, dir.file("ok.txt"));
    const std::string full = slurp(dir.file("ok.txt"));
    {
        // Drop the last two lines (a bias row and the end marker).
        std::string truncated = full;
        truncated.pop_back();
        const auto cut = truncated.find_last_of('\n');
        const auto cut2 = truncated.find_last_of('\n', cut - 1);
        std::ofstream f(dir.file("trunc.txt"), std::ios::binary);
        f << truncated.substr(0, cut2 + 1);
    }
    CHECK_THROWS_WITH_AS(load_model(dir.file("trunc.txt")), doctest::Contains("line"), ParseError);
}
