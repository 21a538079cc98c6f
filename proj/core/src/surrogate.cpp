#include "resopt/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "resopt/errors.hpp"
#include "resopt/rng.hpp"
#include "resopt/util.hpp"
#include "resopt/version.hpp"

namespace resopt {

void NormalizationStats::validate() const {
    if (input_min.size() != input_max.size())
        throw ConfigError("normalization stats: input_min/input_max lengths differ");
    for (std::size_t i = 0; i < input_min.size(); ++i)
        if (!(input_max[i] > input_min[i]))
            throw ConfigError("normalization stats: zero-range input dimension " +
                              std::to_string(i + 1));
    if (!(output_max > output_min))
        throw ConfigError("normalization stats: zero-range output");
}

std::vector<double> normalize_input(std::span<const double> u, const NormalizationStats& stats) {
    stats.validate();
    if (u.size() != stats.input_min.size())
        throw ArgumentError("normalize: input dimension mismatch");
    std::vector<double> x(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        x[i] = (u[i] - stats.input_min[i]) / (stats.input_max[i] - stats.input_min[i]);
    return x;
}

double normalize_output(double j, const NormalizationStats& stats) {
    return (j - stats.output_min) / (stats.output_max - stats.output_min);
}

double denormalize_output(double j_norm, const NormalizationStats& stats) {
    return stats.output_min + j_norm * (stats.output_max - stats.output_min);
}

void SurrogateModel::validate() const {
    if (layer_dims.size() < 2) throw ConfigError("surrogate: needs at least input and output dims");
    if (layer_dims.back() != 1) throw ConfigError("surrogate: output dimension must be 1");
    const std::size_t L = layer_dims.size() - 1;
    if (weights.size() != L || biases.size() != L)
        throw ConfigError("surrogate: layer count inconsistent with weights/biases");
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t rows = layer_dims[l + 1], cols = layer_dims[l];
        if (weights[l].size() != rows * cols)
            throw ConfigError("surrogate: weight shape mismatch at layer " + std::to_string(l + 1));
        if (biases[l].size() != rows)
            throw ConfigError("surrogate: bias shape mismatch at layer " + std::to_string(l + 1));
        for (double w : weights[l])
            if (!std::isfinite(w)) throw ConfigError("surrogate: non-finite weight");
        for (double b : biases[l])
            if (!std::isfinite(b)) throw ConfigError("surrogate: non-finite bias");
    }
    if (static_cast<int>(norm.input_min.size()) != layer_dims.front())
        throw ConfigError("surrogate: normalization stats do not match input dimension");
}

namespace {

// Dense affine layer application; rectifier applied by the caller on hidden layers.
void affine(const std::vector<double>& w, const std::vector<double>& b,
            const std::vector<double>& x, std::vector<double>& y) {
    const std::size_t rows = b.size(), cols = x.size();
    y.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        const double* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

double forward_normalized(const SurrogateModel& m, std::vector<double> x,
                          std::vector<std::vector<double>>* activations = nullptr) {
    const std::size_t L = m.weights.size();
    if (activations) {
        activations->clear();
        activations->push_back(x);
    }
    std::vector<double> y;
    for (std::size_t l = 0; l < L; ++l) {
        affine(m.weights[l], m.biases[l], x, y);
        if (l + 1 < L)
            for (auto& v : y) v = v > 0.0 ? v : 0.0;
        x = y;
        if (activations) activations->push_back(x);
    }
    return x[0];
}

} // namespace

double forward(const SurrogateModel& model, std::span<const double> u) {
    if (static_cast<int>(u.size()) != model.input_dim())
        throw ArgumentError("forward: input dimension mismatch (expected " +
                            std::to_string(model.input_dim()) + ", got " +
                            std::to_string(u.size()) + ")");
    return denormalize_output(forward_normalized(model, normalize_input(u, model.norm)),
                              model.norm);
}

std::vector<double> input_gradient(const SurrogateModel& model, std::span<const double> u) {
    if (static_cast<int>(u.size()) != model.input_dim())
        throw ArgumentError("input_gradient: input dimension mismatch");
    std::vector<std::vector<double>> act;
    forward_normalized(model, normalize_input(u, model.norm), &act);

    const std::size_t L = model.weights.size();
    // d(normalized output)/d(activation), backpropagated layer by layer.
    std::vector<double> delta{1.0};
    for (std::size_t l = L; l-- > 0;) {
        const std::size_t rows = model.biases[l].size();
        const std::size_t cols = model.layer_dims[l];
        // Hidden activations are post-rectifier: gate the incoming deltas
        // (subgradient 0 at exactly-zero pre-activations).
        if (l + 1 < L)
            for (std::size_t r = 0; r < rows; ++r)
                if (!(act[l + 1][r] > 0.0)) delta[r] = 0.0;
        std::vector<double> prev(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = delta[r];
            if (d == 0.0) continue;
            const double* wr = model.weights[l].data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) prev[c] += d * wr[c];
        }
        delta = std::move(prev);
    }

    // Chain through both normalizations: output scale and per-dimension input scale.
    const double out_range = model.norm.output_max - model.norm.output_min;
    std::vector<double> g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        g[i] = out_range * delta[i] / (model.norm.input_max[i] - model.norm.input_min[i]);
    return g;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("train config: early_stop_patience must be >= 1");
    if (l2_weight_decay < 0.0) throw ConfigError("train config: l2_weight_decay must be >= 0");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("train config: val_fraction must be in (0, 1)");
    if (hidden_dims.empty()) throw ConfigError("train config: hidden_dims must be non-empty");
    for (int h : hidden_dims)
        if (h < 1) throw ConfigError("train config: hidden dims must be >= 1");
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> mw, vw, mb, vb;
    long t = 0;
};

void expand_if_degenerate(double& lo, double& hi) {
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    if (hi - lo < 1e-12 * scale) {
        lo -= 0.5 * scale;
        hi += 0.5 * scale;
    }
}

double mse_over(const SurrogateModel& m, const std::vector<std::vector<double>>& xs,
                const std::vector<double>& ys, const std::vector<int>& idx) {
    double acc = 0.0;
    for (int i : idx) {
        const double e = forward_normalized(m, xs[i]) - ys[i];
        acc += e * e;
    }
    return acc / static_cast<double>(idx.size());
}

} // namespace

std::pair<SurrogateModel, TrainReport> train(const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(dataset.size());
    if (n < 10) throw ConfigError("train: dataset too small (need >= 10 samples, got " +
                                  std::to_string(n) + ")");
    const std::size_t T = dataset.samples.front().trajectory.values.size();
    for (const auto& s : dataset.samples) {
        if (s.trajectory.values.size() != T)
            throw ConfigError("train: trajectories have inconsistent lengths");
        if (!std::isfinite(s.J)) throw ConfigError("train: degenerate output range (non-finite J)");
        for (double v : s.trajectory.values)
            if (!std::isfinite(v)) throw ConfigError("train: non-finite trajectory value");
    }

    // Deterministic split: shuffled indices, first chunk is validation.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(Rng::derive(cfg.rng_seed, 0));
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[split_rng.uniform_int(0, i)]);
    const int n_val = std::clamp(static_cast<int>(std::lround(cfg.val_fraction * n)), 1, n - 1);
    std::vector<int> val_idx(order.begin(), order.begin() + n_val);
    std::vector<int> train_idx(order.begin() + n_val, order.end());

    // Normalization statistics from the training split only (no leakage).
    SurrogateModel model;
    model.layer_dims.push_back(static_cast<int>(T));
    for (int h : cfg.hidden_dims) model.layer_dims.push_back(h);
    model.layer_dims.push_back(1);

    NormalizationStats& stats = model.norm;
    stats.input_min.assign(T, std::numeric_limits<double>::infinity());
    stats.input_max.assign(T, -std::numeric_limits<double>::infinity());
    stats.output_min = std::numeric_limits<double>::infinity();
    stats.output_max = -std::numeric_limits<double>::infinity();
    for (int i : train_idx) {
        const auto& s = dataset.samples[i];
        for (std::size_t d = 0; d < T; ++d) {
            stats.input_min[d] = std::min(stats.input_min[d], s.trajectory.values[d]);
            stats.input_max[d] = std::max(stats.input_max[d], s.trajectory.values[d]);
        }
        stats.output_min = std::min(stats.output_min, s.J);
        stats.output_max = std::max(stats.output_max, s.J);
    }
    for (std::size_t d = 0; d < T; ++d) expand_if_degenerate(stats.input_min[d], stats.input_max[d]);
    expand_if_degenerate(stats.output_min, stats.output_max);

    // Scaled uniform fan-in initialization from the seeded stream.
    Rng init_rng(Rng::derive(cfg.rng_seed, 1));
    const std::size_t L = model.layer_dims.size() - 1;
    model.weights.resize(L);
    model.biases.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t rows = model.layer_dims[l + 1], cols = model.layer_dims[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        model.weights[l].resize(rows * cols);
        for (auto& w : model.weights[l]) w = init_rng.uniform(-bound, bound);
        model.biases[l].assign(rows, 0.0);
    }

    std::vector<std::vector<double>> xs(n);
    std::vector<double> ys(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = normalize_input(dataset.samples[i].trajectory.values, stats);
        ys[i] = normalize_output(dataset.samples[i].J, stats);
    }

    AdamState adam;
    adam.mw.resize(L);
    adam.vw.resize(L);
    adam.mb.resize(L);
    adam.vb.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        adam.mw[l].assign(model.weights[l].size(), 0.0);
        adam.vw[l].assign(model.weights[l].size(), 0.0);
        adam.mb[l].assign(model.biases[l].size(), 0.0);
        adam.vb[l].assign(model.biases[l].size(), 0.0);
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    std::vector<std::vector<double>> grad_w(L), grad_b(L);
    std::vector<std::vector<double>> act;

    TrainReport report;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_w, best_b;
    int best_epoch = 0;

    Rng shuffle_rng(Rng::derive(cfg.rng_seed, 2));
    std::vector<int> sched = train_idx;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (int i = static_cast<int>(sched.size()) - 1; i > 0; --i)
            std::swap(sched[i], sched[shuffle_rng.uniform_int(0, i)]);

        for (std::size_t start = 0; start < sched.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(sched.size(), start + cfg.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            for (std::size_t l = 0; l < L; ++l) {
                grad_w[l].assign(model.weights[l].size(), 0.0);
                grad_b[l].assign(model.biases[l].size(), 0.0);
            }

            for (std::size_t s = start; s < stop; ++s) {
                const int i = sched[s];
                const double pred = forward_normalized(model, xs[i], &act);
                // d MSE / d pred over the batch
                std::vector<double> delta{2.0 * (pred - ys[i]) * inv_batch};
                for (std::size_t l = L; l-- > 0;) {
                    const std::size_t rows = model.biases[l].size();
                    const std::size_t cols = model.layer_dims[l];
                    if (l + 1 < L)
                        for (std::size_t r = 0; r < rows; ++r)
                            if (!(act[l + 1][r] > 0.0)) delta[r] = 0.0;
                    std::vector<double> prev(cols, 0.0);
                    for (std::size_t r = 0; r < rows; ++r) {
                        const double d = delta[r];
                        grad_b[l][r] += d;
                        if (d == 0.0) continue;
                        double* gw = grad_w[l].data() + r * cols;
                        const double* wr = model.weights[l].data() + r * cols;
                        const double* a = act[l].data();
                        for (std::size_t c = 0; c < cols; ++c) {
                            gw[c] += d * a[c];
                            prev[c] += d * wr[c];
                        }
                    }
                    delta = std::move(prev);
                }
            }

            adam.t += 1;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam.t));
            for (std::size_t l = 0; l < L; ++l) {
                for (std::size_t k = 0; k < model.weights[l].size(); ++k) {
                    const double g = grad_w[l][k] + 2.0 * cfg.l2_weight_decay * model.weights[l][k];
                    adam.mw[l][k] = beta1 * adam.mw[l][k] + (1.0 - beta1) * g;
                    adam.vw[l][k] = beta2 * adam.vw[l][k] + (1.0 - beta2) * g * g;
                    model.weights[l][k] -= cfg.learning_rate * (adam.mw[l][k] / bc1) /
                                           (std::sqrt(adam.vw[l][k] / bc2) + eps);
                }
                for (std::size_t k = 0; k < model.biases[l].size(); ++k) {
                    const double g = grad_b[l][k];
                    adam.mb[l][k] = beta1 * adam.mb[l][k] + (1.0 - beta1) * g;
                    adam.vb[l][k] = beta2 * adam.vb[l][k] + (1.0 - beta2) * g * g;
                    model.biases[l][k] -= cfg.learning_rate * (adam.mb[l][k] / bc1) /
                                          (std::sqrt(adam.vb[l][k] / bc2) + eps);
                }
            }
        }

        report.train_mse.push_back(mse_over(model, xs, ys, train_idx));
        report.val_mse.push_back(mse_over(model, xs, ys, val_idx));
        report.epochs_run = epoch;

        if (report.val_mse.back() < best_val) {
            best_val = report.val_mse.back();
            best_epoch = epoch;
            best_w = model.weights;
            best_b = model.biases;
        } else if (epoch - best_epoch >= cfg.early_stop_patience) {
            break;
        }
    }

    model.weights = std::move(best_w);
    model.biases = std::move(best_b);
    report.best_epoch = best_epoch;
    report.best_val_mse = best_val;
    model.meta.seed = cfg.rng_seed;
    model.meta.epochs_run = report.epochs_run;
    model.meta.final_val_loss = best_val;
    model.validate();
    return {std::move(model), std::move(report)};
}

RegressionMetrics compute_metrics(std::span<const double> predictions,
                                  std::span<const double> targets) {
    if (predictions.size() != targets.size() || predictions.empty())
        throw ArgumentError("compute_metrics: size mismatch or empty input");
    const double n = static_cast<double>(targets.size());
    double abs_sum = 0.0, sq_sum = 0.0, mean = 0.0;
    for (double y : targets) mean += y;
    mean /= n;
    double ss_tot = 0.0, rel_sum = 0.0;
    int rel_n = 0, excluded = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double e = predictions[i] - targets[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        ss_tot += (targets[i] - mean) * (targets[i] - mean);
        if (targets[i] > 0.0) {
            rel_sum += std::abs(e) / targets[i];
            ++rel_n;
        } else {
            ++excluded;
        }
    }
    RegressionMetrics m;
    m.mae = abs_sum / n;
    m.rmse = std::sqrt(sq_sum / n);
    m.r2_defined = ss_tot > 0.0;
    m.r2 = m.r2_defined ? 1.0 - sq_sum / ss_tot : std::numeric_limits<double>::quiet_NaN();
    m.mean_relative_error = rel_n > 0 ? rel_sum / rel_n : 0.0;
    m.n_relative_excluded = excluded;
    return m;
}

RegressionMetrics evaluate_metrics(const SurrogateModel& model, const Dataset& dataset) {
    if (dataset.samples.empty()) throw ArgumentError("evaluate_metrics: empty dataset");
    std::vector<double> preds, targets;
    preds.reserve(dataset.size());
    targets.reserve(dataset.size());
    for (const auto& s : dataset.samples) {
        preds.push_back(forward(model, s.trajectory.values));
        targets.push_back(s.J);
    }
    return compute_metrics(preds, targets);
}

void save_model(const SurrogateModel& model, const std::string& path) {
    model.validate();
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    out << kSurrogateFileSchema << '\n';
    out << "layer_dims";
    for (int d : model.layer_dims) out << ' ' << d;
    out << "\nactivation relu\n";
    out << "input_min";
    for (double v : model.norm.input_min) out << ' ' << fmt_g17(v);
    out << "\ninput_max";
    for (double v : model.norm.input_max) out << ' ' << fmt_g17(v);
    out << "\noutput_min " << fmt_g17(model.norm.output_min);
    out << "\noutput_max " << fmt_g17(model.norm.output_max);
    out << "\ntrain_seed " << model.meta.seed;
    out << "\ntrain_epochs_run " << model.meta.epochs_run;
    out << "\ntrain_final_val_loss " << fmt_g17(model.meta.final_val_loss) << '\n';
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        out << "weights " << (l + 1);
        for (double w : model.weights[l]) out << ' ' << fmt_g17(w);
        out << "\nbiases " << (l + 1);
        for (double b : model.biases[l]) out << ' ' << fmt_g17(b);
        out << '\n';
    }
    out << "end\n";
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int lineno, const std::string& what) {
    throw ParseError(path + ": line " + std::to_string(lineno) + ": " + what);
}

} // namespace

SurrogateModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open surrogate model file: " + path);
    std::string line;
    int lineno = 0;

    auto next_line = [&](const char* want) -> std::istringstream {
        if (!std::getline(in, line)) parse_fail(path, lineno + 1, std::string("missing ") + want);
        ++lineno;
        return std::istringstream(line);
    };
    auto expect_key = [&](std::istringstream& ss, const std::string& key) {
        std::string k;
        if (!(ss >> k) || k != key) parse_fail(path, lineno, "expected key '" + key + "'");
    };

    {
        auto ss = next_line("header");
        if (line != kSurrogateFileSchema) parse_fail(path, lineno, "bad header/version");
    }

    SurrogateModel m;
    {
        auto ss = next_line("layer_dims");
        expect_key(ss, "layer_dims");
        int d;
        while (ss >> d) {
            if (d < 1) parse_fail(path, lineno, "layer_dims entries must be >= 1");
            m.layer_dims.push_back(d);
        }
        if (m.layer_dims.size() < 2) parse_fail(path, lineno, "layer_dims needs >= 2 entries");
    }
    {
        auto ss = next_line("activation");
        expect_key(ss, "activation");
        std::string act;
        if (!(ss >> act) || act != "relu") parse_fail(path, lineno, "unsupported activation");
    }
    const std::size_t T = m.layer_dims.front();
    auto read_vec = [&](const std::string& key, std::size_t count) {
        auto ss = next_line(key.c_str());
        expect_key(ss, key);
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        if (v.size() != count)
            parse_fail(path, lineno,
                       key + ": expected " + std::to_string(count) + " values, got " +
                           std::to_string(v.size()));
        return v;
    };
    m.norm.input_min = read_vec("input_min", T);
    m.norm.input_max = read_vec("input_max", T);
    {
        auto ss = next_line("output_min");
        expect_key(ss, "output_min");
        if (!(ss >> m.norm.output_min)) parse_fail(path, lineno, "bad output_min");
    }
    {
        auto ss = next_line("output_max");
        expect_key(ss, "output_max");
        if (!(ss >> m.norm.output_max)) parse_fail(path, lineno, "bad output_max");
    }
    {
        auto ss = next_line("train_seed");
        expect_key(ss, "train_seed");
        if (!(ss >> m.meta.seed)) parse_fail(path, lineno, "bad train_seed");
    }
    {
        auto ss = next_line("train_epochs_run");
        expect_key(ss, "train_epochs_run");
        if (!(ss >> m.meta.epochs_run)) parse_fail(path, lineno, "bad train_epochs_run");
    }
    {
        auto ss = next_line("train_final_val_loss");
        expect_key(ss, "train_final_val_loss");
        if (!(ss >> m.meta.final_val_loss)) parse_fail(path, lineno, "bad train_final_val_loss");
    }
    auto read_layer_vec = [&](const std::string& key, std::size_t index, std::size_t count) {
        auto ss = next_line(key.c_str());
        expect_key(ss, key);
        std::size_t idx = 0;
        if (!(ss >> idx) || idx != index) parse_fail(path, lineno, key + ": bad layer index");
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        if (v.size() != count)
            parse_fail(path, lineno,
                       key + ": expected " + std::to_string(count) + " values, got " +
                           std::to_string(v.size()));
        return v;
    };
    const std::size_t L = m.layer_dims.size() - 1;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t rows = m.layer_dims[l + 1], cols = m.layer_dims[l];
        m.weights.push_back(read_layer_vec("weights", l + 1, rows * cols));
        m.biases.push_back(read_layer_vec("biases", l + 1, rows));
    }
    {
        auto ss = next_line("end");
        std::string k;
        if (!(ss >> k) || k != "end") parse_fail(path, lineno, "expected trailing 'end'");
    }

    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw ParseError(path + ": " + e.what());
    }
    return m;
}

void write_train_report_csv(const std::string& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    out << "epoch,train_mse,val_mse\n";
    for (std::size_t e = 0; e < report.train_mse.size(); ++e)
        out << (e + 1) << ',' << fmt_g17(report.train_mse[e]) << ',' << fmt_g17(report.val_mse[e])
            << '\n';
}

} // namespace resopt
