#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "resopt/sampling.hpp"

namespace resopt {

// Min-max scaling statistics; inputs per dimension, output scalar.
struct NormalizationStats {
    std::vector<double> input_min, input_max; // Pa
    double output_min = 0.0, output_max = 1.0; // m^3

    void validate() const; // throws ConfigError on zero-range dimensions
};

std::vector<double> normalize_input(std::span<const double> u, const NormalizationStats& stats);
double normalize_output(double j, const NormalizationStats& stats);
double denormalize_output(double j_norm, const NormalizationStats& stats);

// Fully connected surrogate J = F(u): rectifier hidden layers, linear output,
// trained on min-max-normalized data.
struct SurrogateModel {
    std::vector<int> layer_dims;               // e.g. {T, 64, 128, 64, 1}
    std::vector<std::vector<double>> weights;  // weights[l]: dims[l+1] x dims[l], row-major
    std::vector<std::vector<double>> biases;   // biases[l]: dims[l+1]
    NormalizationStats norm;

    struct TrainMeta {
        std::uint64_t seed = 0;
        int epochs_run = 0;
        double final_val_loss = 0.0;
    } meta;

    int input_dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
    void validate() const;
};

// Denormalized prediction for a raw trajectory vector. Pure and deterministic.
double forward(const SurrogateModel& model, std::span<const double> u);

// Exact gradient of forward() with respect to the raw inputs (both
// normalization chain factors included); rectifier subgradient 0 at kinks.
std::vector<double> input_gradient(const SurrogateModel& model, std::span<const double> u);

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 16;
    int max_epochs = 300;
    int early_stop_patience = 30; // epochs without validation improvement
    double l2_weight_decay = 1e-5;
    double val_fraction = 0.2;
    std::uint64_t rng_seed = 0;
    std::vector<int> hidden_dims = {64, 128, 64};

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_mse, val_mse; // per epoch, normalized scale
    int epochs_run = 0;
    int best_epoch = 0;
    double best_val_mse = 0.0;
};

// Adam on MSE + L2, early stopping on validation loss with best-weights
// restoration. Normalization statistics are fit on the training split only.
// Deterministic given cfg.rng_seed.
std::pair<SurrogateModel, TrainReport> train(const Dataset& dataset, const TrainConfig& cfg);

struct RegressionMetrics {
    double mae = 0.0;                 // m^3
    double rmse = 0.0;                // m^3
    double r2 = 0.0;                  // valid only when r2_defined
    bool r2_defined = true;
    double mean_relative_error = 0.0; // over samples with J > 0
    int n_relative_excluded = 0;      // samples with J <= 0
};

// Metric arithmetic on prediction/target pairs (exposed for direct testing).
RegressionMetrics compute_metrics(std::span<const double> predictions,
                                  std::span<const double> targets);
RegressionMetrics evaluate_metrics(const SurrogateModel& model, const Dataset& dataset);

// Versioned structured-text model file; load(save(m)) reproduces forward
// outputs to 1e-12 relative.
void save_model(const SurrogateModel& model, const std::string& path);
SurrogateModel load_model(const std::string& path);

// Training report CSV; columns: epoch,train_mse,val_mse
void write_train_report_csv(const std::string& path, const TrainReport& report);

} // namespace resopt
