#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "modec/matrix.hpp"

namespace modec {

enum class Activation { relu };

struct MLPConfig {
    std::vector<std::size_t> layer_sizes;  // input, hidden..., output
    Activation activation = Activation::relu;
    bool batch_norm = false;
    double l2_coeff = 0.0;

    void validate() const;
    std::size_t n_layers() const { return layer_sizes.size() - 1; }
    std::size_t n_classes() const { return layer_sizes.back(); }
};

// Where each parameter block of one linear layer lives in the flat vector.
// gamma/beta are present only on hidden layers of batch-norm networks.
struct LayerLayout {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t w_off = 0;
    std::size_t b_off = 0;
    std::size_t gamma_off = 0;
    std::size_t beta_off = 0;
    bool has_bn = false;
};

struct WeightLayout {
    std::vector<LayerLayout> layers;
    std::size_t param_count = 0;

    static WeightLayout from_config(const MLPConfig& config);
    bool operator==(const WeightLayout& other) const;
};

// A network in R^|net|: flat 64-bit parameters plus the layout that maps
// them back to per-layer matrices.
struct WeightVector {
    std::vector<double> values;
    WeightLayout layout;

    std::size_t size() const { return values.size(); }
};

struct BatchNormStats {
    // One entry per hidden layer with BN; mean/std of that layer's pre-BN
    // activations over the reference dataset.
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> stddev;
    double epsilon = 1e-5;
};

inline constexpr double kBnEpsilon = 1e-5;

struct Batch {
    Matrix inputs;               // batch × input_dim
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

enum class BnMode { train, eval };

struct EvalResult {
    double error_rate = 0.0;
    double mean_nll = 0.0;
    Matrix probabilities;
};

WeightVector init_params(const MLPConfig& config, std::uint64_t seed);

// bn_mode=train computes batch statistics; eval requires stats for BN nets.
Matrix forward(const WeightVector& w, const MLPConfig& config, const Batch& batch,
               BnMode bn_mode = BnMode::train, const BatchNormStats* stats = nullptr);

// Mean cross-entropy over the batch plus l2_coeff * ||weight matrices||^2
// (biases and BN parameters excluded). BN nets use train-mode statistics.
std::pair<double, WeightVector> loss_and_grad(const WeightVector& w, const MLPConfig& config,
                                              const Batch& batch);

double loss_only(const WeightVector& w, const MLPConfig& config, const Batch& batch,
                 BnMode bn_mode = BnMode::train, const BatchNormStats* stats = nullptr);

EvalResult predict_eval(const WeightVector& w, const MLPConfig& config, const Batch& dataset,
                        const BatchNormStats* stats = nullptr);

// Exact full-dataset mean and biased std of each BN layer's inputs,
// computed in one pass with the dataset treated as a single batch.
BatchNormStats bn_recompute_stats(const WeightVector& w, const MLPConfig& config,
                                  const Batch& dataset);

Matrix softmax_rows(const Matrix& logits);

}  // namespace modec
