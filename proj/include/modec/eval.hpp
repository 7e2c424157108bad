#pragma once

#include <optional>
#include <vector>

#include "modec/curve.hpp"
#include "modec/mlp.hpp"

namespace modec {

struct MetricAggregates {
    double min = 0.0;
    double max = 0.0;
    double integral = 0.0;  // arclength-weighted mean over the curve
    double mean = 0.0;      // plain mean over t
};

struct CurveEvalReport {
    std::vector<double> t_grid;
    std::vector<double> train_loss;   // l2-regularized cross-entropy
    std::vector<double> train_error;
    std::vector<double> test_loss;    // plain NLL
    std::vector<double> test_error;
    MetricAggregates train_loss_agg;
    MetricAggregates train_error_agg;
    MetricAggregates test_loss_agg;
    MetricAggregates test_error_agg;
    double length_ratio = 0.0;
};

CurveEvalReport curve_report(const CurveSpec& spec, const MLPConfig& net_config,
                             const Batch& train_set, const Batch& test_set,
                             std::size_t grid_size = 121);

struct PlaneGrid {
    WeightVector origin;  // w1
    WeightVector u_hat;
    WeightVector v_hat;
    // plane coordinates of the three defining weight vectors
    double x2 = 0.0;                // w2 -> (x2, 0)
    double x3 = 0.0, y3 = 0.0;      // w3 -> (x3, y3)
    std::vector<double> xs, ys;
    Matrix loss;   // ys.size() rows x xs.size() cols
    Matrix error;
};

// Orthonormal basis of the plane through w1, w2, w3 (Gram-Schmidt on
// w2-w1, w3-w1) with the training loss evaluated on a Cartesian grid.
// Rows are evaluated on up to `threads` workers; cells are independent, so
// the grid is identical for any thread count.
PlaneGrid plane_grid(const WeightVector& w1, const WeightVector& w2, const WeightVector& w3,
                     const MLPConfig& net_config, const Batch& dataset, std::size_t resolution,
                     double margin_fraction = 0.2, std::size_t threads = 1);

WeightVector plane_point(const PlaneGrid& grid, double x, double y);
std::pair<double, double> plane_project(const PlaneGrid& grid, const WeightVector& w);

struct EnsembleMember {
    WeightVector weights;
    std::optional<BatchNormStats> stats;
};

// Arithmetic mean of per-model softmax probabilities, then argmax.
EvalResult ensemble_predict(const std::vector<EnsembleMember>& models,
                            const MLPConfig& net_config, const Batch& dataset);

// Error of the two-network ensemble {phi(0), phi(t)}. bn_set supplies the
// data for per-point statistics recomputation on BN networks.
double curve_point_ensemble(const CurveSpec& spec, const MLPConfig& net_config,
                            const Batch& dataset, double t, const Batch* bn_set = nullptr);

double disagreement(const WeightVector& a, const WeightVector& b, const MLPConfig& net_config,
                    const Batch& dataset, const BatchNormStats* stats_a = nullptr,
                    const BatchNormStats* stats_b = nullptr);

struct TemperatureFit {
    double temperature = 1.0;
    bool degenerate = false;
    double nll = 0.0;  // held-out NLL at the fitted temperature
};

// One scalar T shared by all models, chosen to minimize the held-out NLL of
// the probability-averaged ensemble. Golden-section search on ln T.
TemperatureFit fit_temperature(const std::vector<Matrix>& logit_sets,
                               const std::vector<int>& labels);

double ensemble_nll_at_temperature(const std::vector<Matrix>& logit_sets,
                                   const std::vector<int>& labels, double temperature);

}  // namespace modec
