#pragma once

#include <cstdint>
#include <vector>

#include "modec/curve.hpp"
#include "modec/mlp.hpp"

namespace modec {

struct CurveTrainConfig {
    std::size_t iterations = 2000;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
    bool weight_decay_on_bends = false;  // L is already L2-regularized
    std::uint64_t seed = 0;

    void validate() const;
};

struct CurveTrainResult {
    CurveSpec spec;
    std::vector<double> loss_history;  // minibatch loss per iteration
};

// Stochastic minimization of the expected loss over t ~ U(0,1): sample t,
// sample a mini-batch, push the loss gradient at phi(t) onto the bends with
// SGD + momentum. Endpoints are never touched.
CurveTrainResult train_curve(const CurveSpec& spec, const MLPConfig& net_config,
                             const Batch& train_set, const CurveTrainConfig& cfg);

// Trapezoidal estimate of the average loss over uniformly sampled t.
double loss_uniform_t(const CurveSpec& spec, const MLPConfig& net_config, const Batch& dataset,
                      std::size_t grid_size = 121);

// Trapezoidal estimate of the arclength-weighted loss,
// integral(L ||phi'|| dt) / integral(||phi'|| dt).
double loss_uniform_curve(const CurveSpec& spec, const MLPConfig& net_config,
                          const Batch& dataset, std::size_t grid_size = 121);

}  // namespace modec
