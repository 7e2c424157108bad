#pragma once

#include <vector>

#include "modec/mlp.hpp"

namespace modec {

// Layer-wise rescaling path through the origin: W_i -> t*W_i, b_i -> t^i*b_i.
// For a ReLU net without BN the logits scale by t^n, so predictions are
// unchanged for every t > 0. Invalid under batch normalization.
WeightVector trivial_point(const WeightVector& w, const MLPConfig& config, double t);

struct TrivialCheckReport {
    bool argmax_invariant = true;
    double logit_ratio_error = 0.0;  // max relative deviation from the t^n identity
    std::vector<double> t_grid;
    std::vector<double> loss_at_t;   // cross-entropy along the path
};

TrivialCheckReport trivial_check(const WeightVector& w, const MLPConfig& config,
                                 const Batch& dataset, const std::vector<double>& t_grid);

}  // namespace modec
