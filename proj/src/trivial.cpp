#include "modec/trivial.hpp"

#include <cmath>
#include <stdexcept>

namespace modec {

WeightVector trivial_point(const WeightVector& w, const MLPConfig& config, double t) {
    if (config.batch_norm)
        throw std::invalid_argument("trivial rescaling path is invalid under batch norm");
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("t outside [0, 1]");
    WeightVector out = w;
    double bias_scale = 1.0;
    for (const auto& layer : w.layout.layers) {
        bias_scale *= t;  // layer i gets b_i * t^i (1-based)
        for (std::size_t k = 0; k < layer.in * layer.out; ++k)
            out.values[layer.w_off + k] = w.values[layer.w_off + k] * t;
        for (std::size_t k = 0; k < layer.out; ++k)
            out.values[layer.b_off + k] = w.values[layer.b_off + k] * bias_scale;
    }
    return out;
}

TrivialCheckReport trivial_check(const WeightVector& w, const MLPConfig& config,
                                 const Batch& dataset, const std::vector<double>& t_grid) {
    if (config.batch_norm)
        throw std::invalid_argument("trivial rescaling path is invalid under batch norm");
    for (double t : t_grid)
        if (!(t > 0.0 && t <= 1.0))
            throw std::invalid_argument("trivial_check t grid must lie in (0, 1]");

    TrivialCheckReport rep;
    const Matrix base_logits = forward(w, config, dataset);
    const double n_layers = static_cast<double>(config.n_layers());

    for (double t : t_grid) {
        const WeightVector wt = trivial_point(w, config, t);
        const Matrix logits = forward(wt, config, dataset);
        const double scale = std::pow(t, n_layers);
        for (std::size_t i = 0; i < logits.rows; ++i) {
            const double* z = logits.row(i);
            const double* z0 = base_logits.row(i);
            std::size_t best = 0, best0 = 0;
            for (std::size_t j = 1; j < logits.cols; ++j) {
                if (z[j] > z[best]) best = j;
                if (z0[j] > z0[best0]) best0 = j;
            }
            if (best != best0) rep.argmax_invariant = false;
            for (std::size_t j = 0; j < logits.cols; ++j) {
                const double expected = scale * z0[j];
                const double denom = std::max(std::abs(expected), 1e-12);
                rep.logit_ratio_error =
                    std::max(rep.logit_ratio_error, std::abs(z[j] - expected) / denom);
            }
        }
        rep.t_grid.push_back(t);
        rep.loss_at_t.push_back(loss_only(wt, config, dataset));
    }
    return rep;
}

}  // namespace modec
