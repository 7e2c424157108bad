#include "modec/curve_train.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "modec/rng.hpp"

namespace modec {

void CurveTrainConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum outside [0, 1)");
}

namespace {

Batch sample_batch(const Batch& data, std::size_t batch_size, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    Batch mb;
    mb.inputs = Matrix(batch_size, data.inputs.cols);
    mb.labels.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t idx = pick(rng);
        for (std::size_t j = 0; j < data.inputs.cols; ++j) mb.inputs(i, j) = data.inputs(idx, j);
        mb.labels[i] = data.labels[idx];
    }
    return mb;
}

}  // namespace

CurveTrainResult train_curve(const CurveSpec& spec, const MLPConfig& net_config,
                             const Batch& train_set, const CurveTrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (spec.kind == CurveKind::segment)
        throw std::invalid_argument("segment has no trainable parameters; nothing to train");
    if (train_set.size() == 0) throw std::invalid_argument("empty training set");

    CurveTrainResult result;
    result.spec = spec;
    result.loss_history.reserve(cfg.iterations);

    auto rng = make_rng(cfg.seed, Stream::curve);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::vector<double>> velocity(
        spec.n_bends(), std::vector<double>(spec.start.values.size(), 0.0));

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const double t = unit(rng);
        const Batch mb = sample_batch(train_set, cfg.batch_size, rng);
        const WeightVector point = point_at(result.spec, t);
        auto [loss, grad_phi] = loss_and_grad(point, net_config, mb);
        result.loss_history.push_back(loss);

        auto bend_grads = backprop_to_bends(result.spec, t, grad_phi);
        for (std::size_t b = 0; b < bend_grads.size(); ++b) {
            auto& vel = velocity[b];
            auto& bend = result.spec.bends[b].values;
            const auto& g = bend_grads[b].values;
            for (std::size_t k = 0; k < bend.size(); ++k) {
                double gk = g[k];
                if (cfg.weight_decay_on_bends) gk += 2.0 * net_config.l2_coeff * bend[k];
                vel[k] = cfg.momentum * vel[k] - cfg.learning_rate * gk;
                bend[k] += vel[k];
            }
        }
    }
    return result;
}

double loss_uniform_t(const CurveSpec& spec, const MLPConfig& net_config, const Batch& dataset,
                      std::size_t grid_size) {
    spec.validate();
    if (grid_size < 2) throw std::invalid_argument("grid_size must be >= 2");
    double acc = 0.0;
    double prev_loss = 0.0;
    for (std::size_t k = 0; k < grid_size; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(grid_size - 1);
        const double loss = loss_only(point_at(spec, t), net_config, dataset);
        if (k > 0) acc += 0.5 * (loss + prev_loss);
        prev_loss = loss;
    }
    return acc / static_cast<double>(grid_size - 1);
}

double loss_uniform_curve(const CurveSpec& spec, const MLPConfig& net_config,
                          const Batch& dataset, std::size_t grid_size) {
    spec.validate();
    if (grid_size < 2) throw std::invalid_argument("grid_size must be >= 2");
    double num = 0.0, den = 0.0;
    double prev_l = 0.0, prev_s = 0.0;
    for (std::size_t k = 0; k < grid_size; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(grid_size - 1);
        const double loss = loss_only(point_at(spec, t), net_config, dataset);
        const WeightVector tan = tangent_at(spec, t);
        double sq = 0.0;
        for (double v : tan.values) sq += v * v;
        const double speed = std::sqrt(sq);
        if (k > 0) {
            num += 0.5 * (loss * speed + prev_l * prev_s);
            den += 0.5 * (speed + prev_s);
        }
        prev_l = loss;
        prev_s = speed;
    }
    if (den == 0.0) throw std::invalid_argument("degenerate curve: zero total speed");
    return num / den;
}

}  // namespace modec
