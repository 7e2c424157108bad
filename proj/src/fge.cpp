#include "modec/fge.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "modec/rng.hpp"

namespace modec {

void CyclicLRSchedule::validate() const {
    if (!(alpha1 > alpha2) || !(alpha2 > 0.0))
        throw std::invalid_argument("cyclic schedule requires alpha1 > alpha2 > 0");
    if (cycle_length == 0 || cycle_length % 2 != 0)
        throw std::invalid_argument("cycle length must be a positive even integer");
}

double lr_at(const CyclicLRSchedule& schedule, std::size_t i) {
    schedule.validate();
    if (i < 1) throw std::invalid_argument("iteration index is 1-based");
    const double c = static_cast<double>(schedule.cycle_length);
    const double t = (static_cast<double>((i - 1) % schedule.cycle_length) + 1.0) / c;
    if (t <= 0.5) return (1.0 - 2.0 * t) * schedule.alpha1 + 2.0 * t * schedule.alpha2;
    return (2.0 - 2.0 * t) * schedule.alpha2 + (2.0 * t - 1.0) * schedule.alpha1;
}

void FGERunConfig::validate() const {
    schedule.validate();
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (n_iterations < schedule.cycle_length / 2)
        throw std::invalid_argument(
            "n_iterations < c/2: no checkpoint would ever be collected");
}

namespace {

struct MiniBatcher {
    const Batch& data;
    std::mt19937_64 rng;
    std::uniform_int_distribution<std::size_t> pick;

    MiniBatcher(const Batch& d, std::uint64_t seed, Stream stream)
        : data(d), rng(make_rng(seed, stream)), pick(0, d.size() - 1) {}

    Batch next(std::size_t batch_size) {
        Batch mb;
        mb.inputs = Matrix(batch_size, data.inputs.cols);
        mb.labels.resize(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) {
            const std::size_t idx = pick(rng);
            for (std::size_t j = 0; j < data.inputs.cols; ++j)
                mb.inputs(i, j) = data.inputs(idx, j);
            mb.labels[i] = data.labels[idx];
        }
        return mb;
    }
};

}  // namespace

WeightVector pretrain(const MLPConfig& net_config, const Batch& train_set,
                      const PretrainConfig& cfg, std::uint64_t seed) {
    WeightVector w = init_params(net_config, seed);
    if (cfg.epochs == 0) return w;
    if (train_set.size() == 0) throw std::invalid_argument("empty training set");
    const std::size_t iters_per_epoch =
        (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total = cfg.epochs * iters_per_epoch;

    MiniBatcher batcher(train_set, seed, Stream::train);
    std::vector<double> velocity(w.values.size(), 0.0);
    for (std::size_t it = 0; it < total; ++it) {
        double lr = cfg.learning_rate;
        if (it >= total * 3 / 4)
            lr *= 0.01;
        else if (it >= total / 2)
            lr *= 0.1;
        const Batch mb = batcher.next(cfg.batch_size);
        auto [loss, grad] = loss_and_grad(w, net_config, mb);
        (void)loss;
        for (std::size_t k = 0; k < w.values.size(); ++k) {
            velocity[k] = cfg.momentum * velocity[k] - lr * grad.values[k];
            w.values[k] += velocity[k];
        }
    }
    return w;
}

std::vector<WeightVector> fge_run(const WeightVector& start, const MLPConfig& net_config,
                                  const Batch& train_set, const FGERunConfig& cfg) {
    cfg.validate();
    if (train_set.size() == 0) throw std::invalid_argument("empty training set");
    WeightVector w = start;
    MiniBatcher batcher(train_set, cfg.seed, Stream::fge);
    std::vector<double> velocity(w.values.size(), 0.0);
    std::vector<WeightVector> checkpoints;
    for (std::size_t i = 1; i <= cfg.n_iterations; ++i) {
        const double lr = lr_at(cfg.schedule, i);
        const Batch mb = batcher.next(cfg.batch_size);
        auto [loss, grad] = loss_and_grad(w, net_config, mb);
        (void)loss;
        for (std::size_t k = 0; k < w.values.size(); ++k) {
            velocity[k] = cfg.momentum * velocity[k] - lr * grad.values[k];
            w.values[k] += velocity[k];
        }
        if (i % cfg.schedule.cycle_length == cfg.schedule.cycle_length / 2)
            checkpoints.push_back(w);
    }
    return checkpoints;
}

ChainReport fge_chain_report(const std::vector<WeightVector>& checkpoints,
                             const MLPConfig& net_config, const Batch& train_set,
                             const Batch& test_set, std::size_t points_per_segment) {
    if (checkpoints.size() < 2)
        throw std::invalid_argument("chain report needs at least 2 checkpoints");
    if (points_per_segment < 2)
        throw std::invalid_argument("points_per_segment must be >= 2");
    ChainReport rep;
    const std::size_t n_seg = checkpoints.size() - 1;
    for (std::size_t s = 0; s < n_seg; ++s) {
        // drop duplicated knot rows between adjacent segments
        const std::size_t first = (s == 0) ? 0 : 1;
        for (std::size_t k = first; k < points_per_segment; ++k) {
            const double local =
                static_cast<double>(k) / static_cast<double>(points_per_segment - 1);
            WeightVector w;
            w.layout = checkpoints[s].layout;
            w.values.resize(checkpoints[s].values.size());
            for (std::size_t j = 0; j < w.values.size(); ++j)
                w.values[j] = (1.0 - local) * checkpoints[s].values[j] +
                              local * checkpoints[s + 1].values[j];
            BatchNormStats stats;
            const BatchNormStats* stats_ptr = nullptr;
            if (net_config.batch_norm) {
                stats = bn_recompute_stats(w, net_config, train_set);
                stats_ptr = &stats;
            }
            const EvalResult train_res = predict_eval(w, net_config, train_set, stats_ptr);
            const EvalResult test_res = predict_eval(w, net_config, test_set, stats_ptr);
            if (local == 0.0 || local == 1.0)
                rep.knot_indices.push_back(rep.positions.size());
            rep.positions.push_back(static_cast<double>(s) + local);
            rep.train_loss.push_back(train_res.mean_nll);
            rep.train_error.push_back(train_res.error_rate);
            rep.test_loss.push_back(test_res.mean_nll);
            rep.test_error.push_back(test_res.error_rate);
        }
    }
    return rep;
}

}  // namespace modec
