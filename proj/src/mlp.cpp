#include "modec/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "modec/rng.hpp"

namespace modec {

void MLPConfig::validate() const {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("MLPConfig: need at least input and output layer");
    if (layer_sizes.back() < 2)
        throw std::invalid_argument("MLPConfig: output size must be >= 2 classes");
    for (auto s : layer_sizes)
        if (s == 0) throw std::invalid_argument("MLPConfig: zero-width layer");
    if (l2_coeff < 0.0)
        throw std::invalid_argument("MLPConfig: negative l2 coefficient");
}

WeightLayout WeightLayout::from_config(const MLPConfig& config) {
    config.validate();
    WeightLayout layout;
    std::size_t off = 0;
    const std::size_t n = config.n_layers();
    for (std::size_t l = 0; l < n; ++l) {
        LayerLayout rec;
        rec.in = config.layer_sizes[l];
        rec.out = config.layer_sizes[l + 1];
        rec.w_off = off;
        off += rec.in * rec.out;
        rec.b_off = off;
        off += rec.out;
        rec.has_bn = config.batch_norm && l + 1 < n;  // no BN on logits
        if (rec.has_bn) {
            rec.gamma_off = off;
            off += rec.out;
            rec.beta_off = off;
            off += rec.out;
        }
        layout.layers.push_back(rec);
    }
    layout.param_count = off;
    return layout;
}

bool WeightLayout::operator==(const WeightLayout& other) const {
    if (param_count != other.param_count || layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& a = layers[i];
        const auto& b = other.layers[i];
        if (a.in != b.in || a.out != b.out || a.has_bn != b.has_bn) return false;
    }
    return true;
}

WeightVector init_params(const MLPConfig& config, std::uint64_t seed) {
    WeightVector w;
    w.layout = WeightLayout::from_config(config);
    w.values.assign(w.layout.param_count, 0.0);
    auto rng = make_rng(seed, Stream::init);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& layer : w.layout.layers) {
        const double scale = std::sqrt(2.0 / static_cast<double>(layer.in));
        for (std::size_t i = 0; i < layer.in * layer.out; ++i)
            w.values[layer.w_off + i] = scale * normal(rng);
        // biases stay zero
        if (layer.has_bn)
            for (std::size_t j = 0; j < layer.out; ++j) w.values[layer.gamma_off + j] = 1.0;
    }
    return w;
}

namespace {

void check_inputs(const WeightVector& w, const MLPConfig& config, const Batch& batch) {
    const auto layout = WeightLayout::from_config(config);
    if (!(w.layout == layout) || w.values.size() != layout.param_count)
        throw std::invalid_argument("weight vector does not match config layout");
    if (batch.inputs.cols != config.layer_sizes.front())
        throw std::invalid_argument("batch input width does not match network input");
    if (batch.inputs.rows != batch.labels.size())
        throw std::invalid_argument("batch row count does not match label count");
    for (int lab : batch.labels)
        if (lab < 0 || static_cast<std::size_t>(lab) >= config.n_classes())
            throw std::invalid_argument("label out of class range");
}

// Everything the backward pass needs from one forward evaluation.
struct ForwardCache {
    std::vector<Matrix> inputs;   // per layer: activation fed into the linear map
    std::vector<Matrix> pre_bn;   // per layer: z = x W^T + b
    std::vector<Matrix> pre_act;  // per hidden layer: value entering ReLU
    std::vector<std::vector<double>> mu;     // per layer (empty if no BN)
    std::vector<std::vector<double>> sigma;  // biased std per layer
    Matrix logits;
};

Matrix linear(const Matrix& x, const WeightVector& w, const LayerLayout& layer) {
    Matrix z(x.rows, layer.out);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double* zi = z.row(i);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* wrow = w.values.data() + layer.w_off + o * layer.in;
            double acc = w.values[layer.b_off + o];
            for (std::size_t k = 0; k < layer.in; ++k) acc += wrow[k] * xi[k];
            zi[o] = acc;
        }
    }
    return z;
}

ForwardCache run_forward(const WeightVector& w, const MLPConfig& config, const Batch& batch,
                         BnMode bn_mode, const BatchNormStats* stats) {
    check_inputs(w, config, batch);
    if (config.batch_norm && bn_mode == BnMode::eval && stats == nullptr)
        throw std::invalid_argument("eval-mode forward on a BN network requires stats");

    ForwardCache cache;
    const std::size_t n = config.n_layers();
    Matrix x = batch.inputs;
    std::size_t bn_index = 0;
    for (std::size_t l = 0; l < n; ++l) {
        const auto& layer = w.layout.layers[l];
        cache.inputs.push_back(x);
        Matrix z = linear(x, w, layer);
        cache.pre_bn.push_back(z);
        if (l + 1 == n) {
            cache.logits = std::move(z);
            break;
        }
        Matrix h = z;
        std::vector<double> mu, sigma;
        if (layer.has_bn) {
            mu.resize(layer.out);
            sigma.resize(layer.out);
            if (bn_mode == BnMode::train) {
                const double inv_n = 1.0 / static_cast<double>(z.rows);
                for (std::size_t j = 0; j < layer.out; ++j) {
                    double m = 0.0, lo = z(0, j), hi = z(0, j);
                    for (std::size_t i = 0; i < z.rows; ++i) {
                        m += z(i, j);
                        lo = std::min(lo, z(i, j));
                        hi = std::max(hi, z(i, j));
                    }
                    if (lo == hi) {  // constant column: exact stats
                        mu[j] = lo;
                        sigma[j] = 0.0;
                        continue;
                    }
                    m *= inv_n;
                    double var = 0.0;
                    for (std::size_t i = 0; i < z.rows; ++i) {
                        const double d = z(i, j) - m;
                        var += d * d;
                    }
                    mu[j] = m;
                    sigma[j] = std::sqrt(var * inv_n);
                }
            } else {
                mu = stats->mean.at(bn_index);
                sigma = stats->stddev.at(bn_index);
                if (mu.size() != layer.out)
                    throw std::invalid_argument("BN stats width mismatch");
            }
            const double eps = (bn_mode == BnMode::eval) ? stats->epsilon : kBnEpsilon;
            for (std::size_t j = 0; j < layer.out; ++j) {
                const double gamma = w.values[layer.gamma_off + j];
                const double beta = w.values[layer.beta_off + j];
                const double inv_d = 1.0 / (sigma[j] + eps);
                for (std::size_t i = 0; i < h.rows; ++i)
                    h(i, j) = gamma * (z(i, j) - mu[j]) * inv_d + beta;
            }
            ++bn_index;
        }
        cache.mu.push_back(std::move(mu));
        cache.sigma.push_back(std::move(sigma));
        cache.pre_act.push_back(h);
        for (double& v : h.data) v = v > 0.0 ? v : 0.0;
        x = std::move(h);
    }
    return cache;
}

double l2_penalty(const WeightVector& w, const MLPConfig& config) {
    if (config.l2_coeff == 0.0) return 0.0;
    double sq = 0.0;
    for (const auto& layer : w.layout.layers)
        for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
            const double v = w.values[layer.w_off + i];
            sq += v * v;
        }
    return config.l2_coeff * sq;
}

double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
    double nll = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i)
        nll -= std::log(std::max(probs(i, static_cast<std::size_t>(labels[i])), 1e-300));
    return nll / static_cast<double>(probs.rows);
}

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* z = logits.row(i);
        double zmax = z[0];
        for (std::size_t j = 1; j < logits.cols; ++j) zmax = std::max(zmax, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            p(i, j) = std::exp(z[j] - zmax);
            sum += p(i, j);
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < logits.cols; ++j) p(i, j) *= inv;
    }
    return p;
}

Matrix forward(const WeightVector& w, const MLPConfig& config, const Batch& batch,
               BnMode bn_mode, const BatchNormStats* stats) {
    return run_forward(w, config, batch, bn_mode, stats).logits;
}

double loss_only(const WeightVector& w, const MLPConfig& config, const Batch& batch,
                 BnMode bn_mode, const BatchNormStats* stats) {
    if (batch.size() == 0) throw std::invalid_argument("empty batch");
    const Matrix probs = softmax_rows(forward(w, config, batch, bn_mode, stats));
    return cross_entropy(probs, batch.labels) + l2_penalty(w, config);
}

std::pair<double, WeightVector> loss_and_grad(const WeightVector& w, const MLPConfig& config,
                                              const Batch& batch) {
    if (batch.size() == 0) throw std::invalid_argument("empty batch");
    ForwardCache cache = run_forward(w, config, batch, BnMode::train, nullptr);
    const std::size_t n = config.n_layers();
    const std::size_t batch_n = batch.size();

    WeightVector grad;
    grad.layout = w.layout;
    grad.values.assign(w.values.size(), 0.0);

    const Matrix probs = softmax_rows(cache.logits);
    double loss = cross_entropy(probs, batch.labels) + l2_penalty(w, config);

    // dL/dlogits for mean cross-entropy
    Matrix delta = probs;
    const double inv_b = 1.0 / static_cast<double>(batch_n);
    for (std::size_t i = 0; i < batch_n; ++i) {
        delta(i, static_cast<std::size_t>(batch.labels[i])) -= 1.0;
        for (std::size_t j = 0; j < delta.cols; ++j) delta(i, j) *= inv_b;
    }

    for (std::size_t li = n; li-- > 0;) {
        const auto& layer = w.layout.layers[li];
        const Matrix& x = cache.inputs[li];

        // linear layer: z = x W^T + b
        for (std::size_t i = 0; i < batch_n; ++i) {
            const double* di = delta.row(i);
            const double* xi = x.row(i);
            for (std::size_t o = 0; o < layer.out; ++o) {
                if (di[o] == 0.0) continue;
                double* wg = grad.values.data() + layer.w_off + o * layer.in;
                for (std::size_t k = 0; k < layer.in; ++k) wg[k] += di[o] * xi[k];
                grad.values[layer.b_off + o] += di[o];
            }
        }
        if (config.l2_coeff != 0.0) {
            const double two_l = 2.0 * config.l2_coeff;
            for (std::size_t i = 0; i < layer.in * layer.out; ++i)
                grad.values[layer.w_off + i] += two_l * w.values[layer.w_off + i];
        }
        if (li == 0) break;

        // dL/dx of this layer = dL/d(activation output) of the previous one
        Matrix dx(batch_n, layer.in);
        for (std::size_t i = 0; i < batch_n; ++i) {
            const double* di = delta.row(i);
            double* dxi = dx.row(i);
            for (std::size_t o = 0; o < layer.out; ++o) {
                if (di[o] == 0.0) continue;
                const double* wrow = w.values.data() + layer.w_off + o * layer.in;
                for (std::size_t k = 0; k < layer.in; ++k) dxi[k] += di[o] * wrow[k];
            }
        }

        const std::size_t prev = li - 1;
        const auto& prev_layer = w.layout.layers[prev];
        const Matrix& pre_act = cache.pre_act[prev];
        // ReLU mask
        for (std::size_t i = 0; i < dx.rows; ++i)
            for (std::size_t j = 0; j < dx.cols; ++j)
                if (pre_act(i, j) <= 0.0) dx(i, j) = 0.0;

        if (prev_layer.has_bn) {
            const Matrix& z = cache.pre_bn[prev];
            const auto& mu = cache.mu[prev];
            const auto& sigma = cache.sigma[prev];
            Matrix dz(dx.rows, dx.cols);
            const double inv_n = 1.0 / static_cast<double>(dx.rows);
            for (std::size_t j = 0; j < prev_layer.out; ++j) {
                const double gamma = w.values[prev_layer.gamma_off + j];
                const double d = sigma[j] + kBnEpsilon;
                const double inv_d = 1.0 / d;
                double s1 = 0.0, s2 = 0.0, dgamma = 0.0, dbeta = 0.0;
                for (std::size_t i = 0; i < dx.rows; ++i) {
                    const double g = dx(i, j) * gamma;
                    const double centered = z(i, j) - mu[j];
                    s1 += g;
                    s2 += g * centered;
                    dgamma += dx(i, j) * centered * inv_d;
                    dbeta += dx(i, j);
                }
                grad.values[prev_layer.gamma_off + j] += dgamma;
                grad.values[prev_layer.beta_off + j] += dbeta;
                // d sigma / d z_i = (z_i - mu) / (N sigma); drop the term at sigma = 0
                const double sig_term =
                    sigma[j] > 0.0 ? s2 * inv_n * inv_d * inv_d / sigma[j] : 0.0;
                for (std::size_t i = 0; i < dx.rows; ++i) {
                    const double g = dx(i, j) * gamma;
                    dz(i, j) = g * inv_d - s1 * inv_n * inv_d - (z(i, j) - mu[j]) * sig_term;
                }
            }
            delta = std::move(dz);
        } else {
            delta = std::move(dx);
        }
    }
    return {loss, std::move(grad)};
}

EvalResult predict_eval(const WeightVector& w, const MLPConfig& config, const Batch& dataset,
                        const BatchNormStats* stats) {
    if (dataset.size() == 0) throw std::invalid_argument("empty dataset");
    const BnMode mode = config.batch_norm ? BnMode::eval : BnMode::train;
    EvalResult res;
    res.probabilities = softmax_rows(forward(w, config, dataset, mode, stats));
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const double* p = res.probabilities.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < res.probabilities.cols; ++j)
            if (p[j] > p[best]) best = j;  // ties keep the lowest index
        if (best != static_cast<std::size_t>(dataset.labels[i])) ++wrong;
    }
    res.error_rate = static_cast<double>(wrong) / static_cast<double>(dataset.size());
    res.mean_nll = cross_entropy(res.probabilities, dataset.labels);
    return res;
}

BatchNormStats bn_recompute_stats(const WeightVector& w, const MLPConfig& config,
                                  const Batch& dataset) {
    if (!config.batch_norm)
        throw std::invalid_argument("bn_recompute_stats requires a batch-norm network");
    if (dataset.size() == 0) throw std::invalid_argument("empty dataset");
    // One pass with the whole dataset as a single batch yields exact
    // full-dataset statistics, consistently layer by layer.
    ForwardCache cache = run_forward(w, config, dataset, BnMode::train, nullptr);
    BatchNormStats stats;
    stats.epsilon = kBnEpsilon;
    for (std::size_t l = 0; l < cache.mu.size(); ++l) {
        if (cache.mu[l].empty()) continue;
        stats.mean.push_back(cache.mu[l]);
        stats.stddev.push_back(cache.sigma[l]);
    }
    return stats;
}

}  // namespace modec
