#include "modec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace modec {

namespace {

double weight_l2(const WeightVector& w, const MLPConfig& config) {
    if (config.l2_coeff == 0.0) return 0.0;
    double sq = 0.0;
    for (const auto& layer : w.layout.layers)
        for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
            const double v = w.values[layer.w_off + i];
            sq += v * v;
        }
    return config.l2_coeff * sq;
}

MetricAggregates aggregate(const std::vector<double>& values, const std::vector<double>& speeds) {
    MetricAggregates agg;
    agg.min = *std::min_element(values.begin(), values.end());
    agg.max = *std::max_element(values.begin(), values.end());
    const std::size_t n = values.size();
    double mean_acc = 0.0, num = 0.0, den = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        mean_acc += 0.5 * (values[k] + values[k - 1]);
        num += 0.5 * (values[k] * speeds[k] + values[k - 1] * speeds[k - 1]);
        den += 0.5 * (speeds[k] + speeds[k - 1]);
    }
    agg.mean = mean_acc / static_cast<double>(n - 1);
    agg.integral = den > 0.0 ? num / den : agg.mean;
    return agg;
}

std::size_t argmax_row(const Matrix& probs, std::size_t i) {
    const double* p = probs.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.cols; ++j)
        if (p[j] > p[best]) best = j;
    return best;
}

}  // namespace

CurveEvalReport curve_report(const CurveSpec& spec, const MLPConfig& net_config,
                             const Batch& train_set, const Batch& test_set,
                             std::size_t grid_size) {
    spec.validate();
    if (grid_size < 2) throw std::invalid_argument("grid_size must be >= 2");
    CurveEvalReport rep;
    std::vector<double> speeds;
    for (std::size_t k = 0; k < grid_size; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(grid_size - 1);
        rep.t_grid.push_back(t);
        const WeightVector w = point_at(spec, t);

        BatchNormStats stats;
        const BatchNormStats* stats_ptr = nullptr;
        if (net_config.batch_norm) {
            stats = bn_recompute_stats(w, net_config, train_set);
            stats_ptr = &stats;
        }
        const EvalResult train_res = predict_eval(w, net_config, train_set, stats_ptr);
        const EvalResult test_res = predict_eval(w, net_config, test_set, stats_ptr);
        rep.train_loss.push_back(train_res.mean_nll + weight_l2(w, net_config));
        rep.train_error.push_back(train_res.error_rate);
        rep.test_loss.push_back(test_res.mean_nll);
        rep.test_error.push_back(test_res.error_rate);

        const WeightVector tan = tangent_at(spec, t);
        double sq = 0.0;
        for (double v : tan.values) sq += v * v;
        speeds.push_back(std::sqrt(sq));
    }
    rep.train_loss_agg = aggregate(rep.train_loss, speeds);
    rep.train_error_agg = aggregate(rep.train_error, speeds);
    rep.test_loss_agg = aggregate(rep.test_loss, speeds);
    rep.test_error_agg = aggregate(rep.test_error, speeds);
    // coincident endpoints have no defined ratio; report NaN instead of failing
    rep.length_ratio = l2_distance(spec.start, spec.end) > 0.0
                           ? arclength(spec, grid_size).ratio
                           : std::numeric_limits<double>::quiet_NaN();
    return rep;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

PlaneGrid plane_grid(const WeightVector& w1, const WeightVector& w2, const WeightVector& w3,
                     const MLPConfig& net_config, const Batch& dataset, std::size_t resolution,
                     double margin_fraction, std::size_t threads) {
    if (!(w1.layout == w2.layout) || !(w1.layout == w3.layout))
        throw std::invalid_argument("plane vectors have different layouts");
    if (resolution < 2) throw std::invalid_argument("resolution must be >= 2");

    const std::size_t n = w1.values.size();
    std::vector<double> u(n), d3(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = w2.values[i] - w1.values[i];
        d3[i] = w3.values[i] - w1.values[i];
    }
    const double u_norm = std::sqrt(dot(u, u));
    if (u_norm == 0.0) throw std::invalid_argument("w1 and w2 coincide");
    const double proj = dot(d3, u) / (u_norm * u_norm);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = d3[i] - proj * u[i];
    const double v_norm = std::sqrt(dot(v, v));
    const double d3_norm = std::sqrt(dot(d3, d3));
    if (v_norm <= 1e-12 * std::max(1.0, d3_norm))
        throw std::invalid_argument("w1, w2, w3 are collinear: plane is degenerate");

    PlaneGrid grid;
    grid.origin = w1;
    grid.u_hat.layout = w1.layout;
    grid.v_hat.layout = w1.layout;
    grid.u_hat.values.resize(n);
    grid.v_hat.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid.u_hat.values[i] = u[i] / u_norm;
        grid.v_hat.values[i] = v[i] / v_norm;
    }
    grid.x2 = u_norm;
    grid.x3 = dot(d3, grid.u_hat.values);
    grid.y3 = dot(d3, grid.v_hat.values);

    const double x_lo = std::min({0.0, grid.x2, grid.x3});
    const double x_hi = std::max({0.0, grid.x2, grid.x3});
    const double y_lo = std::min(0.0, grid.y3);
    const double y_hi = std::max(0.0, grid.y3);
    const double mx = margin_fraction * std::max(x_hi - x_lo, 1e-12);
    const double my = margin_fraction * std::max(y_hi - y_lo, 1e-12);
    for (std::size_t k = 0; k < resolution; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(resolution - 1);
        grid.xs.push_back(x_lo - mx + f * (x_hi - x_lo + 2.0 * mx));
        grid.ys.push_back(y_lo - my + f * (y_hi - y_lo + 2.0 * my));
    }
    grid.loss = Matrix(resolution, resolution);
    grid.error = Matrix(resolution, resolution);
    const auto eval_rows = [&](std::size_t r_begin, std::size_t r_end) {
        for (std::size_t r = r_begin; r < r_end; ++r)
            for (std::size_t c = 0; c < resolution; ++c) {
                const WeightVector p = plane_point(grid, grid.xs[c], grid.ys[r]);
                BatchNormStats stats;
                const BatchNormStats* stats_ptr = nullptr;
                if (net_config.batch_norm) {
                    stats = bn_recompute_stats(p, net_config, dataset);
                    stats_ptr = &stats;
                }
                const EvalResult res = predict_eval(p, net_config, dataset, stats_ptr);
                grid.loss(r, c) = res.mean_nll + weight_l2(p, net_config);
                grid.error(r, c) = res.error_rate;
            }
    };
    // cells are independent and each thread writes disjoint rows, so the
    // result is identical for any thread count
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, resolution));
    if (workers == 1) {
        eval_rows(0, resolution);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (resolution + workers - 1) / workers;
        for (std::size_t t = 0; t < workers; ++t) {
            const std::size_t lo = t * chunk;
            if (lo >= resolution) break;
            pool.emplace_back(eval_rows, lo, std::min(resolution, lo + chunk));
        }
        for (auto& th : pool) th.join();
    }
    return grid;
}

WeightVector plane_point(const PlaneGrid& grid, double x, double y) {
    WeightVector p;
    p.layout = grid.origin.layout;
    p.values.resize(grid.origin.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i)
        p.values[i] = grid.origin.values[i] + x * grid.u_hat.values[i] + y * grid.v_hat.values[i];
    return p;
}

std::pair<double, double> plane_project(const PlaneGrid& grid, const WeightVector& w) {
    std::vector<double> d(w.values.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = w.values[i] - grid.origin.values[i];
    return {dot(d, grid.u_hat.values), dot(d, grid.v_hat.values)};
}

EvalResult ensemble_predict(const std::vector<EnsembleMember>& models,
                            const MLPConfig& net_config, const Batch& dataset) {
    if (models.empty()) throw std::invalid_argument("ensemble needs at least one model");
    Matrix avg;
    for (const auto& m : models) {
        const BatchNormStats* stats = m.stats ? &*m.stats : nullptr;
        const EvalResult res = predict_eval(m.weights, net_config, dataset, stats);
        if (avg.empty()) {
            avg = res.probabilities;
        } else {
            for (std::size_t i = 0; i < avg.data.size(); ++i)
                avg.data[i] += res.probabilities.data[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(models.size());
    for (double& v : avg.data) v *= inv;

    EvalResult out;
    out.probabilities = std::move(avg);
    std::size_t wrong = 0;
    double nll = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (argmax_row(out.probabilities, i) != static_cast<std::size_t>(dataset.labels[i]))
            ++wrong;
        nll -= std::log(
            std::max(out.probabilities(i, static_cast<std::size_t>(dataset.labels[i])), 1e-300));
    }
    out.error_rate = static_cast<double>(wrong) / static_cast<double>(dataset.size());
    out.mean_nll = nll / static_cast<double>(dataset.size());
    return out;
}

double curve_point_ensemble(const CurveSpec& spec, const MLPConfig& net_config,
                            const Batch& dataset, double t, const Batch* bn_set) {
    spec.validate();
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("t outside [0, 1]");
    std::vector<EnsembleMember> members;
    for (const double tt : {0.0, t}) {
        EnsembleMember m;
        m.weights = point_at(spec, tt);
        if (net_config.batch_norm) {
            if (bn_set == nullptr)
                throw std::invalid_argument("BN network needs a dataset for statistics");
            m.stats = bn_recompute_stats(m.weights, net_config, *bn_set);
        }
        members.push_back(std::move(m));
    }
    return ensemble_predict(members, net_config, dataset).error_rate;
}

double disagreement(const WeightVector& a, const WeightVector& b, const MLPConfig& net_config,
                    const Batch& dataset, const BatchNormStats* stats_a,
                    const BatchNormStats* stats_b) {
    if (!(a.layout == b.layout)) throw std::invalid_argument("layout mismatch");
    const EvalResult ra = predict_eval(a, net_config, dataset, stats_a);
    const EvalResult rb = predict_eval(b, net_config, dataset, stats_b);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (argmax_row(ra.probabilities, i) != argmax_row(rb.probabilities, i)) ++diff;
    return static_cast<double>(diff) / static_cast<double>(dataset.size());
}

double ensemble_nll_at_temperature(const std::vector<Matrix>& logit_sets,
                                   const std::vector<int>& labels, double temperature) {
    if (logit_sets.empty() || labels.empty()) throw std::invalid_argument("empty input");
    const std::size_t rows = labels.size();
    Matrix avg(rows, logit_sets.front().cols);
    for (const auto& logits : logit_sets) {
        Matrix scaled = logits;
        for (double& v : scaled.data) v /= temperature;
        const Matrix p = softmax_rows(scaled);
        for (std::size_t i = 0; i < avg.data.size(); ++i) avg.data[i] += p.data[i];
    }
    const double inv = 1.0 / static_cast<double>(logit_sets.size());
    double nll = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
        nll -= std::log(
            std::max(avg(i, static_cast<std::size_t>(labels[i])) * inv, 1e-300));
    return nll / static_cast<double>(rows);
}

TemperatureFit fit_temperature(const std::vector<Matrix>& logit_sets,
                               const std::vector<int>& labels) {
    if (logit_sets.empty()) throw std::invalid_argument("no logit sets");
    if (labels.empty()) throw std::invalid_argument("empty held-out set");
    for (const auto& logits : logit_sets)
        if (logits.rows != labels.size())
            throw std::invalid_argument("logit rows do not match label count");

    bool all_flat = true;
    for (const auto& logits : logit_sets)
        for (std::size_t i = 0; i < logits.rows && all_flat; ++i) {
            const double* z = logits.row(i);
            for (std::size_t j = 1; j < logits.cols; ++j)
                if (std::abs(z[j] - z[0]) > 1e-12) {
                    all_flat = false;
                    break;
                }
        }
    if (all_flat) {
        TemperatureFit fit;
        fit.temperature = 1.0;
        fit.degenerate = true;
        fit.nll = ensemble_nll_at_temperature(logit_sets, labels, 1.0);
        return fit;
    }

    const auto objective = [&](double log_t) {
        return ensemble_nll_at_temperature(logit_sets, labels, std::exp(log_t));
    };
    double lo = std::log(0.05), hi = std::log(20.0);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - gr * (hi - lo);
    double d = lo + gr * (hi - lo);
    double fc = objective(c), fd = objective(d);
    while (hi - lo > 1e-7) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = objective(d);
        }
    }
    TemperatureFit fit;
    fit.temperature = std::exp(0.5 * (lo + hi));
    fit.nll = ensemble_nll_at_temperature(logit_sets, labels, fit.temperature);
    // never worse than the unscaled ensemble
    const double nll_unit = ensemble_nll_at_temperature(logit_sets, labels, 1.0);
    if (nll_unit <= fit.nll) {
        fit.temperature = 1.0;
        fit.nll = nll_unit;
    }
    return fit;
}

}  // namespace modec
