#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "modec/data_io.hpp"
#include "modec/eval.hpp"

using namespace modec;

namespace {

Batch random_batch(std::size_t rows, std::size_t dim, std::size_t classes,
                   std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Batch b;
    b.inputs = Matrix(rows, dim);
    for (double& v : b.inputs.data) v = gauss(rng);
    b.labels.resize(rows);
    std::uniform_int_distribution<int> lab(0, static_cast<int>(classes) - 1);
    for (auto& l : b.labels) l = lab(rng);
    return b;
}

WeightVector vec2(double x, double y) {
    static const MLPConfig config{{1, 2}};
    WeightVector w;
    w.layout = WeightLayout::from_config(config);
    w.values = {x, y, 0.0, 0.0};
    return w;
}

}  // namespace

TEST_CASE("curve_report between identical endpoints is flat") {
    MLPConfig config{{2, 4, 2}};
    const auto w = init_params(config, 1);
    CurveSpec spec;
    spec.kind = CurveKind::bezier;
    spec.start = w;
    spec.end = init_params(config, 2);
    spec.bends = init_bends(spec.start, spec.end, 1);
    // shrink the curve to a point by collapsing end and bend onto start
    spec.end = w;
    spec.bends[0] = w;
    const Batch train = random_batch(30, 2, 2, 3);
    const Batch test = random_batch(20, 2, 2, 4);
    const auto rep = curve_report(spec, config, train, test, 21);
    for (std::size_t i = 0; i < rep.t_grid.size(); ++i) {
        CHECK(rep.train_loss[i] == doctest::Approx(rep.train_loss.front()).epsilon(1e-12));
        CHECK(rep.test_error[i] == rep.test_error.front());
    }
    CHECK(rep.train_loss_agg.min == doctest::Approx(rep.train_loss_agg.max).epsilon(1e-12));
    CHECK(rep.train_loss_agg.min == doctest::Approx(rep.train_loss_agg.mean));
    CHECK(rep.train_loss_agg.min == doctest::Approx(rep.train_loss_agg.integral));
    CHECK(std::isnan(rep.length_ratio));
}

TEST_CASE("curve_report aggregates: ordering and constant-metric identity") {
    MLPConfig config{{2, 4, 3}};
    config.l2_coeff = 0.001;
    CurveSpec spec;
    spec.kind = CurveKind::polychain;
    spec.start = init_params(config, 5);
    spec.end = init_params(config, 6);
    spec.bends = init_bends(spec.start, spec.end, 1, 7, 0.5);
    const Batch train = random_batch(40, 2, 3, 8);
    const Batch test = random_batch(25, 2, 3, 9);
    const auto rep = curve_report(spec, config, train, test, 31);

    REQUIRE(rep.t_grid.size() == 31);
    for (std::size_t i = 1; i < rep.t_grid.size(); ++i) CHECK(rep.t_grid[i] > rep.t_grid[i - 1]);
    for (const auto* agg : {&rep.train_loss_agg, &rep.train_error_agg, &rep.test_loss_agg,
                            &rep.test_error_agg}) {
        CHECK(agg->min <= agg->mean + 1e-15);
        CHECK(agg->min <= agg->integral + 1e-15);
        CHECK(agg->mean <= agg->max + 1e-15);
        CHECK(agg->integral <= agg->max + 1e-15);
    }
    CHECK(rep.length_ratio >= 1.0 - 1e-12);

    // endpoint rows match direct evaluation
    const auto res0 = predict_eval(spec.start, config, train);
    CHECK(rep.train_error.front() == res0.error_rate);
}

TEST_CASE("plane grid on hand-checkable 2-D vectors") {
    const auto w1 = vec2(0.0, 0.0);
    const auto w2 = vec2(2.0, 0.0);
    const auto w3 = vec2(1.0, 1.0);
    MLPConfig config{{1, 2}};
    Batch data;
    data.inputs = Matrix(4, 1);
    data.inputs(0, 0) = -1.0;
    data.inputs(1, 0) = -0.5;
    data.inputs(2, 0) = 0.5;
    data.inputs(3, 0) = 1.0;
    data.labels = {0, 0, 1, 1};
    const auto grid = plane_grid(w1, w2, w3, config, data, 5, 0.25);

    CHECK(grid.u_hat.values[0] == doctest::Approx(1.0));
    CHECK(grid.u_hat.values[1] == doctest::Approx(0.0));
    CHECK(grid.v_hat.values[0] == doctest::Approx(0.0));
    CHECK(grid.v_hat.values[1] == doctest::Approx(1.0));
    CHECK(grid.x2 == doctest::Approx(2.0));
    CHECK(grid.x3 == doctest::Approx(1.0));
    CHECK(grid.y3 == doctest::Approx(1.0));

    const auto [x1, y1] = plane_project(grid, w1);
    CHECK(std::abs(x1) < 1e-12);
    CHECK(std::abs(y1) < 1e-12);
    const auto [x2, y2] = plane_project(grid, w2);
    CHECK(x2 == doctest::Approx(2.0));
    CHECK(std::abs(y2) < 1e-12);
}

TEST_CASE("plane basis is orthonormal and projection round-trips") {
    MLPConfig config{{2, 5, 3}};
    const auto w1 = init_params(config, 11);
    const auto w2 = init_params(config, 12);
    const auto w3 = init_params(config, 13);
    const Batch data = random_batch(10, 2, 3, 14);
    const auto grid = plane_grid(w1, w2, w3, config, data, 4, 0.1);

    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t k = 0; k < grid.u_hat.values.size(); ++k) {
        uu += grid.u_hat.values[k] * grid.u_hat.values[k];
        vv += grid.v_hat.values[k] * grid.v_hat.values[k];
        uv += grid.u_hat.values[k] * grid.v_hat.values[k];
    }
    CHECK(std::abs(uu - 1.0) < 1e-12);
    CHECK(std::abs(vv - 1.0) < 1e-12);
    CHECK(std::abs(uv) < 1e-12);

    // reconstruct an arbitrary grid cell and project it back
    const double x = grid.xs[2], y = grid.ys[1];
    const auto p = plane_point(grid, x, y);
    const auto [px, py] = plane_project(grid, p);
    CHECK(std::abs(px - x) < 1e-10);
    CHECK(std::abs(py - y) < 1e-10);

    // grid-cell loss equals direct evaluation of the reconstructed point
    const auto res = predict_eval(p, config, data);
    CHECK(grid.loss(1, 2) == res.mean_nll);
}

TEST_CASE("plane grid rejects collinear anchors") {
    MLPConfig config{{2, 3, 2}};
    const auto w1 = init_params(config, 20);
    auto w2 = w1;
    auto w3 = w1;
    for (std::size_t k = 0; k < w1.values.size(); ++k) {
        w2.values[k] += 1.0;
        w3.values[k] += 2.0;
    }
    const Batch data = random_batch(5, 2, 2, 21);
    CHECK_THROWS_AS(plane_grid(w1, w2, w3, config, data, 3, 0.1), std::invalid_argument);
}

TEST_CASE("ensemble of one (or k copies) equals the single model") {
    MLPConfig config{{2, 5, 3}};
    const auto w = init_params(config, 30);
    const Batch data = random_batch(35, 2, 3, 31);
    const auto single = predict_eval(w, config, data);

    std::vector<EnsembleMember> one{{w, std::nullopt}};
    const auto e1 = ensemble_predict(one, config, data);
    CHECK(e1.error_rate == single.error_rate);
    CHECK(e1.mean_nll == doctest::Approx(single.mean_nll).epsilon(1e-14));

    std::vector<EnsembleMember> three{{w, std::nullopt}, {w, std::nullopt}, {w, std::nullopt}};
    const auto e3 = ensemble_predict(three, config, data);
    CHECK(e3.error_rate == single.error_rate);
    CHECK(e3.mean_nll == doctest::Approx(single.mean_nll).epsilon(1e-14));
}

TEST_CASE("complementary models: ensemble beats both by enumeration") {
    // two 1-feature nets, each confidently right on half the line
    MLPConfig config{{1, 2}};
    WeightVector a, b;
    a.layout = WeightLayout::from_config(config);
    b.layout = a.layout;
    // logits = [w0*x + b0, w1*x + b1]
    a.values = {4.0, -4.0, 0.0, 0.0};   // predicts class 0 for x>0
    b.values = {-4.0, 4.0, 0.0, 0.0};   // predicts class 1 for x>0

    Batch data;
    data.inputs = Matrix(4, 1);
    data.inputs(0, 0) = -2.0;
    data.inputs(1, 0) = -0.1;
    data.inputs(2, 0) = 0.1;
    data.inputs(3, 0) = 2.0;
    data.labels = {1, 0, 0, 1};

    const double ea = predict_eval(a, config, data).error_rate;
    const double eb = predict_eval(b, config, data).error_rate;
    std::vector<EnsembleMember> both{{a, std::nullopt}, {b, std::nullopt}};
    const double ens = ensemble_predict(both, config, data).error_rate;
    CHECK(ens <= std::min(ea, eb));
}

TEST_CASE("curve_point_ensemble at t=0 equals the endpoint error") {
    MLPConfig config{{2, 4, 2}};
    CurveSpec spec;
    spec.kind = CurveKind::polychain;
    spec.start = init_params(config, 40);
    spec.end = init_params(config, 41);
    spec.bends = init_bends(spec.start, spec.end, 1);
    const Batch data = random_batch(30, 2, 2, 42);

    const double e0 = curve_point_ensemble(spec, config, data, 0.0);
    CHECK(e0 == predict_eval(spec.start, config, data).error_rate);

    std::vector<EnsembleMember> pair{{spec.start, std::nullopt}, {spec.end, std::nullopt}};
    CHECK(curve_point_ensemble(spec, config, data, 1.0) ==
          ensemble_predict(pair, config, data).error_rate);
}

TEST_CASE("disagreement: zero on identical weights, symmetric, recount oracle") {
    MLPConfig config{{2, 5, 3}};
    const auto a = init_params(config, 50);
    const auto b = init_params(config, 51);
    const Batch data = random_batch(60, 2, 3, 52);
    CHECK(disagreement(a, a, config, data) == 0.0);
    CHECK(disagreement(a, b, config, data) == disagreement(b, a, config, data));

    const auto pa = predict_eval(a, config, data).probabilities;
    const auto pb = predict_eval(b, config, data).probabilities;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::size_t ba = 0, bb = 0;
        for (std::size_t j = 1; j < 3; ++j) {
            if (pa(i, j) > pa(i, ba)) ba = j;
            if (pb(i, j) > pb(i, bb)) bb = j;
        }
        if (ba != bb) ++diff;
    }
    CHECK(disagreement(a, b, config, data) == doctest::Approx(double(diff) / 60.0));
}

TEST_CASE("temperature scaling: calibrated logits fit T near 1") {
    // logits built so that softmax already matches the label distribution:
    // one confident, correct model whose probabilities are consistent
    std::mt19937_64 rng(60);
    const std::size_t n = 400;
    Matrix logits(n, 2);
    std::vector<int> labels(n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        // target probability p for class 1, logits = (0, log(p/(1-p)))
        const double p = 0.05 + 0.9 * unit(rng);
        logits(i, 0) = 0.0;
        logits(i, 1) = std::log(p / (1.0 - p));
        labels[i] = unit(rng) < p ? 1 : 0;
    }
    const auto fit = fit_temperature({logits}, labels);
    CHECK(!fit.degenerate);
    CHECK(fit.temperature == doctest::Approx(1.0).epsilon(0.35));
}

TEST_CASE("temperature scaling: reparametrization identity") {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = 300;
    Matrix logits(n, 3);
    std::vector<int> labels(n);
    // draw labels from softmax(logits / 2) so the optimal temperature is an
    // interior point of the search range
    for (std::size_t i = 0; i < n; ++i) {
        double p[3], sum = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            logits(i, j) = g(rng);
            p[j] = std::exp(logits(i, j) / 2.0);
            sum += p[j];
        }
        const double u = unit(rng) * sum;
        labels[i] = u < p[0] ? 0 : (u < p[0] + p[1] ? 1 : 2);
    }
    const auto base = fit_temperature({logits}, labels);
    Matrix scaled = logits;
    for (double& v : scaled.data) v *= 3.0;
    const auto tripled = fit_temperature({scaled}, labels);
    CHECK(tripled.temperature == doctest::Approx(3.0 * base.temperature).epsilon(0.01));
}

TEST_CASE("temperature scaling: degenerate flat logits return T=1 with warning") {
    Matrix logits(5, 3, 0.7);
    std::vector<int> labels{0, 1, 2, 0, 1};
    const auto fit = fit_temperature({logits}, labels);
    CHECK(fit.degenerate);
    CHECK(fit.temperature == 1.0);
}

TEST_CASE("high temperature drives ensemble probabilities toward uniform") {
    std::mt19937_64 rng(62);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix logits(10, 4);
    for (double& v : logits.data) v = g(rng);
    std::vector<int> labels(10, 0);
    const double nll = ensemble_nll_at_temperature({logits}, labels, 1e6);
    CHECK(nll == doctest::Approx(std::log(4.0)).epsilon(1e-4));
}

TEST_CASE("fitted temperature never increases held-out NLL") {
    std::mt19937_64 rng(63);
    std::normal_distribution<double> g(0.0, 3.0);
    std::vector<Matrix> sets;
    for (int m = 0; m < 3; ++m) {
        Matrix logits(100, 3);
        for (double& v : logits.data) v = g(rng);
        sets.push_back(std::move(logits));
    }
    std::vector<int> labels(100);
    std::uniform_int_distribution<int> lab(0, 2);
    for (auto& l : labels) l = lab(rng);
    const auto fit = fit_temperature(sets, labels);
    CHECK(fit.nll <= ensemble_nll_at_temperature(sets, labels, 1.0) + 1e-12);
}

TEST_CASE("plane grid is identical for any thread count") {
    const Dataset blobs = gen_synthetic(SyntheticKind::gaussian_blobs, 45, 0.4, 64);
    MLPConfig config{{2, 5, 3}};
    config.l2_coeff = 0.001;
    const auto w1 = init_params(config, 65);
    const auto w2 = init_params(config, 66);
    const auto w3 = init_params(config, 67);
    const PlaneGrid serial = plane_grid(w1, w2, w3, config, blobs.data, 7, 0.2, 1);
    const PlaneGrid parallel = plane_grid(w1, w2, w3, config, blobs.data, 7, 0.2, 4);
    CHECK(serial.loss.data == parallel.loss.data);
    CHECK(serial.error.data == parallel.error.data);
    CHECK(serial.xs == parallel.xs);
}
