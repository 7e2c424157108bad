#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "modec/data_io.hpp"
#include "modec/fge.hpp"
#include "modec/trivial.hpp"

using namespace modec;

TEST_CASE("trivial_point endpoints: t=1 is identity, t=0 is the zero vector") {
    MLPConfig config{{2, 5, 4, 3}};
    const auto w = init_params(config, 3);
    CHECK(trivial_point(w, config, 1.0).values == w.values);
    for (double v : trivial_point(w, config, 0.0).values) CHECK(v == 0.0);
}

TEST_CASE("two-layer net at t=0.5 scales logits by 0.25") {
    MLPConfig config{{2, 4, 2}};
    const auto w = init_params(config, 4);
    Batch b;
    b.inputs = Matrix(3, 2);
    b.inputs(0, 0) = 0.4;
    b.inputs(0, 1) = -1.1;
    b.inputs(1, 0) = 2.0;
    b.inputs(1, 1) = 0.3;
    b.inputs(2, 0) = -0.7;
    b.inputs(2, 1) = -0.2;
    b.labels = {0, 1, 0};
    const Matrix base = forward(w, config, b);
    const Matrix scaled = forward(trivial_point(w, config, 0.5), config, b);
    for (std::size_t i = 0; i < base.data.size(); ++i)
        CHECK(scaled.data[i] == doctest::Approx(0.25 * base.data[i]).epsilon(1e-12));
}

TEST_CASE("trivial_point rejects batch-norm configs and bad t") {
    MLPConfig config{{2, 3, 2}};
    config.batch_norm = true;
    const auto w = init_params(config, 5);
    CHECK_THROWS_AS(trivial_point(w, config, 0.5), std::invalid_argument);

    MLPConfig plain{{2, 3, 2}};
    const auto w2 = init_params(plain, 5);
    CHECK_THROWS_AS(trivial_point(w2, plain, 1.5), std::invalid_argument);
}

TEST_CASE("trivial_check on a trained net: argmax invariant, tight scaling identity") {
    const Dataset blobs = gen_synthetic(SyntheticKind::gaussian_blobs, 150, 0.35, 6);
    MLPConfig config{{2, 8, 3}};
    PretrainConfig pre;
    pre.epochs = 10;
    pre.batch_size = 16;
    const auto w = pretrain(config, blobs.data, pre, 7);

    std::vector<double> grid;
    for (int k = 1; k <= 10; ++k) grid.push_back(k / 10.0);
    const auto rep = trivial_check(w, config, blobs.data, grid);
    CHECK(rep.argmax_invariant);
    CHECK(rep.logit_ratio_error < 1e-9);

    // error rate is constant for every t > 0
    const double base_err = predict_eval(w, config, blobs.data).error_rate;
    for (double t : grid) {
        const auto wt = trivial_point(w, config, t);
        CHECK(predict_eval(wt, config, blobs.data).error_rate == base_err);
    }

    // shrunken logits are less confident: loss at t=0.5 >= loss at t=1
    CHECK(rep.loss_at_t[4] >= rep.loss_at_t[9]);
}

TEST_CASE("trivial_check rejects t outside (0, 1]") {
    MLPConfig config{{2, 3, 2}};
    const auto w = init_params(config, 9);
    Batch b;
    b.inputs = Matrix(1, 2, 0.5);
    b.labels = {0};
    CHECK_THROWS_AS(trivial_check(w, config, b, {0.0, 0.5}), std::invalid_argument);
}
