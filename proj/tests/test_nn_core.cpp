#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gdes/errors.hpp"
#include "gdes/net.hpp"
#include "gdes/rng.hpp"

using namespace gdes;

namespace {

Batch random_batch(std::size_t m, std::size_t features, int classes, std::uint64_t seed) {
    Rng rng(seed);
    Batch batch;
    batch.inputs = Matrix(m, features);
    for (double& v : batch.inputs.data) v = rng.normal();
    batch.labels.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        batch.labels[i] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes)));
    return batch;
}

double batch_mean_loss(const DenseNet& net, const Batch& batch, LossKind kind) {
    const ForwardResult fwd = forward(net, batch);
    const auto losses = per_sample_losses(fwd.logits, batch.labels, kind);
    double acc = 0.0;
    for (double l : losses) acc += l;
    return acc / static_cast<double>(losses.size());
}

// Central finite differences on the flat parameter vector.
double fd_gradient(const DenseNet& net, const Batch& batch, LossKind kind, std::size_t coord,
                   double step) {
    std::vector<double> params = net.flatten_params();
    DenseNet probe = net;
    params[coord] += step;
    probe.load_params(params);
    const double up = batch_mean_loss(probe, batch, kind);
    params[coord] -= 2.0 * step;
    probe.load_params(params);
    const double down = batch_mean_loss(probe, batch, kind);
    return (up - down) / (2.0 * step);
}

}  // namespace

TEST_CASE("init_network counts parameters") {
    DenseNet tiny = init_network({2, 1}, {InitKind::XavierUniform, 3});
    CHECK(tiny.param_count() == 3);
    for (auto& layer : tiny.layers) {
        for (double& w : layer.weights.data) w = 0.0;
    }
    Batch batch = random_batch(4, 2, 1, 9);
    const ForwardResult fwd = forward(tiny, batch);
    for (double v : fwd.logits.data) CHECK(v == 0.0);

    // Independent arithmetic oracle: sum of (in*out + out) over consecutive
    // pairs, checked against two MNIST-scale layer stacks.
    auto oracle = [](const std::vector<std::size_t>& sizes) {
        std::size_t total = 0;
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
            total += sizes[i] * sizes[i + 1] + sizes[i + 1];
        return total;
    };

    const std::vector<std::size_t> three_hidden{784, 500, 500, 500, 10};
    CHECK(oracle(three_hidden) == 784 * 500 + 500 + 2 * (500 * 500 + 500) + 500 * 10 + 10);
    CHECK(oracle(three_hidden) == 898510);
    CHECK(init_network(three_hidden, {InitKind::HeNormal, 1}).param_count() ==
          oracle(three_hidden));

    const std::vector<std::size_t> four_hidden{784, 500, 500, 500, 500, 10};
    CHECK(oracle(four_hidden) == 1149010);
    CHECK(init_network(four_hidden, {InitKind::HeNormal, 1}).param_count() ==
          oracle(four_hidden));
}

TEST_CASE("init_network is deterministic in the seed") {
    const DenseNet a = init_network({5, 4, 3}, {InitKind::HeNormal, 42});
    const DenseNet b = init_network({5, 4, 3}, {InitKind::HeNormal, 42});
    const DenseNet c = init_network({5, 4, 3}, {InitKind::HeNormal, 43});
    CHECK(a.flatten_params() == b.flatten_params());
    CHECK(a.flatten_params() != c.flatten_params());
}

TEST_CASE("init_network draws match the scheme bounds") {
    const DenseNet net = init_network({30, 20}, {InitKind::XavierUniform, 7});
    const double limit = std::sqrt(6.0 / (30 + 20));
    for (double w : net.layers[0].weights.data) {
        CHECK(w <= limit);
        CHECK(w >= -limit);
    }
    for (double b : net.layers[0].biases) CHECK(b == 0.0);
}

TEST_CASE("init_network rejects bad shapes") {
    CHECK_THROWS_AS(init_network({5}, {}), ConfigError);
    CHECK_THROWS_AS(init_network({5, 0, 2}, {}), ConfigError);
}

TEST_CASE("forward of a single linear layer is W x + b") {
    DenseNet net = init_network({3, 2}, {InitKind::XavierUniform, 5});
    net.layers[0].biases = {0.5, -1.0};
    Batch batch = random_batch(6, 3, 2, 11);
    const ForwardResult fwd = forward(net, batch);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double expect = net.layers[0].biases[j];
            for (std::size_t c = 0; c < 3; ++c)
                expect += net.layers[0].weights(j, c) * batch.inputs(i, c);
            CHECK(fwd.logits(i, j) == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("forward matches a naive loop oracle on a two-layer net") {
    const DenseNet net = init_network({4, 6, 3}, {InitKind::HeNormal, 17});
    const Batch batch = random_batch(5, 4, 3, 23);

    const ForwardResult fwd = forward(net, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::vector<double> hidden(6, 0.0);
        for (std::size_t j = 0; j < 6; ++j) {
            double acc = net.layers[0].biases[j];
            for (std::size_t c = 0; c < 4; ++c)
                acc += net.layers[0].weights(j, c) * batch.inputs(i, c);
            hidden[j] = acc > 0.0 ? acc : 0.0;
        }
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = net.layers[1].biases[j];
            for (std::size_t c = 0; c < 6; ++c) acc += net.layers[1].weights(j, c) * hidden[c];
            CHECK(fwd.logits(i, j) == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward is side-effect free and deterministic") {
    const DenseNet net = init_network({4, 5, 2}, {InitKind::HeNormal, 3});
    const std::vector<double> before = net.flatten_params();
    const Batch batch = random_batch(7, 4, 2, 31);
    const ForwardResult a = forward(net, batch);
    const ForwardResult b = forward(net, batch);
    CHECK(a.logits.data == b.logits.data);
    CHECK(net.flatten_params() == before);
}

TEST_CASE("forward rejects width mismatch") {
    const DenseNet net = init_network({4, 2}, {});
    const Batch batch = random_batch(3, 5, 2, 1);
    CHECK_THROWS_AS(forward(net, batch), ConfigError);
}

TEST_CASE("cross entropy of uniform logits is ln k") {
    Matrix logits(4, 7);
    for (double& v : logits.data) v = 1.3;   // any constant
    const std::vector<int> labels{0, 3, 5, 6};
    const auto losses = per_sample_losses(logits, labels, LossKind::CrossEntropySoftmax);
    for (double l : losses) CHECK(l == doctest::Approx(std::log(7.0)).epsilon(1e-15));
}

TEST_CASE("cross entropy per-sample values and positivity") {
    Matrix logits(1, 2);
    logits(0, 0) = 2.0;
    logits(0, 1) = 0.0;
    const auto losses = per_sample_losses(logits, {0}, LossKind::CrossEntropySoftmax);
    // Softmax by hand: -ln(e^2 / (e^2 + 1)).
    const double expected = -std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
    CHECK(losses[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(losses[0] >= 0.0);
}

TEST_CASE("perfect one-hot MSE prediction scores zero") {
    Matrix logits(2, 3);
    logits(0, 1) = 1.0;
    logits(1, 2) = 1.0;
    const auto losses = per_sample_losses(logits, {1, 2}, LossKind::MeanSquareError);
    CHECK(losses[0] == 0.0);
    CHECK(losses[1] == 0.0);
}

TEST_CASE("per_sample_losses rejects out-of-range labels") {
    Matrix logits(1, 3);
    CHECK_THROWS_AS(per_sample_losses(logits, {3}, LossKind::CrossEntropySoftmax), ConfigError);
    CHECK_THROWS_AS(per_sample_losses(logits, {-1}, LossKind::CrossEntropySoftmax), ConfigError);
}

TEST_CASE("CE output delta is softmax minus one-hot over m") {
    // Single linear layer with zero weights: logits are all zero, softmax is
    // uniform, so the bias gradient must be (1/k - onehot) averaged over the
    // batch.
    DenseNet net = init_network({2, 3}, {InitKind::HeNormal, 1});
    for (double& w : net.layers[0].weights.data) w = 0.0;
    Batch batch = random_batch(4, 2, 3, 77);
    batch.labels = {0, 0, 1, 2};
    const ForwardResult fwd = forward(net, batch);
    const GradVec grad = backward(net, fwd.cache, batch.labels, LossKind::CrossEntropySoftmax);
    // Bias gradient lives after the 6 weight entries.
    const double third = 1.0 / 3.0;
    const double expected_b0 = ((third - 1) * 2 + third * 2) / 4.0;
    const double expected_b1 = ((third - 1) * 1 + third * 3) / 4.0;
    const double expected_b2 = ((third - 1) * 1 + third * 3) / 4.0;
    CHECK(grad[6] == doctest::Approx(expected_b0).epsilon(1e-14));
    CHECK(grad[7] == doctest::Approx(expected_b1).epsilon(1e-14));
    CHECK(grad[8] == doctest::Approx(expected_b2).epsilon(1e-14));
}

TEST_CASE("gradient vanishes at an exact MSE optimum of a linear net") {
    DenseNet net = init_network({2, 2}, {InitKind::HeNormal, 1});
    net.layers[0].weights(0, 0) = 1.0;
    net.layers[0].weights(0, 1) = 0.0;
    net.layers[0].weights(1, 0) = 0.0;
    net.layers[0].weights(1, 1) = 1.0;
    Batch batch;
    batch.inputs = Matrix(2, 2);
    batch.inputs(0, 0) = 1.0;
    batch.inputs(1, 1) = 1.0;
    batch.labels = {0, 1};
    const ForwardResult fwd = forward(net, batch);
    const GradVec grad = backward(net, fwd.cache, batch.labels, LossKind::MeanSquareError);
    for (double g : grad) CHECK(g == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("backward rejects a stale cache") {
    const DenseNet net = init_network({3, 4, 2}, {InitKind::HeNormal, 5});
    const DenseNet other = init_network({3, 5, 2}, {InitKind::HeNormal, 5});
    const Batch batch = random_batch(4, 3, 2, 13);
    const ForwardResult fwd = forward(other, batch);
    CHECK_THROWS_AS(backward(net, fwd.cache, batch.labels, LossKind::CrossEntropySoftmax),
                    ConfigError);
}

TEST_CASE("analytic gradients match central finite differences") {
    const double step = 1e-6;
    for (const LossKind kind : {LossKind::CrossEntropySoftmax, LossKind::MeanSquareError}) {
        const DenseNet net = init_network({10, 8, 5}, {InitKind::HeNormal, 99});
        const Batch batch = random_batch(8, 10, 5, 101);
        const ForwardResult fwd = forward(net, batch);
        const GradVec analytic = backward(net, fwd.cache, batch.labels, kind);

        Rng rng(55);
        double max_rel = 0.0;
        for (int trial = 0; trial < 120; ++trial) {
            const auto coord =
                static_cast<std::size_t>(rng.next_below(net.param_count()));
            const double fd = fd_gradient(net, batch, kind, coord, step);
            const double denom = std::max({std::abs(fd), std::abs(analytic[coord]), 1e-3});
            max_rel = std::max(max_rel, std::abs(fd - analytic[coord]) / denom);
        }
        CHECK(max_rel <= 1e-4);
    }
}

TEST_CASE("CE gradient is invariant to per-sample logit shifts") {
    // Adding a constant to every logit (via the output biases) must leave
    // the weight gradients untouched.
    DenseNet net = init_network({3, 4}, {InitKind::HeNormal, 21});
    DenseNet shifted = net;
    for (double& b : shifted.layers[0].biases) b += 2.5;

    const Batch batch = random_batch(5, 3, 4, 43);
    const ForwardResult fwd_a = forward(net, batch);
    const ForwardResult fwd_b = forward(shifted, batch);
    const GradVec ga = backward(net, fwd_a.cache, batch.labels, LossKind::CrossEntropySoftmax);
    const GradVec gb =
        backward(shifted, fwd_b.cache, batch.labels, LossKind::CrossEntropySoftmax);
    const std::size_t weight_count = net.layers[0].weights.size();
    for (std::size_t i = 0; i < weight_count; ++i)
        CHECK(ga[i] == doctest::Approx(gb[i]).epsilon(1e-12));
}

TEST_CASE("zero_one_error counts ties as errors") {
    Matrix perfect(2, 3);
    perfect(0, 0) = 5.0;
    perfect(1, 2) = 5.0;
    CHECK(zero_one_error(perfect, {0, 2}) == 0.0);

    Matrix uniform(3, 4);
    for (double& v : uniform.data) v = 0.25;
    CHECK(zero_one_error(uniform, {0, 1, 2}) == 1.0);
}

TEST_CASE("random labels land near 1 - 1/k error") {
    // Monte Carlo oracle: random logits vs random labels over k classes.
    const int k = 5;
    const std::size_t m = 20000;
    Rng rng(7);
    Matrix logits(m, k);
    for (double& v : logits.data) v = rng.normal();
    std::vector<int> labels(m);
    for (auto& l : labels) l = static_cast<int>(rng.next_below(k));
    const double err = zero_one_error(logits, labels);
    CHECK(err == doctest::Approx(1.0 - 1.0 / k).epsilon(0.03));
}
