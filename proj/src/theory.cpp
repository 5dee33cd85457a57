#include "gdes/theory.hpp"

#include <cmath>

#include "gdes/errors.hpp"

namespace gdes {

GaussianDiag GaussianDiag::isotropic(std::vector<double> mean, double sigma2) {
    if (sigma2 <= 0.0) throw ConfigError("variance must be positive");
    GaussianDiag g;
    g.variance.assign(mean.size(), sigma2);
    g.mean = std::move(mean);
    return g;
}

double kl_gaussian(const GaussianDiag& n1, const GaussianDiag& n2) {
    const std::size_t d = n1.mean.size();
    if (n1.variance.size() != d || n2.mean.size() != d || n2.variance.size() != d)
        throw ConfigError("Gaussian dimension mismatch");
    double acc = -static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double v1 = n1.variance[i];
        const double v2 = n2.variance[i];
        if (v1 <= 0.0 || v2 <= 0.0) throw ConfigError("variances must be positive");
        const double dm = n2.mean[i] - n1.mean[i];
        acc += v1 / v2 + dm * dm / v2 + std::log(v2 / v1);
    }
    return 0.5 * acc;
}

double kl_sgd_posteriors(double learning_rate, const GradVec& g1, const GradVec& g2,
                         double sigma) {
    if (sigma <= 0.0) throw ConfigError("perturbation std must be positive");
    if (g1.size() != g2.size()) throw ConfigError("gradient length mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < g1.size(); ++i) {
        const double diff = g1[i] - g2[i];
        sq += diff * diff;
    }
    const double ratio = learning_rate / sigma;
    return 0.5 * ratio * ratio * sq;
}

double penalty_bound(const BoundInputs& inputs) {
    if (inputs.m1 <= 2.0 || inputs.m2 <= 2.0)
        throw ConfigError("batch sizes must exceed 2");
    if (inputs.delta <= 0.0 || inputs.delta > 1.0)
        throw ConfigError("confidence must lie in (0, 1]");
    if (inputs.kl12 < 0.0 || inputs.kl21 < 0.0)
        throw ConfigError("KL terms must be nonnegative");
    const double term2 =
        std::sqrt((2.0 * inputs.kl21 + 2.0 * std::log(2.0 * inputs.m2 / inputs.delta)) /
                  (inputs.m2 - 2.0));
    const double term1 =
        std::sqrt((2.0 * inputs.kl12 + 2.0 * std::log(2.0 * inputs.m1 / inputs.delta)) /
                  (inputs.m1 - 2.0));
    return term2 + term1;
}

double taylor_penalty(double learning_rate, const GradVec& g1, const GradVec& g2) {
    if (g1.size() != g2.size()) throw ConfigError("gradient length mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < g1.size(); ++i) {
        const double diff = g1[i] - g2[i];
        sq += diff * diff;
    }
    return learning_rate * sq;
}

PenaltyPair empirical_penalties(const DenseNet& net, const Batch& batch1, const Batch& batch2,
                                double learning_rate, LossKind kind) {
    const ForwardResult fwd1 = forward(net, batch1);
    const ForwardResult fwd2 = forward(net, batch2);
    const GradVec g1 = backward(net, fwd1.cache, batch1.labels, kind);
    const GradVec g2 = backward(net, fwd2.cache, batch2.labels, kind);

    const std::vector<double> base = net.flatten_params();
    std::vector<double> w1 = base, w2 = base;
    for (std::size_t i = 0; i < base.size(); ++i) {
        w1[i] -= learning_rate * g1[i];
        w2[i] -= learning_rate * g2[i];
    }

    DenseNet net1 = net;
    net1.load_params(w1);
    DenseNet net2 = net;
    net2.load_params(w2);

    const double loss_s1_w1 = evaluate(net1, batch1, kind).loss;
    const double loss_s1_w2 = evaluate(net2, batch1, kind).loss;
    const double loss_s2_w1 = evaluate(net1, batch2, kind).loss;
    const double loss_s2_w2 = evaluate(net2, batch2, kind).loss;

    return {loss_s1_w2 - loss_s1_w1, loss_s2_w1 - loss_s2_w2};
}

double hoeffding_tail(std::size_t n, double t, double a, double b) {
    if (n < 1) throw ConfigError("need at least one variable");
    if (t < 0.0) throw ConfigError("deviation must be nonnegative");
    if (b <= a) throw ConfigError("interval must have positive length");
    const double width = b - a;
    return std::exp(-2.0 * static_cast<double>(n) * t * t / (width * width));
}

}  // namespace gdes
