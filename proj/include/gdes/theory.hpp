#pragma once

#include <vector>

#include "gdes/net.hpp"

namespace gdes {

// Diagonal-covariance Gaussian; the isotropic case sets every variance to
// the same sigma^2.
struct GaussianDiag {
    std::vector<double> mean;
    std::vector<double> variance;   // all entries > 0

    static GaussianDiag isotropic(std::vector<double> mean, double sigma2);
};

// Inputs of the two-sided generalization-penalty bound.
struct BoundInputs {
    double m1 = 0.0;       // batch sizes, both > 2
    double m2 = 0.0;
    double delta = 0.05;   // confidence, in (0, 1]
    double kl12 = 0.0;     // KL(Q1 || Q2) >= 0
    double kl21 = 0.0;     // KL(Q2 || Q1) >= 0
};

// KL(N1 || N2) for diagonal Gaussians:
// 0.5 * (tr(S2^-1 S1) - d + (mu2-mu1)^T S2^-1 (mu2-mu1) + ln det S2/det S1).
double kl_gaussian(const GaussianDiag& n1, const GaussianDiag& n2);

// KL between the posteriors N(w - lr*g1, sigma^2 I) and N(w - lr*g2,
// sigma^2 I): 0.5 (lr/sigma)^2 ||g1-g2||^2, independent of w and symmetric.
double kl_sgd_posteriors(double learning_rate, const GradVec& g1, const GradVec& g2,
                         double sigma);

// sqrt((2 kl21 + 2 ln(2 m2/delta)) / (m2-2)) +
// sqrt((2 kl12 + 2 ln(2 m1/delta)) / (m1-2)).
double penalty_bound(const BoundInputs& inputs);

// First-order approximation of the summed penalties: lr * ||g1-g2||^2.
double taylor_penalty(double learning_rate, const GradVec& g1, const GradVec& g2);

// Measured penalties at parameter vector w: with w_i = w - lr * g_i,
// R1 = L_{S1}(w2) - L_{S1}(w1) and R2 = L_{S2}(w1) - L_{S2}(w2), on the
// surrogate loss.
struct PenaltyPair {
    double r1 = 0.0;
    double r2 = 0.0;
};
PenaltyPair empirical_penalties(const DenseNet& net, const Batch& batch1, const Batch& batch2,
                                double learning_rate, LossKind kind);

// One-sided tail bound for the mean of n i.i.d. variables on [a, b]:
// exp(-2 n t^2 / (b-a)^2).
double hoeffding_tail(std::size_t n, double t, double a, double b);

}  // namespace gdes
