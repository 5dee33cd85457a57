#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "gdes/net.hpp"

namespace gdes {

// Update rules. Accumulator vectors are sized lazily on the first step;
// every state is a plain value that may be copied to snapshot a run.
//
// Defaults follow the experimental setup: learning rate 0.01, momentum
// decay 0.9, Adam betas 0.9/0.999, epsilon 1e-8.

struct Sgd {
    double learning_rate = 0.01;
};

struct Momentum {
    double learning_rate = 0.01;
    double decay = 0.9;                 // eta; 0 reduces to vanilla SGD
    std::vector<double> velocity;
};

struct Adagrad {
    double learning_rate = 0.01;
    double epsilon = 1e-8;
    std::vector<double> accum_sq_grad;  // G, nondecreasing elementwise
};

// The literal description also matches RMSProp, so this type serves both
// names: a decayed average of squared gradients with a fixed learning rate.
struct Adadelta {
    double learning_rate = 0.01;
    double decay = 0.9;                 // eta
    double epsilon = 1e-8;
    std::vector<double> avg_sq_grad;    // v
};
using RmsProp = Adadelta;

struct Adam {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> first_moment;    // m
    std::vector<double> second_moment;   // v
    std::int64_t step_count = 0;         // t, incremented before bias correction
};

using OptimizerState = std::variant<Sgd, Momentum, Adagrad, Adadelta, Adam>;

// Applies one update in place. Throws NumericError on non-finite gradient
// entries, ConfigError on length mismatches.
void step(OptimizerState& state, std::vector<double>& params, const GradVec& grad);

// KL divergence between the two Gaussian posteriors induced by updating on
// either of two batches with gradients g1, g2 under perturbation std sigma.
// For SGD and momentum this is exact: 0.5 (lr/sigma)^2 ||g1-g2||^2. For the
// adaptive optimizers it is the corresponding upper bound evaluated with the
// state's current accumulator, in the elementwise form (the division happens
// inside the norm, before any norm-product relaxation). Adam requires at
// least one completed step.
double kl_bound_factor(const OptimizerState& state, const GradVec& g1, const GradVec& g2,
                       double sigma);

}  // namespace gdes
