#pragma once

#include <cstdint>
#include <vector>

#include "gdes/matrix.hpp"

namespace gdes {

using GradVec = std::vector<double>;

enum class Activation { ReLU, Identity };

enum class LossKind {
    CrossEntropySoftmax,   // softmax + negative log-likelihood on class index
    MeanSquareError,       // mean over classes of squared error against one-hot
};

// One mini-batch: m input rows plus class labels.
struct Batch {
    Matrix inputs;             // m x features
    std::vector<int> labels;   // m entries in [0, k)

    std::size_t size() const { return labels.size(); }
};

enum class InitKind { XavierUniform, HeNormal };

struct InitScheme {
    InitKind kind = InitKind::HeNormal;
    std::uint64_t seed = 0;
};

struct DenseLayer {
    Matrix weights;               // out x in
    std::vector<double> biases;   // out
    Activation activation = Activation::ReLU;
};

// Feedforward network. Hidden layers use ReLU, the final layer always
// produces raw logits (Identity). Plain value type: copy to snapshot.
struct DenseNet {
    std::vector<DenseLayer> layers;

    std::size_t param_count() const;
    std::vector<double> flatten_params() const;
    // Loads a flat parameter vector in the same order flatten_params emits:
    // per layer, weights row-major, then biases.
    void load_params(const std::vector<double>& flat);
};

// Builds a network with the given layer widths, weights drawn per scheme
// (Xavier uniform: U[-sqrt(6/(fan_in+fan_out)), +...]; He normal:
// N(0, 2/fan_in)), biases zero. Weights are drawn layer by layer in
// row-major order, deterministically in the seed.
DenseNet init_network(const std::vector<std::size_t>& layer_sizes, const InitScheme& scheme);

// Everything backward() needs: the batch inputs plus each layer's pre- and
// post-activation values.
struct ForwardCache {
    Matrix inputs;
    std::vector<Matrix> pre_activations;    // one per layer, m x out
    std::vector<Matrix> post_activations;   // one per layer, m x out
};

struct ForwardResult {
    Matrix logits;   // m x k
    ForwardCache cache;
};

ForwardResult forward(const DenseNet& net, const Batch& batch);

// Per-sample surrogate losses; the batch loss everywhere is their mean.
std::vector<double> per_sample_losses(const Matrix& logits, const std::vector<int>& labels,
                                      LossKind kind);

// Gradient of the mean per-sample loss with respect to all parameters,
// flattened in flatten_params() order.
GradVec backward(const DenseNet& net, const ForwardCache& cache, const std::vector<int>& labels,
                 LossKind kind);

// Fraction of samples whose true-class logit fails to strictly dominate
// every other class. Exact ties count as errors.
double zero_one_error(const Matrix& logits, const std::vector<int>& labels);

// Mean surrogate loss and 0-1 error of a network over a batch.
struct EvalResult {
    double loss = 0.0;
    double error = 0.0;
};
EvalResult evaluate(const DenseNet& net, const Batch& batch, LossKind kind);

}  // namespace gdes
