#include "gdes/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gdes/errors.hpp"
#include "gdes/rng.hpp"

namespace gdes {

namespace {

// C = A (m x n) * B^T (k x n), i.e. C[i][j] = sum_l A[i][l] * B[j][l].
// Four output columns per pass so the a-row streams once per block and the
// four dot products carry independent accumulator chains. Summation order
// per entry is fixed (ascending l), keeping results run-to-run identical.
void matmul_bt(const Matrix& a, const Matrix& b, Matrix& out) {
    out = Matrix(a.rows, b.rows);
    const std::size_t n = a.cols;
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        std::size_t j = 0;
        for (; j + 4 <= b.rows; j += 4) {
            const double* b0 = b.row(j);
            const double* b1 = b.row(j + 1);
            const double* b2 = b.row(j + 2);
            const double* b3 = b.row(j + 3);
            double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
            for (std::size_t l = 0; l < n; ++l) {
                const double av = arow[l];
                acc0 += av * b0[l];
                acc1 += av * b1[l];
                acc2 += av * b2[l];
                acc3 += av * b3[l];
            }
            orow[j] = acc0;
            orow[j + 1] = acc1;
            orow[j + 2] = acc2;
            orow[j + 3] = acc3;
        }
        for (; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t l = 0; l < n; ++l) acc += arow[l] * brow[l];
            orow[j] = acc;
        }
    }
}

// C = A (m x n) * B (n x k); used for propagating deltas (delta * W).
void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    out = Matrix(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t l = 0; l < a.cols; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = b.row(l);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
        }
    }
}

void softmax_row(const double* logits, std::size_t k, double* out) {
    double maxv = logits[0];
    for (std::size_t j = 1; j < k; ++j) maxv = std::max(maxv, logits[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        out[j] = std::exp(logits[j] - maxv);
        sum += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
}

}  // namespace

std::size_t DenseNet::param_count() const {
    std::size_t d = 0;
    for (const auto& layer : layers) d += layer.weights.size() + layer.biases.size();
    return d;
}

std::vector<double> DenseNet::flatten_params() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto& layer : layers) {
        flat.insert(flat.end(), layer.weights.data.begin(), layer.weights.data.end());
        flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
    }
    return flat;
}

void DenseNet::load_params(const std::vector<double>& flat) {
    if (flat.size() != param_count())
        throw ConfigError("parameter vector length " + std::to_string(flat.size()) +
                          " does not match network size " + std::to_string(param_count()));
    std::size_t pos = 0;
    for (auto& layer : layers) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), layer.weights.size(),
                    layer.weights.data.begin());
        pos += layer.weights.size();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), layer.biases.size(),
                    layer.biases.begin());
        pos += layer.biases.size();
    }
}

DenseNet init_network(const std::vector<std::size_t>& layer_sizes, const InitScheme& scheme) {
    if (layer_sizes.size() < 2) throw ConfigError("need at least two layer sizes");
    for (std::size_t s : layer_sizes)
        if (s == 0) throw ConfigError("layer sizes must be positive");

    Rng rng(scheme.seed);
    DenseNet net;
    net.layers.resize(layer_sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t fan_in = layer_sizes[l];
        const std::size_t fan_out = layer_sizes[l + 1];
        DenseLayer& layer = net.layers[l];
        layer.weights = Matrix(fan_out, fan_in);
        layer.biases.assign(fan_out, 0.0);
        layer.activation =
            (l + 2 == layer_sizes.size()) ? Activation::Identity : Activation::ReLU;
        if (scheme.kind == InitKind::XavierUniform) {
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            for (double& w : layer.weights.data) w = rng.uniform(-limit, limit);
        } else {
            const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (double& w : layer.weights.data) w = rng.normal(0.0, stddev);
        }
    }
    return net;
}

ForwardResult forward(const DenseNet& net, const Batch& batch) {
    if (net.layers.empty()) throw ConfigError("empty network");
    if (batch.inputs.cols != net.layers.front().weights.cols)
        throw ConfigError("input width " + std::to_string(batch.inputs.cols) +
                          " does not match first layer fan-in " +
                          std::to_string(net.layers.front().weights.cols));
    if (batch.inputs.rows != batch.labels.size())
        throw ConfigError("batch inputs/labels row mismatch");

    ForwardResult result;
    result.cache.inputs = batch.inputs;
    result.cache.pre_activations.reserve(net.layers.size());
    result.cache.post_activations.reserve(net.layers.size());

    const Matrix* current = &batch.inputs;
    for (const auto& layer : net.layers) {
        Matrix z;
        matmul_bt(*current, layer.weights, z);
        for (std::size_t i = 0; i < z.rows; ++i) {
            double* zrow = z.row(i);
            for (std::size_t j = 0; j < z.cols; ++j) zrow[j] += layer.biases[j];
        }
        result.cache.pre_activations.push_back(z);
        if (layer.activation == Activation::ReLU) {
            for (double& v : z.data) v = std::max(v, 0.0);
        }
        result.cache.post_activations.push_back(std::move(z));
        current = &result.cache.post_activations.back();
    }
    result.logits = result.cache.post_activations.back();
    return result;
}

std::vector<double> per_sample_losses(const Matrix& logits, const std::vector<int>& labels,
                                      LossKind kind) {
    if (logits.rows != labels.size()) throw ConfigError("logits/labels row mismatch");
    const std::size_t m = logits.rows;
    const std::size_t k = logits.cols;
    std::vector<double> losses(m);
    for (std::size_t i = 0; i < m; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw ConfigError("label " + std::to_string(y) + " out of range for " +
                              std::to_string(k) + " classes");
        const double* row = logits.row(i);
        if (kind == LossKind::CrossEntropySoftmax) {
            double maxv = row[0];
            for (std::size_t j = 1; j < k; ++j) maxv = std::max(maxv, row[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - maxv);
            losses[i] = std::log(sum) + maxv - row[static_cast<std::size_t>(y)];
        } else {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const double target = (static_cast<std::size_t>(y) == j) ? 1.0 : 0.0;
                const double diff = row[j] - target;
                acc += diff * diff;
            }
            losses[i] = acc / static_cast<double>(k);
        }
    }
    return losses;
}

GradVec backward(const DenseNet& net, const ForwardCache& cache, const std::vector<int>& labels,
                 LossKind kind) {
    const std::size_t num_layers = net.layers.size();
    if (cache.pre_activations.size() != num_layers ||
        cache.post_activations.size() != num_layers)
        throw ConfigError("cache does not match network depth");
    for (std::size_t l = 0; l < num_layers; ++l) {
        const std::size_t expect_in =
            (l == 0) ? cache.inputs.cols : cache.post_activations[l - 1].cols;
        if (net.layers[l].weights.cols != expect_in ||
            net.layers[l].weights.rows != cache.pre_activations[l].cols)
            throw ConfigError("cache layer shapes do not match network");
    }
    const Matrix& logits = cache.post_activations.back();
    if (logits.rows != labels.size()) throw ConfigError("cache/labels row mismatch");

    const std::size_t m = logits.rows;
    const std::size_t k = logits.cols;
    const double inv_m = 1.0 / static_cast<double>(m);

    // Delta of the mean loss w.r.t. the output pre-activation.
    Matrix delta(m, k);
    if (kind == LossKind::CrossEntropySoftmax) {
        for (std::size_t i = 0; i < m; ++i) {
            softmax_row(logits.row(i), k, delta.row(i));
            delta(i, static_cast<std::size_t>(labels[i])) -= 1.0;
            for (std::size_t j = 0; j < k; ++j) delta(i, j) *= inv_m;
        }
    } else {
        const double scale = 2.0 / static_cast<double>(k) * inv_m;
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = logits.row(i);
            for (std::size_t j = 0; j < k; ++j) {
                const double target = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
                delta(i, j) = scale * (row[j] - target);
            }
        }
    }

    GradVec flat(net.param_count(), 0.0);
    // Per-layer gradient segments, walked back to front.
    std::vector<std::size_t> offsets(num_layers);
    std::size_t pos = 0;
    for (std::size_t l = 0; l < num_layers; ++l) {
        offsets[l] = pos;
        pos += net.layers[l].weights.size() + net.layers[l].biases.size();
    }

    for (std::size_t l = num_layers; l-- > 0;) {
        const DenseLayer& layer = net.layers[l];
        const Matrix& input =
            (l == 0) ? cache.inputs : cache.post_activations[l - 1];
        double* wgrad = flat.data() + offsets[l];
        double* bgrad = wgrad + layer.weights.size();

        // dW[j][c] = sum_i delta[i][j] * input[i][c]; db[j] = sum_i delta[i][j]
        for (std::size_t i = 0; i < m; ++i) {
            const double* drow = delta.row(i);
            const double* irow = input.row(i);
            for (std::size_t j = 0; j < layer.weights.rows; ++j) {
                const double dv = drow[j];
                if (dv == 0.0) continue;
                double* wrow = wgrad + j * layer.weights.cols;
                for (std::size_t c = 0; c < layer.weights.cols; ++c) wrow[c] += dv * irow[c];
                bgrad[j] += dv;
            }
        }

        if (l > 0) {
            Matrix next_delta;
            matmul(delta, layer.weights, next_delta);
            const Matrix& pre = cache.pre_activations[l - 1];
            if (net.layers[l - 1].activation == Activation::ReLU) {
                for (std::size_t idx = 0; idx < next_delta.data.size(); ++idx)
                    if (pre.data[idx] <= 0.0) next_delta.data[idx] = 0.0;
            }
            delta = std::move(next_delta);
        }
    }
    return flat;
}

double zero_one_error(const Matrix& logits, const std::vector<int>& labels) {
    const std::size_t m = logits.rows;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = logits.row(i);
        const double own = row[static_cast<std::size_t>(labels[i])];
        for (std::size_t j = 0; j < logits.cols; ++j) {
            if (j == static_cast<std::size_t>(labels[i])) continue;
            if (row[j] >= own) {
                ++wrong;
                break;
            }
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(m);
}

EvalResult evaluate(const DenseNet& net, const Batch& batch, LossKind kind) {
    const ForwardResult fwd = forward(net, batch);
    const std::vector<double> losses = per_sample_losses(fwd.logits, batch.labels, kind);
    double sum = 0.0;
    for (double l : losses) sum += l;
    return {sum / static_cast<double>(losses.size()), zero_one_error(fwd.logits, batch.labels)};
}

}  // namespace gdes
