#pragma once

#include <vector>

#include "gdes/net.hpp"

namespace gdes {

enum class RescaleMode {
    None,            // plain mean of the per-sample losses
    StdRescale,      // each loss divided by the within-batch std (default)
    MinMaxNormalize, // each loss mapped to [0, 1] by the within-batch range
};

enum class MetricSource { TrainTrain, TrainVal };

struct MetricConfig {
    int batch_count = 5;                          // s
    RescaleMode rescale = RescaleMode::StdRescale;
    MetricSource source = MetricSource::TrainTrain;
};

// One epoch's worth of recorded signals.
struct MetricRecord {
    int epoch = 0;                 // 1-based
    double gd_mean = 0.0;          // average gradient disparity over batch pairs
    double gd_normalized = 0.0;    // gd_mean / sqrt(param count)
    double grad_variance = 0.0;
    double cosine_mean = 0.0;
    double inner_mean = 0.0;
    double sign_mean = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double train_err = 0.0;
    double test_err = 0.0;
    bool degenerate_rescale = false;   // some batch fell back to the unscaled loss
};

// Mean of the re-scaled per-sample losses. The scale (std or range) is a
// batch statistic treated as a constant; differentiating this loss therefore
// just multiplies the plain gradient by 1/scale. Throws DegenerateBatchError
// when the scale is zero.
double rescaled_batch_loss(const std::vector<double>& per_sample_losses, RescaleMode mode);

struct MetricGradients {
    std::vector<GradVec> gradients;
    bool degenerate = false;
};

// One gradient per probe batch: the gradient of the re-scaled batch loss
// with the scale factor detached. Degenerate batches (zero std or range)
// fall back to the unscaled gradient and set the flag instead of failing
// the run.
MetricGradients metric_gradients(const DenseNet& net, const std::vector<Batch>& batches,
                                 RescaleMode mode, LossKind kind);

// l2 distance between two gradient vectors.
double gradient_disparity(const GradVec& g1, const GradVec& g2);

// Mean disparity over all ordered pairs i != j among s >= 2 gradients.
double average_gd(const std::vector<GradVec>& gradients);

// Scale-free variant for comparing architectures of different size.
double normalized_gd(double gd_mean, std::size_t param_count);

// Trace of the unbiased sample covariance: (1/(s-1)) sum ||g_i - mean||^2.
double variance_of_gradients(const std::vector<GradVec>& gradients);

struct PairSimilarity {
    double cosine = 0.0;
    double inner = 0.0;
    double sign = 0.0;   // -1, 0, +1
};

// Cosine requires both norms positive.
PairSimilarity cosine_inner_sign(const GradVec& g1, const GradVec& g2);

// Sample Pearson correlation; requires length >= 2 and nonzero variances.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace gdes
