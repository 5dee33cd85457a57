#include "gdes/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gdes/errors.hpp"

namespace gdes {

namespace {

double mean_of(const std::vector<double>& values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

// Population std (denominator m).
double population_std(const std::vector<double>& values) {
    const double mean = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(values.size()));
}

// 1/scale for the detached re-scaling, or throws on a degenerate batch.
double rescale_factor(const std::vector<double>& losses, RescaleMode mode) {
    switch (mode) {
        case RescaleMode::None:
            return 1.0;
        case RescaleMode::StdRescale: {
            if (losses.size() < 2)
                throw ConfigError("std re-scaling needs at least two samples");
            const double stddev = population_std(losses);
            if (stddev == 0.0) throw DegenerateBatchError("zero loss std within batch");
            return 1.0 / stddev;
        }
        case RescaleMode::MinMaxNormalize: {
            if (losses.size() < 2)
                throw ConfigError("min-max normalization needs at least two samples");
            const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
            if (*hi == *lo) throw DegenerateBatchError("zero loss range within batch");
            return 1.0 / (*hi - *lo);
        }
    }
    throw ConfigError("unknown rescale mode");
}

}  // namespace

double rescaled_batch_loss(const std::vector<double>& per_sample_losses, RescaleMode mode) {
    if (per_sample_losses.empty()) throw ConfigError("empty batch");
    const double factor = rescale_factor(per_sample_losses, mode);
    if (mode == RescaleMode::MinMaxNormalize) {
        const double lo = *std::min_element(per_sample_losses.begin(), per_sample_losses.end());
        double acc = 0.0;
        for (double l : per_sample_losses) acc += (l - lo) * factor;
        return acc / static_cast<double>(per_sample_losses.size());
    }
    return mean_of(per_sample_losses) * factor;
}

MetricGradients metric_gradients(const DenseNet& net, const std::vector<Batch>& batches,
                                 RescaleMode mode, LossKind kind) {
    MetricGradients out;
    out.gradients.reserve(batches.size());
    for (const Batch& batch : batches) {
        const ForwardResult fwd = forward(net, batch);
        const std::vector<double> losses = per_sample_losses(fwd.logits, batch.labels, kind);
        double factor = 1.0;
        try {
            factor = rescale_factor(losses, mode);
        } catch (const DegenerateBatchError&) {
            out.degenerate = true;
        }
        GradVec grad = backward(net, fwd.cache, batch.labels, kind);
        if (factor != 1.0)
            for (double& g : grad) g *= factor;
        out.gradients.push_back(std::move(grad));
    }
    return out;
}

double gradient_disparity(const GradVec& g1, const GradVec& g2) {
    if (g1.size() != g2.size()) throw ConfigError("gradient length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < g1.size(); ++i) {
        const double diff = g1[i] - g2[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

double average_gd(const std::vector<GradVec>& gradients) {
    const std::size_t s = gradients.size();
    if (s < 2) throw ConfigError("average gradient disparity needs at least two gradients");
    double acc = 0.0;
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = i + 1; j < s; ++j) acc += gradient_disparity(gradients[i], gradients[j]);
    // Each unordered pair appears twice among ordered pairs; the factors cancel.
    return acc / (static_cast<double>(s) * static_cast<double>(s - 1) / 2.0);
}

double normalized_gd(double gd_mean, std::size_t param_count) {
    if (param_count == 0) throw ConfigError("parameter count must be positive");
    return gd_mean / std::sqrt(static_cast<double>(param_count));
}

double variance_of_gradients(const std::vector<GradVec>& gradients) {
    const std::size_t s = gradients.size();
    if (s < 2) throw ConfigError("gradient variance needs at least two gradients");
    const std::size_t d = gradients.front().size();
    std::vector<double> mean(d, 0.0);
    for (const GradVec& g : gradients) {
        if (g.size() != d) throw ConfigError("gradient length mismatch");
        for (std::size_t i = 0; i < d; ++i) mean[i] += g[i];
    }
    for (double& v : mean) v /= static_cast<double>(s);
    double acc = 0.0;
    for (const GradVec& g : gradients)
        for (std::size_t i = 0; i < d; ++i) {
            const double diff = g[i] - mean[i];
            acc += diff * diff;
        }
    return acc / static_cast<double>(s - 1);
}

PairSimilarity cosine_inner_sign(const GradVec& g1, const GradVec& g2) {
    if (g1.size() != g2.size()) throw ConfigError("gradient length mismatch");
    double inner = 0.0, n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < g1.size(); ++i) {
        inner += g1[i] * g2[i];
        n1 += g1[i] * g1[i];
        n2 += g2[i] * g2[i];
    }
    if (n1 == 0.0 || n2 == 0.0)
        throw NumericError("cosine similarity undefined for zero-norm gradient");
    PairSimilarity out;
    out.inner = inner;
    out.cosine = inner / (std::sqrt(n1) * std::sqrt(n2));
    out.sign = (inner > 0.0) ? 1.0 : (inner < 0.0 ? -1.0 : 0.0);
    return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ConfigError("series length mismatch");
    if (x.size() < 2) throw ConfigError("correlation needs at least two points");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw NumericError("zero variance in correlation input");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace gdes
