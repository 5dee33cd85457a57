#include "gdes/optim.hpp"

#include <cmath>
#include <string>

#include "gdes/errors.hpp"

namespace gdes {

namespace {

void check_lengths(std::size_t params, std::size_t grad) {
    if (params != grad)
        throw ConfigError("gradient length " + std::to_string(grad) +
                          " does not match parameter count " + std::to_string(params));
}

void check_finite(const GradVec& grad) {
    for (double g : grad)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient entry");
}

void ensure_sized(std::vector<double>& accum, std::size_t d) {
    if (accum.empty()) accum.assign(d, 0.0);
    if (accum.size() != d) throw ConfigError("optimizer accumulator length mismatch");
}

double sq_norm_diff(const GradVec& g1, const GradVec& g2) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g1.size(); ++i) {
        const double diff = g1[i] - g2[i];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace

void step(OptimizerState& state, std::vector<double>& params, const GradVec& grad) {
    check_lengths(params.size(), grad.size());
    check_finite(grad);
    const std::size_t d = params.size();

    std::visit(
        [&](auto& opt) {
            using T = std::decay_t<decltype(opt)>;
            if constexpr (std::is_same_v<T, Sgd>) {
                for (std::size_t i = 0; i < d; ++i) params[i] -= opt.learning_rate * grad[i];
            } else if constexpr (std::is_same_v<T, Momentum>) {
                ensure_sized(opt.velocity, d);
                for (std::size_t i = 0; i < d; ++i) {
                    opt.velocity[i] = opt.decay * opt.velocity[i] + opt.learning_rate * grad[i];
                    params[i] -= opt.velocity[i];
                }
            } else if constexpr (std::is_same_v<T, Adagrad>) {
                ensure_sized(opt.accum_sq_grad, d);
                for (std::size_t i = 0; i < d; ++i) {
                    opt.accum_sq_grad[i] += grad[i] * grad[i];
                    params[i] -=
                        opt.learning_rate * grad[i] / std::sqrt(opt.accum_sq_grad[i] + opt.epsilon);
                }
            } else if constexpr (std::is_same_v<T, Adadelta>) {
                ensure_sized(opt.avg_sq_grad, d);
                for (std::size_t i = 0; i < d; ++i) {
                    opt.avg_sq_grad[i] =
                        opt.decay * opt.avg_sq_grad[i] + (1.0 - opt.decay) * grad[i] * grad[i];
                    params[i] -=
                        opt.learning_rate * grad[i] / std::sqrt(opt.avg_sq_grad[i] + opt.epsilon);
                }
            } else if constexpr (std::is_same_v<T, Adam>) {
                ensure_sized(opt.first_moment, d);
                ensure_sized(opt.second_moment, d);
                opt.step_count += 1;
                const double bc1 =
                    1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
                const double bc2 =
                    1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
                for (std::size_t i = 0; i < d; ++i) {
                    opt.first_moment[i] =
                        opt.beta1 * opt.first_moment[i] + (1.0 - opt.beta1) * grad[i];
                    opt.second_moment[i] =
                        opt.beta2 * opt.second_moment[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
                    const double m_hat = opt.first_moment[i] / bc1;
                    const double v_hat = opt.second_moment[i] / bc2;
                    params[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
                }
            }
        },
        state);
}

double kl_bound_factor(const OptimizerState& state, const GradVec& g1, const GradVec& g2,
                       double sigma) {
    check_lengths(g1.size(), g2.size());
    if (sigma <= 0.0) throw ConfigError("perturbation std must be positive");
    const std::size_t d = g1.size();

    return std::visit(
        [&](const auto& opt) -> double {
            using T = std::decay_t<decltype(opt)>;
            const double lr_over_sigma = opt.learning_rate / sigma;
            const double front = 0.5 * lr_over_sigma * lr_over_sigma;
            if constexpr (std::is_same_v<T, Sgd> || std::is_same_v<T, Momentum>) {
                return front * sq_norm_diff(g1, g2);
            } else if constexpr (std::is_same_v<T, Adagrad>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double accum = opt.accum_sq_grad.empty() ? 0.0 : opt.accum_sq_grad[i];
                    const double term = (g1[i] - g2[i]) / (accum + opt.epsilon);
                    acc += term * term;
                }
                return front * acc;
            } else if constexpr (std::is_same_v<T, Adadelta>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double avg = opt.avg_sq_grad.empty() ? 0.0 : opt.avg_sq_grad[i];
                    const double term = (g1[i] - g2[i]) / (avg + opt.epsilon);
                    acc += term * term;
                }
                return front * acc;
            } else {
                static_assert(std::is_same_v<T, Adam>);
                if (opt.step_count < 1)
                    throw ConfigError("Adam KL bound needs at least one step (bias correction)");
                const double t = static_cast<double>(opt.step_count);
                const double bc1 = 1.0 - std::pow(opt.beta1, t);
                const double bc2 = 1.0 - std::pow(opt.beta2, t);
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double v = opt.second_moment.empty() ? 0.0 : opt.second_moment[i];
                    const double v_hat = v / bc2;
                    const double term = (g1[i] - g2[i]) / (std::sqrt(v_hat) + opt.epsilon);
                    acc += term * term;
                }
                return front * (1.0 - opt.beta1) / bc1 * acc;
            }
        },
        state);
}

}  // namespace gdes
