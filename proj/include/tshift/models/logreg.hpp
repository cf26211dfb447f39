#pragma once

// Bag-of-words logistic regression over a flat parameter vector
// [w_0 .. w_{V-1}, bias].

#include <span>

#include "tshift/features.hpp"
#include "tshift/models/optimizer.hpp"

namespace tshift::logreg {

inline std::size_t param_count(std::size_t vocab_size) { return vocab_size + 1; }

inline double logit(std::span<const double> theta, const FeatureVector& x) {
    double z = theta.back();
    for (const auto& e : x.entries) z += theta[e.index] * e.count;
    return z;
}

/// Mean cross-entropy over the batch plus 0.5 * l2 * |w|^2 (bias unpenalized).
/// Overwrites `grad` with the gradient.
inline double loss_and_gradient(std::span<const double> theta, std::span<const FeatureVector> xs,
                                std::span<const int> ys, double l2, std::span<double> grad) {
    const std::size_t v = theta.size() - 1;
    std::fill(grad.begin(), grad.end(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    double loss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double z = logit(theta, xs[i]);
        loss += logistic_loss(z, ys[i]);
        const double dz = (sigmoid(z) - ys[i]) * inv_n;
        for (const auto& e : xs[i].entries) grad[e.index] += dz * e.count;
        grad[v] += dz;
    }
    loss *= inv_n;
    if (l2 > 0) {
        double sq = 0;
        for (std::size_t j = 0; j < v; ++j) {
            sq += theta[j] * theta[j];
            grad[j] += l2 * theta[j];
        }
        loss += 0.5 * l2 * sq;
    }
    return loss;
}

}  // namespace tshift::logreg
