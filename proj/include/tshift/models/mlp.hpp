#pragma once

// Embedding-bag MLP: the count-weighted mean of token embeddings feeds one
// tanh hidden layer (the pooled representation) and a logistic output unit.
//
// Flat parameter layout: [E (V x D) | W1 (H x D) | b1 (H) | w2 (H) | b2].

#include <cmath>
#include <span>
#include <vector>

#include "tshift/core/random.hpp"
#include "tshift/features.hpp"
#include "tshift/models/optimizer.hpp"

namespace tshift::mlp {

struct Shape {
    std::size_t vocab = 0;
    std::size_t embedding = 32;
    std::size_t hidden = 64;

    std::size_t emb_offset() const { return 0; }
    std::size_t w1_offset() const { return vocab * embedding; }
    std::size_t b1_offset() const { return w1_offset() + hidden * embedding; }
    std::size_t w2_offset() const { return b1_offset() + hidden; }
    std::size_t b2_offset() const { return w2_offset() + hidden; }
    std::size_t param_count() const { return b2_offset() + 1; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

struct Activations {
    std::vector<double> pooled;  // D
    std::vector<double> hidden;  // H, the representation
    double logit = 0;
    double total_count = 0;
};

inline void init(std::span<double> theta, const Shape& s, Rng& rng) {
    for (std::size_t i = 0; i < s.vocab * s.embedding; ++i) theta[s.emb_offset() + i] = rng.normal(0, 0.1);
    const double a1 = std::sqrt(6.0 / static_cast<double>(s.embedding + s.hidden));
    for (std::size_t i = 0; i < s.hidden * s.embedding; ++i)
        theta[s.w1_offset() + i] = (2 * rng.uniform() - 1) * a1;
    const double a2 = std::sqrt(6.0 / static_cast<double>(s.hidden + 1));
    for (std::size_t i = 0; i < s.hidden; ++i) {
        theta[s.b1_offset() + i] = 0;
        theta[s.w2_offset() + i] = (2 * rng.uniform() - 1) * a2;
    }
    theta[s.b2_offset()] = 0;
}

inline void forward(std::span<const double> theta, const Shape& s, const FeatureVector& x,
                    Activations& a) {
    a.pooled.assign(s.embedding, 0.0);
    a.hidden.resize(s.hidden);
    a.total_count = x.total();
    if (a.total_count > 0) {
        const double inv = 1.0 / a.total_count;
        for (const auto& e : x.entries) {
            const double* row = theta.data() + s.emb_offset() + std::size_t{e.index} * s.embedding;
            const double w = e.count * inv;
            for (std::size_t d = 0; d < s.embedding; ++d) a.pooled[d] += w * row[d];
        }
    }
    const double* w1 = theta.data() + s.w1_offset();
    const double* b1 = theta.data() + s.b1_offset();
    const double* w2 = theta.data() + s.w2_offset();
    double z_out = theta[s.b2_offset()];
    for (std::size_t h = 0; h < s.hidden; ++h) {
        double z = b1[h];
        const double* row = w1 + h * s.embedding;
        for (std::size_t d = 0; d < s.embedding; ++d) z += row[d] * a.pooled[d];
        a.hidden[h] = std::tanh(z);
        z_out += w2[h] * a.hidden[h];
    }
    a.logit = z_out;
}

/// d logit / d pooled, given activations from forward().
inline std::vector<double> pooled_gradient(std::span<const double> theta, const Shape& s,
                                           const Activations& a) {
    std::vector<double> g(s.embedding, 0.0);
    const double* w1 = theta.data() + s.w1_offset();
    const double* w2 = theta.data() + s.w2_offset();
    for (std::size_t h = 0; h < s.hidden; ++h) {
        const double dz = w2[h] * (1 - a.hidden[h] * a.hidden[h]);
        const double* row = w1 + h * s.embedding;
        for (std::size_t d = 0; d < s.embedding; ++d) g[d] += dz * row[d];
    }
    return g;
}

/// Mean cross-entropy plus 0.5 * l2 * (|E|^2 + |W1|^2 + |w2|^2). Overwrites `grad`.
inline double loss_and_gradient(std::span<const double> theta, const Shape& s,
                                std::span<const FeatureVector> xs, std::span<const int> ys, double l2,
                                std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    const double* w1 = theta.data() + s.w1_offset();
    const double* w2 = theta.data() + s.w2_offset();
    Activations a;
    std::vector<double> dz(s.hidden), dpooled(s.embedding);
    double loss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        forward(theta, s, xs[i], a);
        loss += logistic_loss(a.logit, ys[i]);
        const double dl = (sigmoid(a.logit) - ys[i]) * inv_n;
        grad[s.b2_offset()] += dl;
        std::fill(dpooled.begin(), dpooled.end(), 0.0);
        for (std::size_t h = 0; h < s.hidden; ++h) {
            grad[s.w2_offset() + h] += dl * a.hidden[h];
            dz[h] = dl * w2[h] * (1 - a.hidden[h] * a.hidden[h]);
            grad[s.b1_offset() + h] += dz[h];
            double* gw1 = grad.data() + s.w1_offset() + h * s.embedding;
            const double* row = w1 + h * s.embedding;
            for (std::size_t d = 0; d < s.embedding; ++d) {
                gw1[d] += dz[h] * a.pooled[d];
                dpooled[d] += dz[h] * row[d];
            }
        }
        if (a.total_count > 0) {
            const double inv = 1.0 / a.total_count;
            for (const auto& e : xs[i].entries) {
                double* ge = grad.data() + s.emb_offset() + std::size_t{e.index} * s.embedding;
                const double w = e.count * inv;
                for (std::size_t d = 0; d < s.embedding; ++d) ge[d] += w * dpooled[d];
            }
        }
    }
    loss *= inv_n;
    if (l2 > 0) {
        double sq = 0;
        auto penalize = [&](std::size_t from, std::size_t to) {
            for (std::size_t j = from; j < to; ++j) {
                sq += theta[j] * theta[j];
                grad[j] += l2 * theta[j];
            }
        };
        penalize(s.emb_offset(), s.b1_offset());
        penalize(s.w2_offset(), s.b2_offset());
        loss += 0.5 * l2 * sq;
    }
    return loss;
}

}  // namespace tshift::mlp
