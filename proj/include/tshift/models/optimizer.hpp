#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace tshift {

/// Plain SGD or Adam(W) over a flat parameter vector.
class Optimizer {
public:
    struct Options {
        double learning_rate = 0.1;
        bool adam = false;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        double decoupled_weight_decay = 0.0;  // AdamW; applied to every parameter
    };

    Optimizer(std::size_t n, Options opts) : opts_(opts) {
        if (opts_.adam) {
            m_.assign(n, 0.0);
            v_.assign(n, 0.0);
        }
    }

    void step(std::span<double> theta, std::span<const double> grad) {
        const double lr = opts_.learning_rate;
        if (!opts_.adam) {
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
            return;
        }
        ++t_;
        const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m_[i] = opts_.beta1 * m_[i] + (1 - opts_.beta1) * grad[i];
            v_[i] = opts_.beta2 * v_[i] + (1 - opts_.beta2) * grad[i] * grad[i];
            const double mhat = m_[i] / c1;
            const double vhat = v_[i] / c2;
            theta[i] -= lr * (mhat / (std::sqrt(vhat) + opts_.epsilon) +
                              opts_.decoupled_weight_decay * theta[i]);
        }
    }

private:
    Options opts_;
    std::vector<double> m_, v_;
    long long t_ = 0;
};

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Binary cross-entropy of label y in {0,1} given a logit.
inline double logistic_loss(double logit, int y) { return softplus(logit) - (y == 1 ? logit : 0.0); }

}  // namespace tshift
