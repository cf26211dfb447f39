#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tshift/core/hash.hpp"
#include "tshift/core/random.hpp"
#include "tshift/features.hpp"
#include "tshift/models/logreg.hpp"
#include "tshift/models/mlp.hpp"
#include "tshift/models/train_config.hpp"

namespace tshift {

/// A trained sentiment classifier M_t tagged with its last training period.
/// Immutable once built.
class ModelSnapshot {
public:
    ModelSnapshot() = default;

    static ModelSnapshot make_logreg(int period, std::shared_ptr<const Vocabulary> vocab,
                                     std::vector<double> theta, std::size_t projection_dim,
                                     std::uint64_t projection_seed) {
        if (theta.size() != logreg::param_count(vocab->size()))
            throw DataError("logreg parameter count does not match the vocabulary");
        ModelSnapshot m;
        m.period_ = period;
        m.kind_ = ModelKind::logreg;
        m.vocab_ = std::move(vocab);
        m.theta_ = std::move(theta);
        m.projection_dim_ = projection_dim;
        m.projection_seed_ = projection_seed;
        m.build_projection();
        return m;
    }

    static ModelSnapshot make_mlp(int period, std::shared_ptr<const Vocabulary> vocab, mlp::Shape shape,
                                  std::vector<double> theta) {
        if (shape.vocab != vocab->size() || theta.size() != shape.param_count())
            throw DataError("mlp parameter count does not match its shape");
        ModelSnapshot m;
        m.period_ = period;
        m.kind_ = ModelKind::mlp;
        m.vocab_ = std::move(vocab);
        m.shape_ = shape;
        m.theta_ = std::move(theta);
        return m;
    }

    int period() const { return period_; }
    ModelKind kind() const { return kind_; }
    const Vocabulary& vocab() const { return *vocab_; }
    const std::shared_ptr<const Vocabulary>& vocab_ptr() const { return vocab_; }
    std::span<const double> parameters() const { return theta_; }
    const mlp::Shape& shape() const { return shape_; }
    std::size_t projection_dim() const { return projection_dim_; }
    std::uint64_t projection_seed() const { return projection_seed_; }

    /// Width of representation().
    std::size_t rep_dim() const { return kind_ == ModelKind::mlp ? shape_.hidden : projection_dim_; }

    const std::vector<double>& loss_history() const { return loss_history_; }
    void set_loss_history(std::vector<double> h) { loss_history_ = std::move(h); }

    FeatureVector features(const Document& doc) const { return featurize(doc, *vocab_); }

    double logit(const FeatureVector& x) const {
        if (kind_ == ModelKind::logreg) return logreg::logit(theta_, x);
        mlp::Activations a;
        mlp::forward(theta_, shape_, x, a);
        return a.logit;
    }

    /// P(y = 1 | x).
    double predict_proba(const FeatureVector& x) const { return sigmoid(logit(x)); }
    double predict_proba(const Document& doc) const { return predict_proba(features(doc)); }

    /// Ties resolve to the positive label.
    int predict(const FeatureVector& x) const { return predict_proba(x) >= 0.5 ? 1 : 0; }
    int predict(const Document& doc) const { return predict(features(doc)); }

    /// The pooled representation: hidden activations for the MLP; for logistic
    /// regression the weighted features w_v * x_v pushed through a fixed
    /// per-token random projection, so equal tokens land in the same
    /// coordinates across snapshots.
    std::vector<double> representation(const FeatureVector& x) const {
        if (kind_ == ModelKind::mlp) {
            mlp::Activations a;
            mlp::forward(theta_, shape_, x, a);
            return std::move(a.hidden);
        }
        std::vector<double> r(projection_dim_, 0.0);
        for (const auto& e : x.entries) {
            const double wx = theta_[e.index] * e.count;
            const double* col = projection_.data() + std::size_t{e.index} * projection_dim_;
            for (std::size_t k = 0; k < projection_dim_; ++k) r[k] += wx * col[k];
        }
        return r;
    }
    std::vector<double> representation(const Document& doc) const { return representation(features(doc)); }

    /// Per-token attribution |d logit / d omega_v| * count_v, where omega_v is
    /// the token's weight in the model input (bag weight for the MLP, feature
    /// value for logistic regression). Aligned with x.entries.
    std::vector<double> token_attributions(const FeatureVector& x) const {
        std::vector<double> out;
        out.reserve(x.entries.size());
        if (kind_ == ModelKind::logreg) {
            for (const auto& e : x.entries) out.push_back(std::abs(theta_[e.index]) * e.count);
            return out;
        }
        mlp::Activations a;
        mlp::forward(theta_, shape_, x, a);
        const auto g = mlp::pooled_gradient(theta_, shape_, a);
        for (const auto& e : x.entries) {
            const double* row = theta_.data() + std::size_t{e.index} * shape_.embedding;
            double dot = 0;
            for (std::size_t d = 0; d < shape_.embedding; ++d) dot += g[d] * row[d];
            out.push_back(std::abs(dot) * e.count);
        }
        return out;
    }

    /// Byte-level fingerprint of the parameters and vocabulary.
    std::uint64_t fingerprint() const {
        std::uint64_t h = fnv1a64(std::string_view(reinterpret_cast<const char*>(theta_.data()),
                                                   theta_.size() * sizeof(double)));
        for (const auto& t : vocab_->tokens()) h = fnv1a64(t, h ^ 0xff);
        return h;
    }

private:
    void build_projection() {
        projection_.assign(vocab_->size() * projection_dim_, 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(projection_dim_));
        for (std::size_t v = 0; v < vocab_->size(); ++v) {
            Rng rng(derive_seed(projection_seed_, fnv1a64(vocab_->token(v))));
            for (std::size_t k = 0; k < projection_dim_; ++k)
                projection_[v * projection_dim_ + k] = rng.normal() * scale;
        }
    }

    int period_ = 0;
    ModelKind kind_ = ModelKind::logreg;
    std::shared_ptr<const Vocabulary> vocab_ = std::make_shared<Vocabulary>();
    std::vector<double> theta_;
    mlp::Shape shape_;
    std::size_t projection_dim_ = 0;
    std::uint64_t projection_seed_ = 0;
    std::vector<double> projection_;
    std::vector<double> loss_history_;
};

}  // namespace tshift
