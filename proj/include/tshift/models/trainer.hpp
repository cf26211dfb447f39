#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "tshift/core/error.hpp"
#include "tshift/core/random.hpp"
#include "tshift/features.hpp"
#include "tshift/models/optimizer.hpp"
#include "tshift/models/snapshot.hpp"
#include "tshift/models/train_config.hpp"

namespace tshift {

/// Featurized labeled examples.
struct Dataset {
    std::vector<FeatureVector> x;
    std::vector<int> y;

    static Dataset from(std::span<const Document> docs, const Vocabulary& vocab) {
        Dataset d;
        d.x.reserve(docs.size());
        d.y.reserve(docs.size());
        for (const auto& doc : docs) {
            d.x.push_back(featurize(doc, vocab));
            d.y.push_back(doc.label);
        }
        return d;
    }
};

inline void require_both_labels(std::span<const Document> docs) {
    bool pos = false, neg = false;
    for (const auto& d : docs) (d.label == kPositive ? pos : neg) = true;
    if (!pos || !neg) throw DataError("training data must contain both labels");
}

namespace detail {

inline double mean_loss(ModelKind kind, std::span<const double> theta, const mlp::Shape& shape,
                        const Dataset& data, double l2) {
    double loss = 0;
    mlp::Activations a;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        double z;
        if (kind == ModelKind::logreg) {
            z = logreg::logit(theta, data.x[i]);
        } else {
            mlp::forward(theta, shape, data.x[i], a);
            z = a.logit;
        }
        loss += logistic_loss(z, data.y[i]);
    }
    loss /= static_cast<double>(data.x.size());
    if (l2 > 0) {
        double sq = 0;
        auto add = [&](std::size_t from, std::size_t to) {
            for (std::size_t j = from; j < to; ++j) sq += theta[j] * theta[j];
        };
        if (kind == ModelKind::logreg) {
            add(0, theta.size() - 1);
        } else {
            add(shape.emb_offset(), shape.b1_offset());
            add(shape.w2_offset(), shape.b2_offset());
        }
        loss += 0.5 * l2 * sq;
    }
    return loss;
}

}  // namespace detail

/// Mini-batch training of `kind` on `docs` over a fixed vocabulary.
/// `init` continues from an existing snapshot's parameters (same vocabulary
/// required); otherwise parameters are freshly initialized from config.seed.
/// `stream` separates the random streams of different periods.
inline ModelSnapshot train_model(ModelKind kind, std::span<const Document> docs,
                                 std::shared_ptr<const Vocabulary> vocab, const TrainConfig& config,
                                 int period, const ModelSnapshot* init = nullptr,
                                 std::uint64_t stream = 0) {
    config.validate();
    if (kind == ModelKind::remote_llm) throw DataError("remote-llm models are not trainable");
    require_both_labels(docs);
    if (init && (init->kind() != kind || !(init->vocab() == *vocab)))
        throw DataError("warm start requires the same model kind and vocabulary");

    mlp::Shape shape{vocab->size(), config.embedding_dim, config.hidden_dim};
    const std::size_t n_params =
        kind == ModelKind::logreg ? logreg::param_count(vocab->size()) : shape.param_count();
    std::vector<double> theta;
    if (init) {
        if (kind == ModelKind::mlp) shape = init->shape();
        theta.assign(init->parameters().begin(), init->parameters().end());
    } else {
        theta.assign(n_params, 0.0);
        if (kind == ModelKind::mlp) {
            Rng rng(derive_seed(config.seed, stream * 2 + 1));
            mlp::init(theta, shape, rng);
        }
    }

    Dataset data = Dataset::from(docs, *vocab);
    Optimizer opt(theta.size(), {.learning_rate = config.learning_rate,
                                 .adam = config.optimizer == OptimizerKind::adam});
    Rng order(derive_seed(config.seed, stream * 2));
    std::vector<double> grad(theta.size());
    std::vector<double> history;
    history.reserve(config.epochs);
    const std::size_t n = data.x.size();
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {
            const auto j = order.below(i);
            std::swap(data.x[i - 1], data.x[j]);
            std::swap(data.y[i - 1], data.y[j]);
        }
        for (std::size_t b = 0; b < n; b += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, n - b);
            std::span<const FeatureVector> xs(data.x.data() + b, len);
            std::span<const int> ys(data.y.data() + b, len);
            if (kind == ModelKind::logreg)
                logreg::loss_and_gradient(theta, xs, ys, config.l2_penalty, grad);
            else
                mlp::loss_and_gradient(theta, shape, xs, ys, config.l2_penalty, grad);
            opt.step(theta, grad);
        }
        history.push_back(detail::mean_loss(kind, theta, shape, data, config.l2_penalty));
    }

    ModelSnapshot m =
        kind == ModelKind::logreg
            ? ModelSnapshot::make_logreg(period, std::move(vocab), std::move(theta),
                                         config.projection_dim, derive_seed(config.seed, 0x70726f6aULL))
            : ModelSnapshot::make_mlp(period, std::move(vocab), shape, std::move(theta));
    m.set_loss_history(std::move(history));
    return m;
}

inline ModelSnapshot train_logreg(std::span<const Document> docs, const TrainConfig& config,
                                  int period = 0) {
    require_both_labels(docs);
    auto vocab = std::make_shared<const Vocabulary>(build_vocab(docs, config.min_frequency));
    return train_model(ModelKind::logreg, docs, std::move(vocab), config, period);
}

inline ModelSnapshot train_mlp(std::span<const Document> docs, const TrainConfig& config,
                               int period = 0) {
    require_both_labels(docs);
    auto vocab = std::make_shared<const Vocabulary>(build_vocab(docs, config.min_frequency));
    return train_model(ModelKind::mlp, docs, std::move(vocab), config, period);
}

}  // namespace tshift
