#pragma once

// The three temporal retraining strategies producing M_0 .. M_{N-1}:
//   ODNM  fresh model on train(0..t)
//   NDNM  fresh model on train(t)
//   NDOM  M_{t-1}'s parameters continued on train(t); vocabulary frozen at
//         slice 0. At t = 0 it is identical to NDNM.

#include <memory>
#include <vector>

#include "tshift/core/error.hpp"
#include "tshift/core/parallel.hpp"
#include "tshift/corpus.hpp"
#include "tshift/models/trainer.hpp"

namespace tshift {

/// Training documents a strategy consumes at period t.
inline std::vector<Document> strategy_training_docs(const TemporalCorpus& corpus, StrategyKind strategy,
                                                    std::size_t t) {
    if (t >= corpus.size()) throw DataError("period out of range");
    if (strategy != StrategyKind::odnm) return corpus[t].train;
    std::vector<Document> docs;
    for (std::size_t i = 0; i <= t; ++i)
        docs.insert(docs.end(), corpus[i].train.begin(), corpus[i].train.end());
    return docs;
}

/// Trains the snapshot for a single period. NDOM needs `previous` for t > 0.
inline ModelSnapshot train_period(const TemporalCorpus& corpus, StrategyKind strategy, ModelKind kind,
                                  const TrainConfig& config, std::size_t t,
                                  const ModelSnapshot* previous = nullptr) {
    const auto docs = strategy_training_docs(corpus, strategy, t);
    const int period = static_cast<int>(t);
    if (strategy == StrategyKind::ndom && t > 0) {
        if (!previous) throw DataError("NDOM at t > 0 needs the previous snapshot");
        return train_model(kind, docs, previous->vocab_ptr(), config, period, previous, t);
    }
    require_both_labels(docs);
    auto vocab = std::make_shared<const Vocabulary>(build_vocab(docs, config.min_frequency));
    return train_model(kind, docs, std::move(vocab), config, period, nullptr, t);
}

/// One snapshot per period. ODNM and NDNM periods train concurrently on up to
/// `workers` threads; the NDOM chain is sequential.
inline std::vector<ModelSnapshot> run_strategy(const TemporalCorpus& corpus, StrategyKind strategy,
                                               ModelKind kind, const TrainConfig& config,
                                               std::size_t workers = 1) {
    config.validate();
    if (corpus.size() < 2) throw DataError("run_strategy needs at least 2 slices");
    if (kind == ModelKind::remote_llm)
        throw DataError(strategy == StrategyKind::ndom
                            ? "NDOM is not applicable to remote-llm models (no parameter transfer)"
                            : "remote-llm models are not trainable");
    std::vector<ModelSnapshot> out(corpus.size());
    if (strategy == StrategyKind::ndom) {
        for (std::size_t t = 0; t < corpus.size(); ++t)
            out[t] = train_period(corpus, strategy, kind, config, t, t ? &out[t - 1] : nullptr);
        return out;
    }
    // ODNM cost grows with t; schedule the largest periods first.
    parallel_for(corpus.size(), workers, [&](std::size_t i) {
        const std::size_t t = strategy == StrategyKind::odnm ? corpus.size() - 1 - i : i;
        out[t] = train_period(corpus, strategy, kind, config, t);
    });
    return out;
}

}  // namespace tshift
