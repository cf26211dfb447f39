#pragma once

// Rolling evaluation of the two-shot completion classifier. M_t is the
// endpoint prompted with an example pair from train(t); it is scored on
// test(t) and test(t+1) like any snapshot. Abstentions are counted and left
// out of the F1 computation.

#include <chrono>
#include <thread>
#include <vector>

#include "tshift/eval/rolling.hpp"
#include "tshift/models/llm.hpp"

namespace tshift::llm {

struct RollingOptions {
    std::size_t docs_per_month = 0;  // test documents scored per month; 0 = all
    std::size_t max_retries = 3;
    std::chrono::milliseconds retry_backoff{500};
    bool resample_per_document = false;
};

struct RollingResult {
    RollingReport report;
    std::size_t requests = 0;
    std::size_t abstentions = 0;
};

/// Calls `complete`, retrying RetriableError up to opts.max_retries times.
inline Classification classify_with_retry(const CompletionFn& complete, const InContextPair& examples,
                                          const Document& doc, const RollingOptions& opts) {
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            return llm_classify(complete, examples, doc);
        } catch (const RetriableError&) {
            if (attempt >= opts.max_retries) throw;
            std::this_thread::sleep_for(opts.retry_backoff * static_cast<int>(attempt + 1));
        }
    }
}

inline RollingResult rolling_evaluate(const TemporalCorpus& corpus, const CompletionFn& complete,
                                      std::uint64_t seed, const RollingOptions& opts = {}) {
    if (corpus.size() < 2) throw DataError("rolling evaluation needs at least 2 slices");
    RollingResult r;
    r.report.strategy = "two-shot";
    r.report.model = "remote-llm";
    for (std::size_t t = 0; t + 1 < corpus.size(); ++t) {
        const auto fixed = select_in_context(corpus[t], seed);
        auto score = [&](const std::vector<Document>& docs, std::vector<int>& pred, std::vector<int>& gold) {
            const std::size_t n = opts.docs_per_month ? std::min(opts.docs_per_month, docs.size()) : docs.size();
            for (std::size_t i = 0; i < n; ++i) {
                const auto examples = opts.resample_per_document ? select_in_context(corpus[t], seed, i + 1) : fixed;
                const auto c = classify_with_retry(complete, examples, docs[i], opts);
                ++r.requests;
                if (!c.label) {
                    ++r.abstentions;
                    continue;
                }
                pred.push_back(*c.label);
                gold.push_back(docs[i].label);
            }
        };
        std::vector<int> in_pred, in_gold, out_pred, out_gold;
        score(corpus[t].test, in_pred, in_gold);
        score(corpus[t + 1].test, out_pred, out_gold);
        if (in_gold.empty() || out_gold.empty())
            throw DataError("every completion for period " + std::to_string(t) + " was an abstention");
        r.report.records.push_back(
            MetricsRecord::compute(static_cast<int>(t), in_pred, in_gold, out_pred, out_gold));
    }
    r.report.aggregate();
    return r;
}

}  // namespace tshift::llm
