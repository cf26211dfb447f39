#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tshift/core/error.hpp"
#include "tshift/corpus.hpp"
#include "tshift/models/snapshot.hpp"

namespace tshift {

enum class Partition { train, validation, test };

inline const std::vector<Document>& partition_of(const MonthlySlice& s, Partition p) {
    switch (p) {
        case Partition::train: return s.train;
        case Partition::validation: return s.validation;
        case Partition::test: return s.test;
    }
    return s.test;
}

inline constexpr int kInDistribution = 0;
inline constexpr int kOutOfDistribution = 1;

/// OOD labeling of x_j for an older model M_i: defined only when the
/// in-sample model M_j is correct; then 0 if M_i is also correct, 1 otherwise.
constexpr std::optional<int> ood_label(int past_prediction, int in_sample_prediction, int gold) {
    if (in_sample_prediction != gold) return std::nullopt;
    return past_prediction == gold ? kInDistribution : kOutOfDistribution;
}

struct OodExample {
    std::vector<double> representation;  // M_i's pooled representation of x_j
    int ood_label = kInDistribution;
    int source_period = 0;  // i
    int target_period = 0;  // j
};

struct OodDatasetOptions {
    std::size_t window_months = 3;
    std::size_t first_period = 0;
    std::size_t end_period = 0;  // exclusive bound on j; 0 = all periods
    Partition partition = Partition::validation;
};

/// Examples for every pair i < j <= i + window with both periods in
/// [first_period, end_period), drawn from slice j's chosen partition.
inline std::vector<OodExample> build_ood_dataset(std::span<const ModelSnapshot> snapshots,
                                                 const TemporalCorpus& corpus,
                                                 const OodDatasetOptions& opts = {}) {
    if (opts.window_months < 1) throw ValidationError("window_months", "must be >= 1");
    const std::size_t end = opts.end_period ? opts.end_period : corpus.size();
    if (end > corpus.size() || end > snapshots.size()) throw DataError("snapshots and corpus are not aligned");
    for (std::size_t t = opts.first_period; t < end; ++t)
        if (snapshots[t].period() != static_cast<int>(t)) throw DataError("snapshots and corpus are not aligned");

    std::vector<OodExample> out;
    for (std::size_t j = opts.first_period + 1; j < end; ++j) {
        const auto& docs = partition_of(corpus[j], opts.partition);
        const ModelSnapshot& in_sample = snapshots[j];
        std::vector<int> in_pred(docs.size());
        for (std::size_t d = 0; d < docs.size(); ++d) in_pred[d] = in_sample.predict(docs[d]);
        const std::size_t i_first = j > opts.window_months ? j - opts.window_months : 0;
        for (std::size_t i = std::max(i_first, opts.first_period); i < j; ++i) {
            const ModelSnapshot& past = snapshots[i];
            for (std::size_t d = 0; d < docs.size(); ++d) {
                const auto x = past.features(docs[d]);
                const auto label = ood_label(past.predict(x), in_pred[d], docs[d].label);
                if (!label) continue;
                out.push_back({past.representation(x), *label, static_cast<int>(i), static_cast<int>(j)});
            }
        }
    }
    if (out.empty()) throw DataError("OOD dataset is empty");
    return out;
}

}  // namespace tshift
