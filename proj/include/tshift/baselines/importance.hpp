#pragma once

// Per-month token importance shared by the STM and CDA baselines. A token's
// importance in one document is the prediction confidence max(p, 1 - p)
// times its attribution under the month's snapshot.

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tshift/core/parallel.hpp"
#include "tshift/corpus.hpp"
#include "tshift/models/snapshot.hpp"

namespace tshift {

struct TokenMonthStats {
    double importance_sum = 0;   // summed over documents containing the token
    std::size_t documents = 0;
    std::size_t occurrences = 0;

    double mean() const { return documents ? importance_sum / static_cast<double>(documents) : 0.0; }
};

/// token -> stats for one month.
using MonthImportance = std::map<std::string, TokenMonthStats>;

inline void accumulate_importance(const ModelSnapshot& snapshot, const Document& doc, MonthImportance& out) {
    const auto x = snapshot.features(doc);
    if (x.empty()) return;
    const double p = snapshot.predict_proba(x);
    const double confidence = std::max(p, 1.0 - p);
    const auto attr = snapshot.token_attributions(x);
    for (std::size_t i = 0; i < x.entries.size(); ++i) {
        auto& s = out[snapshot.vocab().token(x.entries[i].index)];
        s.importance_sum += confidence * attr[i];
        s.documents += 1;
        s.occurrences += static_cast<std::size_t>(x.entries[i].count);
    }
}

/// One map per slice of `corpus`, each computed with snapshots[t] over every
/// document of month t.
inline std::vector<MonthImportance> monthly_importance(const TemporalCorpus& corpus,
                                                       std::span<const ModelSnapshot> snapshots,
                                                       std::size_t workers = 1) {
    if (snapshots.size() < corpus.size()) throw DataError("importance needs one snapshot per month");
    std::vector<MonthImportance> out(corpus.size());
    parallel_for(corpus.size(), workers, [&](std::size_t t) {
        const auto& slice = corpus[t];
        for (const auto* part : {&slice.train, &slice.validation, &slice.test})
            for (const auto& d : *part) accumulate_importance(snapshots[t], d, out[t]);
    });
    return out;
}

}  // namespace tshift
