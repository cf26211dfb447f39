#pragma once

// Counterfactual Data Augmentation: find causal words by representation
// matching, then add antonym-substituted, label-flipped copies of the
// training documents that contain them.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tshift/baselines/importance.hpp"
#include "tshift/eval/rolling.hpp"
#include "tshift/models/strategy.hpp"

namespace tshift {

struct CausalWordSet {
    std::vector<std::string> candidates;  // by average importance, descending
    std::vector<std::string> causal;      // subset of candidates, same order
    double sim_threshold = 0;
};

struct CdaOptions {
    std::size_t n_candidates = 1000;
    double sim_threshold = 0.99;  // depends on model and training length; BERT-scale models sit near 0.9996
    std::size_t max_docs_per_month = 300;  // training documents scanned per month
};

/// Cosine similarity; exactly 1 for identical vectors, 0 when either is zero.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("cosine of vectors with different sizes");
    if (std::equal(a.begin(), a.end(), b.begin())) return 1.0;
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

inline std::vector<std::string> cda_candidates(std::span<const MonthImportance> months, std::size_t n) {
    std::map<std::string, TokenMonthStats> pooled;
    for (const auto& m : months)
        for (const auto& [tok, s] : m) {
            auto& p = pooled[tok];
            p.importance_sum += s.importance_sum;
            p.documents += s.documents;
            p.occurrences += s.occurrences;
        }
    std::vector<std::pair<std::string, double>> ranked;
    ranked.reserve(pooled.size());
    for (const auto& [tok, s] : pooled) ranked.emplace_back(tok, s.mean());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    ranked.resize(std::min(n, ranked.size()));
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (auto& [tok, v] : ranked) out.push_back(std::move(tok));
    return out;
}

inline CausalWordSet cda_identify(const TemporalCorpus& first_half, std::span<const ModelSnapshot> snapshots,
                                  const CdaOptions& opts = {}, std::size_t workers = 1) {
    if (first_half.empty()) throw DataError("CDA needs a non-empty corpus");
    CausalWordSet out;
    out.sim_threshold = opts.sim_threshold;
    out.candidates = cda_candidates(monthly_importance(first_half, snapshots, workers), opts.n_candidates);

    std::vector<std::atomic<bool>> causal(out.candidates.size());
    parallel_for(first_half.size(), workers, [&](std::size_t t) {
        const ModelSnapshot& m = snapshots[t];
        const auto& train = first_half[t].train;
        const std::size_t n = std::min(opts.max_docs_per_month, train.size());
        std::vector<FeatureVector> xs(n);
        std::vector<std::vector<double>> reps(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = m.features(train[i]);
            reps[i] = m.representation(xs[i]);
        }
        for (std::size_t c = 0; c < out.candidates.size(); ++c) {
            if (causal[c].load(std::memory_order_relaxed)) continue;
            const auto idx = m.vocab().index_of(out.candidates[c]);
            if (!idx) continue;
            for (std::size_t i = 0; i < n && !causal[c].load(std::memory_order_relaxed); ++i) {
                FeatureVector without;
                for (const auto& e : xs[i].entries)
                    if (e.index != *idx) without.entries.push_back(e);
                if (without.entries.size() == xs[i].entries.size()) continue;
                const auto rep = m.representation(without);
                for (std::size_t j = 0; j < n; ++j) {
                    if (train[j].label == train[i].label) continue;
                    if (cosine_similarity(rep, reps[j]) >= opts.sim_threshold) {
                        causal[c].store(true, std::memory_order_relaxed);
                        break;
                    }
                }
            }
        }
    });
    for (std::size_t c = 0; c < out.candidates.size(); ++c)
        if (causal[c].load()) out.causal.push_back(out.candidates[c]);
    return out;
}

// ---------------------------------------------------------------------------
// Antonym lexicon: TSV token<TAB>antonym.

class AntonymLexicon {
public:
    AntonymLexicon() = default;
    explicit AntonymLexicon(std::map<std::string, std::string> map) {
        for (auto& [k, v] : map) add(k, v);
    }

    void add(const std::string& token, const std::string& antonym) {
        if (token == antonym) throw ValidationError(token, "maps to itself");
        if (token.empty() || antonym.empty()) throw ValidationError(token, "empty lexicon entry");
        map_[token] = antonym;
    }
    const std::string* find(const std::string& token) const {
        auto it = map_.find(token);
        return it == map_.end() ? nullptr : &it->second;
    }
    std::size_t size() const { return map_.size(); }
    const std::map<std::string, std::string>& entries() const { return map_; }

    static AntonymLexicon load(std::istream& in) {
        AntonymLexicon lex;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
                throw ParseError(line_no, "expected token<TAB>antonym");
            const auto token = line.substr(0, tab);
            const auto antonym = line.substr(tab + 1);
            if (token.empty() || antonym.empty()) throw ParseError(line_no, "empty lexicon field");
            if (token == antonym) throw ParseError(line_no, "token '" + token + "' maps to itself");
            lex.map_[token] = antonym;
        }
        return lex;
    }
    static AntonymLexicon load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open " + path);
        return load(in);
    }
    void save(std::ostream& out) const {
        for (const auto& [k, v] : map_) out << k << '\t' << v << '\n';
    }

private:
    std::map<std::string, std::string> map_;
};

/// Counterfactual of `doc`: every token in `substitutable` is replaced by its
/// antonym and the label flipped. nullopt when no token qualifies.
inline std::optional<Document> counterfactual(const Document& doc, const TokenSet& substitutable,
                                              const AntonymLexicon& lexicon) {
    auto tokens = tokenize(doc.text);
    bool changed = false;
    for (auto& t : tokens) {
        if (!substitutable.contains(t)) continue;
        if (const auto* a = lexicon.find(t)) {
            t = *a;
            changed = true;
        }
    }
    if (!changed) return std::nullopt;
    Document out = doc;
    out.text = join_tokens(tokens);
    out.label = 1 - doc.label;
    return out;
}

struct CdaAugmentation {
    TemporalCorpus corpus;          // training partitions extended, validation/test untouched
    std::size_t augmented = 0;      // counterfactual documents added
    std::vector<std::string> covered;  // causal tokens with a lexicon entry
};

inline CdaAugmentation cda_augment(const TemporalCorpus& corpus, std::span<const std::string> causal,
                                   const AntonymLexicon& lexicon) {
    CdaAugmentation out;
    TokenSet covered;
    for (const auto& w : causal)
        if (lexicon.find(w) && covered.insert(w).second) out.covered.push_back(w);
    if (covered.empty()) throw DataError("antonym lexicon covers none of the causal tokens");
    auto slices = corpus.slices();
    for (auto& s : slices) {
        std::vector<Document> extra;
        for (const auto& d : s.train)
            if (auto cf = counterfactual(d, covered, lexicon)) extra.push_back(std::move(*cf));
        out.augmented += extra.size();
        std::move(extra.begin(), extra.end(), std::back_inserter(s.train));
    }
    out.corpus = TemporalCorpus(std::move(slices), corpus.split_seed());
    return out;
}

/// Trains the strategy chain on original+counterfactual training data and
/// evaluates on the original test partitions.
inline RollingReport cda_augment_and_run(const TemporalCorpus& second_half, std::span<const std::string> causal,
                                         const AntonymLexicon& lexicon, ModelKind kind, const TrainConfig& config,
                                         StrategyKind strategy = StrategyKind::ndom, std::size_t workers = 1,
                                         std::size_t* augmented = nullptr) {
    const auto aug = cda_augment(second_half, causal, lexicon);
    if (augmented) *augmented = aug.augmented;
    const auto snaps = run_strategy(aug.corpus, strategy, kind, config, workers);
    return rolling_evaluate(snaps, aug.corpus, workers, "cda-" + to_string(strategy), to_string(kind));
}

}  // namespace tshift
