#pragma once

// Month-to-month distribution shift: the p_t(v)-weighted Bernoulli KL between
// token-conditional label distributions of consecutive months, its rank
// correlation with performance drops, and coefficient-based feature ranking.

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tshift/core/error.hpp"
#include "tshift/corpus.hpp"
#include "tshift/eval/rolling.hpp"
#include "tshift/eval/spearman.hpp"
#include "tshift/features.hpp"
#include "tshift/models/snapshot.hpp"

namespace tshift {

struct TokenStats {
    std::shared_ptr<const Vocabulary> vocab;
    std::vector<double> marginal;     // p_t(v), sums to 1
    std::vector<double> conditional;  // p_t(y=1 | v)
    std::vector<std::size_t> support; // n_v, occurrences of v
};

/// Occurrence-level estimates over `vocab`; conditionals are Laplace smoothed:
/// (n_{v,1} + alpha) / (n_v + 2 alpha). With alpha = 0 an unseen token gets 0.5.
inline TokenStats token_stats(std::span<const Document> docs, std::shared_ptr<const Vocabulary> vocab,
                              double alpha = 0.5) {
    if (docs.empty()) throw DataError("token_stats on an empty document list");
    if (alpha < 0) throw ValidationError("alpha", "smoothing must be >= 0");
    const std::size_t v = vocab->size();
    std::vector<double> n_pos(v, 0.0);
    TokenStats s;
    s.support.assign(v, 0);
    double total = 0;
    for (const auto& d : docs) {
        for (const auto& e : featurize(d, *vocab).entries) {
            s.support[e.index] += static_cast<std::size_t>(e.count);
            if (d.label == kPositive) n_pos[e.index] += e.count;
            total += e.count;
        }
    }
    if (total == 0) throw DataError("token_stats: no document contains a shared-vocabulary token");
    s.marginal.resize(v);
    s.conditional.resize(v);
    for (std::size_t i = 0; i < v; ++i) {
        const double n = static_cast<double>(s.support[i]);
        s.marginal[i] = n / total;
        const double denom = n + 2 * alpha;
        s.conditional[i] = denom > 0 ? (n_pos[i] + alpha) / denom : 0.5;
    }
    s.vocab = std::move(vocab);
    return s;
}

/// KL(Bern(p) || Bern(q)) in nats, with 0 log 0 = 0.
inline double bernoulli_kl(double p, double q) {
    auto term = [](double a, double b) {
        if (a == 0) return 0.0;
        if (b == 0) return std::numeric_limits<double>::infinity();
        return a * std::log(a / b);
    };
    return term(p, q) + term(1 - p, 1 - q);
}

/// Per-token contributions p_t(v) * KL(p_t(y|v) || p_{t+1}(y|v)).
inline std::vector<double> drift_contributions(const TokenStats& from, const TokenStats& to) {
    if (!from.vocab || !to.vocab || !(*from.vocab == *to.vocab))
        throw DataError("weighted_drift: token statistics use different vocabularies");
    std::vector<double> c(from.marginal.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = from.marginal[i] == 0 ? 0.0 : from.marginal[i] * bernoulli_kl(from.conditional[i], to.conditional[i]);
    return c;
}

inline double weighted_drift(const TokenStats& from, const TokenStats& to) {
    const auto c = drift_contributions(from, to);
    double s = 0;
    for (double x : c) s += x;
    return s;
}

/// Tokens with frequency >= min_frequency in the union of both document sets.
inline std::shared_ptr<const Vocabulary> shared_vocabulary(std::span<const Document> a,
                                                           std::span<const Document> b,
                                                           std::size_t min_frequency = 5) {
    std::vector<Document> both(a.begin(), a.end());
    both.insert(both.end(), b.begin(), b.end());
    return std::make_shared<const Vocabulary>(build_vocab(both, min_frequency));
}

struct DriftPoint {
    int period_t = 0;
    int period_t1 = 0;
    double drift = 0;                // nats
    std::vector<std::string> tokens; // shared vocabulary of the pair
    std::vector<double> contributions;
};

struct DriftReport {
    std::vector<DriftPoint> points;

    std::vector<double> series() const {
        std::vector<double> v;
        for (const auto& p : points) v.push_back(p.drift);
        return v;
    }
};

/// Drift for every consecutive pair (t, t+1), using all documents of each slice.
inline DriftReport drift_series(const TemporalCorpus& corpus, std::size_t min_frequency = 5,
                                double alpha = 0.5, std::size_t workers = 1) {
    if (corpus.size() < 2) throw DataError("drift_series needs at least 2 slices");
    DriftReport report;
    report.points.resize(corpus.size() - 1);
    parallel_for(corpus.size() - 1, workers, [&](std::size_t t) {
        const auto a = corpus[t].all();
        const auto b = corpus[t + 1].all();
        auto vocab = shared_vocabulary(a, b, min_frequency);
        const auto sa = token_stats(a, vocab, alpha);
        const auto sb = token_stats(b, vocab, alpha);
        DriftPoint& p = report.points[t];
        p.period_t = static_cast<int>(t);
        p.period_t1 = static_cast<int>(t + 1);
        p.contributions = drift_contributions(sa, sb);
        p.tokens = vocab->tokens();
        for (double c : p.contributions) p.drift += c;
    });
    return report;
}

inline void write_drift_csv(std::ostream& out, const DriftReport& r) {
    out << "period_t,period_t1,drift_nats\n";
    for (const auto& p : r.points) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10f", p.drift);
        out << p.period_t << ',' << p.period_t1 << ',' << buf << '\n';
    }
}

/// Spearman over (delta_avg at t, drift(t, t+1)) for the periods both cover.
inline Correlation drift_vs_degradation(const RollingReport& report, const DriftReport& drifts) {
    std::vector<double> deltas, ds;
    for (const auto& rec : report.records)
        for (const auto& p : drifts.points)
            if (p.period_t == rec.period) {
                deltas.push_back(rec.delta_avg);
                ds.push_back(p.drift);
            }
    if (deltas.size() < 3) throw DataError("drift_vs_degradation: fewer than 3 aligned periods");
    return spearman(deltas, ds);
}

struct WeightedFeature {
    std::string token;
    double coefficient = 0;
};

/// Top-k tokens of a logistic regression by |coefficient|; ties by token.
inline std::vector<WeightedFeature> extract_top_features(const ModelSnapshot& model, std::size_t k) {
    if (model.kind() != ModelKind::logreg) throw DataError("extract_top_features needs a logreg model");
    const auto& vocab = model.vocab();
    std::vector<WeightedFeature> all;
    all.reserve(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) all.push_back({vocab.token(i), model.parameters()[i]});
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        const double x = std::abs(a.coefficient), y = std::abs(b.coefficient);
        return x != y ? x > y : a.token < b.token;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

inline void write_top_features_tsv(std::ostream& out, std::span<const WeightedFeature> features) {
    out << "rank\ttoken\tcoefficient\n";
    for (std::size_t i = 0; i < features.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.8f", features[i].coefficient);
        out << i + 1 << '\t' << features[i].token << '\t' << buf << '\n';
    }
}

}  // namespace tshift
