#pragma once

// Synthetic regime-switching labeled text streams.
//
// Each month has one active regime, driven by a first-order Markov chain. A
// document's label comes from the regime's positivity, or from the regime's
// entity-conditional positivity when the document mentions an entity token.
// The text then gets 1..k sentiment words from the label's list (Zipf over
// list rank), the entity token if any, and uniform filler tokens. With
// probability mood_rate an entity document draws its words from the regime's
// overall tone instead of its label. Labels are flipped with probability
// noise_rate after the text is drawn.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tshift/core/error.hpp"
#include "tshift/core/random.hpp"
#include "tshift/corpus.hpp"
#include "tshift/features.hpp"
#include "tshift/models/train_config.hpp"

namespace tshift::synth {

struct RegimeSpec {
    std::string name;
    double positivity = 0.8;
    std::map<std::string, double> entity_sentiment;
    double transition_prob = 0.0;
};

struct SynthVocabulary {
    std::vector<std::string> positive_words;
    std::vector<std::string> negative_words;
    std::vector<std::string> entity_tokens;
    std::vector<std::string> filler_tokens;
};

struct GeneratorConfig {
    std::size_t months = 36;
    std::size_t docs_per_month = 2000;
    SynthVocabulary vocab;
    std::vector<RegimeSpec> regimes;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;

    MonthKey start{2014, 1};
    std::size_t initial_regime = 0;
    double entity_rate = 0.3;
    double mood_rate = 0.0;
    std::size_t sentiment_words_min = 1;
    std::size_t sentiment_words_max = 2;
    double sentiment_zipf = 1.0;
    std::size_t min_length = 5;
    std::size_t max_length = 30;

    void validate() const;
};

struct SyntheticStream {
    std::vector<Document> documents;       // chronological
    std::vector<std::size_t> regime_trace;  // active regime per month
};

/// Deterministic default word lists. positive_words[i] and negative_words[i]
/// are antonyms of each other.
inline SynthVocabulary default_vocabulary(std::size_t sentiment_words = 120,
                                          std::size_t entities = 12,
                                          std::size_t fillers = 400) {
    static const char* kPos[] = {"bullish", "moon",   "long",     "buy",     "rally",  "breakout",
                                 "strong",  "calls",  "squeeze",  "rip",     "soar",   "gain",
                                 "upgrade", "beat",   "support",  "bounce",  "higher", "green",
                                 "winner",  "boom",   "surge",    "accumulate", "undervalued", "rocket"};
    static const char* kNeg[] = {"bearish", "crash",  "short",    "sell",    "dump",   "breakdown",
                                 "weak",    "puts",   "dilution", "tank",    "plunge", "loss",
                                 "downgrade", "miss", "resistance", "fade",  "lower",  "red",
                                 "loser",   "bust",   "slump",    "distribute", "overvalued", "sink"};
    static const char* kEntities[] = {"$aapl", "$tsla", "$amzn", "$nflx", "$fb",   "$goog",
                                      "$twtr", "$nvda", "$amd",  "$baba", "$gpro", "$spy"};
    static const char* kFillers[] = {"the",  "to",   "a",    "is",   "and",  "of",   "in",  "it",
                                     "this", "for",  "on",   "today", "now", "just", "will", "be",
                                     "at",   "week", "market", "stock", "price", "earnings", "chart", "volume"};
    SynthVocabulary v;
    constexpr std::size_t n_named = std::size(kPos);
    for (std::size_t i = 0; i < sentiment_words; ++i) {
        if (i < n_named) {
            v.positive_words.emplace_back(kPos[i]);
            v.negative_words.emplace_back(kNeg[i]);
        } else {
            v.positive_words.push_back("up" + std::to_string(i));
            v.negative_words.push_back("down" + std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < entities; ++i)
        v.entity_tokens.push_back(i < std::size(kEntities) ? std::string(kEntities[i])
                                                            : "$tick" + std::to_string(i));
    for (std::size_t i = 0; i < fillers; ++i)
        v.filler_tokens.push_back(i < std::size(kFillers) ? std::string(kFillers[i])
                                                           : "w" + std::to_string(i));
    return v;
}

inline void GeneratorConfig::validate() const {
    auto prob = [](double p, const std::string& field) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(field, "must lie in [0, 1]");
    };
    if (months < 2) throw ValidationError("months", "must be >= 2");
    if (docs_per_month < 10) throw ValidationError("docs_per_month", "must be >= 10");
    if (regimes.empty()) throw ValidationError("regimes", "at least one regime is required");
    prob(noise_rate, "noise_rate");
    prob(entity_rate, "entity_rate");
    prob(mood_rate, "mood_rate");
    if (vocab.positive_words.empty()) throw ValidationError("vocab.positive_words", "must be non-empty");
    if (vocab.negative_words.empty()) throw ValidationError("vocab.negative_words", "must be non-empty");
    if (vocab.filler_tokens.empty()) throw ValidationError("vocab.filler_tokens", "must be non-empty");
    if (entity_rate > 0 && vocab.entity_tokens.empty())
        throw ValidationError("vocab.entity_tokens", "must be non-empty when entity_rate > 0");
    if (initial_regime >= regimes.size()) throw ValidationError("initial_regime", "out of range");
    if (sentiment_words_min < 1 || sentiment_words_max < sentiment_words_min)
        throw ValidationError("sentiment_words_min", "need 1 <= min <= max");
    if (min_length < 1 || max_length < min_length)
        throw ValidationError("min_length", "need 1 <= min_length <= max_length");
    if (min_length < sentiment_words_max + 1)
        throw ValidationError("min_length", "must leave room for sentiment words and an entity");
    if (!(sentiment_zipf >= 0.0)) throw ValidationError("sentiment_zipf", "must be >= 0");
    if (start.month < 1 || start.month > 12) throw ValidationError("start", "bad month");
    for (std::size_t r = 0; r < regimes.size(); ++r) {
        const std::string base = "regimes[" + std::to_string(r) + "]";
        prob(regimes[r].positivity, base + ".positivity");
        prob(regimes[r].transition_prob, base + ".transition_prob");
        for (const auto& [tok, p] : regimes[r].entity_sentiment) {
            prob(p, base + ".entity_sentiment." + tok);
            if (std::find(vocab.entity_tokens.begin(), vocab.entity_tokens.end(), tok) ==
                vocab.entity_tokens.end())
                throw ValidationError(base + ".entity_sentiment." + tok, "unknown entity token");
        }
    }
}

namespace detail {

/// Inverse-CDF sampler over ranks 0..n-1 with weight (rank+1)^-s.
class ZipfSampler {
public:
    ZipfSampler(std::size_t n, double s) : cdf_(n) {
        double acc = 0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += std::pow(static_cast<double>(i + 1), -s);
            cdf_[i] = acc;
        }
        for (auto& c : cdf_) c /= acc;
    }
    std::size_t operator()(Rng& rng) const {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

}  // namespace detail

/// Deterministic given config.seed.
inline SyntheticStream generate_documents(const GeneratorConfig& config) {
    config.validate();
    SyntheticStream out;
    out.documents.reserve(config.months * config.docs_per_month);
    Rng chain(derive_seed(config.seed, 0x7265676dULL));
    const detail::ZipfSampler pos_words(config.vocab.positive_words.size(), config.sentiment_zipf);
    const detail::ZipfSampler neg_words(config.vocab.negative_words.size(), config.sentiment_zipf);

    std::size_t regime = config.initial_regime;
    MonthKey month = config.start;
    for (std::size_t m = 0; m < config.months; ++m, month = month.next()) {
        if (m > 0 && config.regimes.size() > 1 &&
            chain.bernoulli(config.regimes[regime].transition_prob)) {
            std::size_t next = chain.below(config.regimes.size() - 1);
            regime = next >= regime ? next + 1 : next;
        }
        out.regime_trace.push_back(regime);
        const RegimeSpec& spec = config.regimes[regime];

        Rng rng(derive_seed(config.seed, m + 1));
        const auto month_start = month.start();
        const auto month_seconds = (month.next().start() - month_start).count();
        std::vector<Document> docs;
        docs.reserve(config.docs_per_month);
        for (std::size_t i = 0; i < config.docs_per_month; ++i) {
            Document doc;
            doc.timestamp = month_start + std::chrono::seconds(rng.below(
                                              static_cast<std::uint64_t>(month_seconds)));
            std::optional<std::string> entity;
            if (config.entity_rate > 0 && rng.bernoulli(config.entity_rate))
                entity = config.vocab.entity_tokens[rng.below(config.vocab.entity_tokens.size())];
            double p_pos = spec.positivity;
            if (entity)
                if (auto it = spec.entity_sentiment.find(*entity); it != spec.entity_sentiment.end())
                    p_pos = it->second;
            const int label = rng.bernoulli(p_pos) ? kPositive : kNegative;

            const auto length = static_cast<std::size_t>(rng.range(
                static_cast<std::int64_t>(config.min_length), static_cast<std::int64_t>(config.max_length)));
            const auto k = static_cast<std::size_t>(
                rng.range(static_cast<std::int64_t>(config.sentiment_words_min),
                          static_cast<std::int64_t>(config.sentiment_words_max)));
            std::vector<std::string> tokens;
            tokens.reserve(length);
            // Mood documents take their words from the regime's overall tone, so
            // only the entity token tells the label apart.
            int tone = label;
            if (entity && config.mood_rate > 0 && rng.bernoulli(config.mood_rate))
                tone = rng.bernoulli(spec.positivity) ? kPositive : kNegative;
            const auto& words = tone == kPositive ? config.vocab.positive_words
                                                  : config.vocab.negative_words;
            const auto& sampler = tone == kPositive ? pos_words : neg_words;
            for (std::size_t w = 0; w < k; ++w) tokens.push_back(words[sampler(rng)]);
            if (entity) {
                tokens.push_back(*entity);
                doc.tags.push_back(*entity);
            }
            while (tokens.size() < length)
                tokens.push_back(config.vocab.filler_tokens[rng.below(config.vocab.filler_tokens.size())]);
            rng.shuffle(std::span<std::string>(tokens));
            doc.text = join_tokens(tokens);
            doc.label = rng.bernoulli(config.noise_rate) ? 1 - label : label;
            docs.push_back(std::move(doc));
        }
        std::stable_sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) {
            return a.timestamp < b.timestamp;
        });
        std::move(docs.begin(), docs.end(), std::back_inserter(out.documents));
    }
    return out;
}

inline TemporalCorpus generate_corpus(const GeneratorConfig& config, const SplitRatio& ratio = {}) {
    return make_corpus(generate_documents(config).documents, ratio, config.seed);
}

/// Ground-truth antonym lexicon (both directions) for the sentiment word lists.
inline std::map<std::string, std::string> antonym_lexicon(const SynthVocabulary& v) {
    std::map<std::string, std::string> lex;
    const auto n = std::min(v.positive_words.size(), v.negative_words.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (v.positive_words[i] == v.negative_words[i]) continue;
        lex[v.positive_words[i]] = v.negative_words[i];
        lex[v.negative_words[i]] = v.positive_words[i];
    }
    return lex;
}

/// The pinned benchmark: 36 months x 2000 documents, about 77% positive. A
/// calm "bull" regime is interrupted by one-month "bear" shocks that reverse
/// every entity association; the bear regime always hands back to bull.
/// Entity documents mostly carry the regime's tone in their wording, so the
/// label a ticker implies is only learnable from the month it was seen in.
inline GeneratorConfig benchmark_config() {
    GeneratorConfig c;
    c.months = 36;
    c.docs_per_month = 2000;
    c.vocab = default_vocabulary(30);
    c.seed = 20140101;
    c.noise_rate = 0.05;
    c.entity_rate = 0.35;
    c.mood_rate = 0.8;
    RegimeSpec bull{"bull", 0.97, {}, 0.65};
    RegimeSpec bear{"bear", 0.92, {}, 1.0};
    for (std::size_t i = 0; i < c.vocab.entity_tokens.size(); ++i) {
        const bool up = i % 2 == 0;
        bull.entity_sentiment[c.vocab.entity_tokens[i]] = up ? 0.97 : 0.05;
        bear.entity_sentiment[c.vocab.entity_tokens[i]] = up ? 0.05 : 0.97;
    }
    c.regimes = {bull, bear};
    return c;
}

/// Training settings used with the benchmark. Plain SGD logistic regression
/// needs a larger step than the generic default to escape the majority class
/// within ten epochs.
inline TrainConfig benchmark_train_config(ModelKind kind) {
    auto c = TrainConfig::defaults_for(kind);
    if (kind == ModelKind::logreg) c.learning_rate = 0.5;
    return c;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const GeneratorConfig& c) {
    nlohmann::json j;
    j["months"] = c.months;
    j["docs_per_month"] = c.docs_per_month;
    j["noise_rate"] = c.noise_rate;
    j["seed"] = c.seed;
    j["start"] = c.start.to_string();
    j["initial_regime"] = c.initial_regime;
    j["entity_rate"] = c.entity_rate;
    j["mood_rate"] = c.mood_rate;
    j["sentiment_words_min"] = c.sentiment_words_min;
    j["sentiment_words_max"] = c.sentiment_words_max;
    j["sentiment_zipf"] = c.sentiment_zipf;
    j["min_length"] = c.min_length;
    j["max_length"] = c.max_length;
    j["vocab"] = {{"positive_words", c.vocab.positive_words},
                  {"negative_words", c.vocab.negative_words},
                  {"entity_tokens", c.vocab.entity_tokens},
                  {"filler_tokens", c.vocab.filler_tokens}};
    j["regimes"] = nlohmann::json::array();
    for (const auto& r : c.regimes)
        j["regimes"].push_back({{"name", r.name},
                                {"positivity", r.positivity},
                                {"entity_sentiment", r.entity_sentiment},
                                {"transition_prob", r.transition_prob}});
    return j;
}

namespace detail {

template <typename T>
T get_field(const nlohmann::json& j, const std::string& key, const std::string& path, T fallback) {
    const auto it = j.find(key);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(path + key, "has the wrong type");
    }
}

}  // namespace detail

/// Missing fields take GeneratorConfig defaults; a missing "vocab" means
/// default_vocabulary(); "benchmark": true starts from benchmark_config().
inline GeneratorConfig generator_config_from_json(const nlohmann::json& j, const std::string& path = "") {
    if (!j.is_object()) throw ValidationError(path, "generator config must be an object");
    GeneratorConfig c = detail::get_field<bool>(j, "benchmark", path, false) ? benchmark_config()
                                                                             : GeneratorConfig{};
    if (c.vocab.positive_words.empty()) c.vocab = default_vocabulary();
    c.months = detail::get_field(j, "months", path, c.months);
    c.docs_per_month = detail::get_field(j, "docs_per_month", path, c.docs_per_month);
    c.noise_rate = detail::get_field(j, "noise_rate", path, c.noise_rate);
    c.seed = detail::get_field(j, "seed", path, c.seed);
    c.initial_regime = detail::get_field(j, "initial_regime", path, c.initial_regime);
    c.entity_rate = detail::get_field(j, "entity_rate", path, c.entity_rate);
    c.mood_rate = detail::get_field(j, "mood_rate", path, c.mood_rate);
    c.sentiment_words_min = detail::get_field(j, "sentiment_words_min", path, c.sentiment_words_min);
    c.sentiment_words_max = detail::get_field(j, "sentiment_words_max", path, c.sentiment_words_max);
    c.sentiment_zipf = detail::get_field(j, "sentiment_zipf", path, c.sentiment_zipf);
    c.min_length = detail::get_field(j, "min_length", path, c.min_length);
    c.max_length = detail::get_field(j, "max_length", path, c.max_length);
    if (const auto it = j.find("start"); it != j.end()) {
        const auto s = it->is_string() ? it->get<std::string>() : std::string();
        const auto ts = parse_timestamp(s + "-01");
        if (!ts) throw ValidationError(path + "start", "expected \"YYYY-MM\"");
        c.start = MonthKey::of(*ts);
    }
    if (const auto it = j.find("vocab"); it != j.end()) {
        const std::string vp = path + "vocab.";
        using Words = std::vector<std::string>;
        c.vocab.positive_words = detail::get_field(*it, "positive_words", vp, c.vocab.positive_words);
        c.vocab.negative_words = detail::get_field(*it, "negative_words", vp, c.vocab.negative_words);
        c.vocab.entity_tokens = detail::get_field(*it, "entity_tokens", vp, c.vocab.entity_tokens);
        c.vocab.filler_tokens = detail::get_field<Words>(*it, "filler_tokens", vp, c.vocab.filler_tokens);
    }
    if (const auto it = j.find("regimes"); it != j.end()) {
        if (!it->is_array()) throw ValidationError(path + "regimes", "must be a list");
        c.regimes.clear();
        for (std::size_t r = 0; r < it->size(); ++r) {
            const auto& rj = (*it)[r];
            const std::string rp = path + "regimes[" + std::to_string(r) + "].";
            if (!rj.is_object()) throw ValidationError(rp, "must be an object");
            RegimeSpec spec;
            spec.name = detail::get_field<std::string>(rj, "name", rp, "regime" + std::to_string(r));
            spec.positivity = detail::get_field(rj, "positivity", rp, spec.positivity);
            spec.transition_prob = detail::get_field(rj, "transition_prob", rp, spec.transition_prob);
            spec.entity_sentiment = detail::get_field(rj, "entity_sentiment", rp, spec.entity_sentiment);
            c.regimes.push_back(std::move(spec));
        }
    }
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + e.field(), e.message());
    }
    return c;
}

}  // namespace tshift::synth
