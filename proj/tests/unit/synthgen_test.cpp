#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "tshift/features.hpp"
#include "tshift/synthgen.hpp"

using namespace tshift;
using namespace tshift::synth;

namespace {

GeneratorConfig small_config() {
    GeneratorConfig c;
    c.months = 4;
    c.docs_per_month = 300;
    c.vocab = default_vocabulary();
    c.seed = 17;
    c.regimes = {RegimeSpec{"only", 0.8, {}, 0.0}};
    return c;
}

}  // namespace

TEST(Synth, AlwaysPositiveRegimeWithoutNoise) {
    auto c = small_config();
    c.regimes = {RegimeSpec{"up", 1.0, {}, 0.0}};
    c.noise_rate = 0.0;
    const auto docs = generate_documents(c).documents;
    ASSERT_EQ(docs.size(), c.months * c.docs_per_month);
    const std::set<std::string> positive(c.vocab.positive_words.begin(), c.vocab.positive_words.end());
    for (const auto& d : docs) {
        EXPECT_EQ(d.label, kPositive);
        const auto tokens = tokenize(d.text);
        EXPECT_GE(tokens.size(), c.min_length);
        EXPECT_LE(tokens.size(), c.max_length);
        EXPECT_TRUE(std::any_of(tokens.begin(), tokens.end(), [&](auto& t) { return positive.contains(t); }))
            << d.text;
    }
}

TEST(Synth, StickyRegimePositivityWithinBinomialBand) {
    auto c = small_config();
    c.months = 6;
    c.docs_per_month = 2000;
    c.regimes = {RegimeSpec{"A", 0.9, {}, 0.0}, RegimeSpec{"B", 0.4, {}, 0.0}};
    const auto stream = generate_documents(c);
    const auto corpus = make_corpus(stream.documents, {}, c.seed);
    const double sd = std::sqrt(0.9 * 0.1 / static_cast<double>(c.docs_per_month));
    for (std::size_t t = 0; t < corpus.size(); ++t) {
        EXPECT_EQ(stream.regime_trace[t], 0u);
        EXPECT_NEAR(sentiment_positivity(corpus[t].all()), 0.9, 4 * sd);
    }
}

TEST(Synth, DeterministicUnderSeed) {
    auto c = small_config();
    c.regimes = {RegimeSpec{"A", 0.9, {}, 0.5}, RegimeSpec{"B", 0.3, {}, 0.5}};
    const auto a = generate_documents(c), b = generate_documents(c);
    EXPECT_EQ(a.documents, b.documents);
    EXPECT_EQ(a.regime_trace, b.regime_trace);
    c.seed += 1;
    EXPECT_NE(generate_documents(c).documents, a.documents);
}

TEST(Synth, EntityConditionalConvergesToRegimeValue) {
    auto c = small_config();
    c.months = 2;
    c.docs_per_month = 10000;
    c.entity_rate = 0.5;
    c.noise_rate = 0.0;
    RegimeSpec r{"A", 0.8, {}, 0.0};
    r.entity_sentiment = {{"$aapl", 0.2}, {"$tsla", 0.95}, {"$amzn", 0.5}};
    c.regimes = {r};
    const auto docs = generate_documents(c).documents;
    for (const auto& [entity, target] : r.entity_sentiment) {
        for (std::size_t m = 0; m < c.months; ++m) {
            double pos = 0, n = 0;
            for (std::size_t i = m * c.docs_per_month; i < (m + 1) * c.docs_per_month; ++i) {
                const auto tokens = tokenize(docs[i].text);
                if (std::find(tokens.begin(), tokens.end(), entity) == tokens.end()) continue;
                n += 1;
                pos += docs[i].label;
            }
            ASSERT_GT(n, 0);
            EXPECT_NEAR(pos / n, target, 0.05) << entity << " month " << m;
        }
    }
}

TEST(Synth, ValidationNamesTheField) {
    auto expect_field = [](GeneratorConfig c, const std::string& field) {
        try {
            c.validate();
            FAIL() << "expected failure on " << field;
        } catch (const ValidationError& e) {
            EXPECT_EQ(e.field(), field);
        }
    };
    auto c = small_config();
    c.months = 1;
    expect_field(c, "months");
    c = small_config();
    c.docs_per_month = 9;
    expect_field(c, "docs_per_month");
    c = small_config();
    c.regimes.clear();
    expect_field(c, "regimes");
    c = small_config();
    c.regimes[0].positivity = 1.5;
    expect_field(c, "regimes[0].positivity");
    c = small_config();
    c.regimes[0].entity_sentiment["$nope"] = 0.5;
    expect_field(c, "regimes[0].entity_sentiment.$nope");
    c = small_config();
    c.noise_rate = -0.1;
    expect_field(c, "noise_rate");
}

TEST(Synth, JsonRoundTripAndErrors) {
    const auto c = benchmark_config();
    const auto back = generator_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(generate_documents([&] { auto s = back; s.months = 2; s.docs_per_month = 50; return s; }()).documents,
              generate_documents([&] { auto s = c; s.months = 2; s.docs_per_month = 50; return s; }()).documents);

    const auto bench = generator_config_from_json({{"benchmark", true}, {"months", 3}});
    EXPECT_EQ(bench.months, 3u);
    EXPECT_EQ(bench.regimes.size(), 2u);

    try {
        generator_config_from_json({{"regimes", {{{"positivity", 2.0}}}}}, "synth.");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "synth.regimes[0].positivity");
    }
    EXPECT_THROW(generator_config_from_json({{"months", "many"}}), ValidationError);
    EXPECT_THROW(generator_config_from_json({{"start", "2014"}}), ValidationError);
}

TEST(Synth, BenchmarkShape) {
    const auto c = benchmark_config();
    EXPECT_EQ(c.months, 36u);
    EXPECT_EQ(c.docs_per_month, 2000u);
    EXPECT_EQ(c.regimes.size(), 2u);
    EXPECT_NO_THROW(c.validate());
}

TEST(Synth, AntonymLexiconIsAnInvolution) {
    const auto v = default_vocabulary(30);
    const auto lex = antonym_lexicon(v);
    EXPECT_EQ(lex.size(), 60u);
    for (const auto& [a, b] : lex) {
        EXPECT_NE(a, b);
        EXPECT_EQ(lex.at(b), a);
    }
    EXPECT_EQ(lex.at(v.positive_words[0]), v.negative_words[0]);
}
