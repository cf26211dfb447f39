#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "tshift/core/random.hpp"
#include "tshift/corpus.hpp"

using namespace tshift;
using fixture::doc;

namespace {

std::multiset<std::string> texts(const std::vector<Document>& docs) {
    std::multiset<std::string> out;
    for (const auto& d : docs) out.insert(d.text);
    return out;
}

std::vector<Document> spread(std::size_t n, const std::vector<std::string>& months) {
    std::vector<Document> docs;
    for (std::size_t i = 0; i < n; ++i)
        docs.push_back(doc("doc " + std::to_string(i), static_cast<int>(i % 3 != 0),
                           months[i % months.size()] + "-10T00:00:00Z"));
    return docs;
}

}  // namespace

TEST(Corpus, FourDivisibleDocsSplitTwoOneOne) {
    std::vector<Document> docs;
    for (int i = 0; i < 4; ++i) docs.push_back(doc("t" + std::to_string(i), 1, "2014-01-0" + std::to_string(i + 1)));
    for (std::uint64_t seed : {0ULL, 7ULL, 12345ULL}) {
        const auto c = make_corpus(docs, {0.5, 0.25, 0.25}, seed);
        ASSERT_EQ(c.size(), 1u);
        EXPECT_EQ(c[0].train.size(), 2u);
        EXPECT_EQ(c[0].validation.size(), 1u);
        EXPECT_EQ(c[0].test.size(), 1u);
    }
}

TEST(Corpus, GapMonthIsRejectedAndNamed) {
    std::vector<Document> docs{doc("a", 1, "2014-01-03"), doc("b", 0, "2014-03-03")};
    try {
        make_corpus(docs, {}, 1);
        FAIL() << "expected a gap-month error";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("2014-02"), std::string::npos) << e.what();
    }
}

TEST(Corpus, EmptyCorpusIsAnError) { EXPECT_THROW(make_corpus({}, {}, 1), DataError); }

TEST(Corpus, BadRatioIsAValidationError) {
    EXPECT_THROW(make_corpus({doc("a", 1)}, {0.5, 0.5, 0.5}, 1), ValidationError);
    EXPECT_THROW(make_corpus({doc("a", 1)}, {1.2, -0.1, -0.1}, 1), ValidationError);
}

TEST(Corpus, PartitionSizesFollowRatioWithinOne) {
    const auto docs = spread(1000, {"2014-01", "2014-02", "2014-03"});
    const SplitRatio r{0.7, 0.15, 0.15};
    const auto c = make_corpus(docs, r, 99);
    ASSERT_EQ(c.size(), 3u);
    for (const auto& s : c.slices()) {
        const double n = static_cast<double>(s.size());
        EXPECT_LE(std::abs(static_cast<double>(s.train.size()) - std::round(r.train * n)), 1.0);
        EXPECT_LE(std::abs(static_cast<double>(s.validation.size()) - std::round(r.validation * n)), 1.0);
        EXPECT_LE(std::abs(static_cast<double>(s.test.size()) - std::round(r.test * n)), 1.0);
    }
}

TEST(Corpus, PartitionsAreADisjointCoverOfTheMonth) {
    const auto docs = spread(777, {"2015-11", "2015-12", "2016-01", "2016-02"});
    const auto c = make_corpus(docs, {}, 5);
    std::map<std::string, std::vector<Document>> by_month;
    for (const auto& d : docs) by_month[MonthKey::of(d.timestamp).to_string()].push_back(d);
    ASSERT_EQ(c.size(), by_month.size());
    for (std::size_t t = 0; t < c.size(); ++t) {
        const auto& s = c[t];
        EXPECT_EQ(s.period, static_cast<int>(t));
        EXPECT_EQ(texts(s.all()), texts(by_month[s.month.to_string()]));
        for (const auto& d : s.all()) EXPECT_EQ(MonthKey::of(d.timestamp), s.month);
    }
    EXPECT_EQ(c[2].month.year, 2016);
    EXPECT_EQ(c[2].month.month, 1u);
}

TEST(Corpus, SplittingIsDeterministicAndSeedDependent) {
    const auto docs = spread(300, {"2014-01", "2014-02"});
    const auto a = make_corpus(docs, {}, 42), b = make_corpus(docs, {}, 42), c = make_corpus(docs, {}, 43);
    for (std::size_t t = 0; t < a.size(); ++t) {
        EXPECT_EQ(a[t].train, b[t].train);
        EXPECT_EQ(a[t].validation, b[t].validation);
        EXPECT_EQ(a[t].test, b[t].test);
    }
    EXPECT_NE(a[0].train, c[0].train);
}

TEST(Corpus, LoadJsonlIsDeterministicFromFile) {
    const auto dir = fixture::temp_dir("load");
    const auto path = (dir / "c.jsonl").string();
    {
        std::ofstream out(path);
        const auto docs = spread(120, {"2014-05", "2014-06"});
        write_jsonl(out, docs);
    }
    const auto a = load_jsonl(path, {}, 3), b = load_jsonl(path, {}, 3);
    ASSERT_EQ(a.size(), 2u);
    for (std::size_t t = 0; t < a.size(); ++t) EXPECT_EQ(a[t].all(), b[t].all());
    std::filesystem::remove_all(dir);
    EXPECT_THROW(load_jsonl(path), DataError);
}

TEST(Corpus, MalformedLineReportsItsNumber) {
    std::istringstream in(
        "{\"text\":\"ok\",\"timestamp\":\"2014-01-01T00:00:00Z\",\"label\":1}\n"
        "\n"
        "{\"text\":\"bad\",\"timestamp\":\"2014-01-01T00:00:00Z\",\"label\":2}\n");
    try {
        read_documents(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    for (const char* line : {"not json", "[1,2]", "{\"timestamp\":\"2014-01-01\",\"label\":1}",
                             "{\"text\":\"  \",\"timestamp\":\"2014-01-01\",\"label\":1}",
                             "{\"text\":\"x\",\"timestamp\":\"2014-13-01\",\"label\":1}",
                             "{\"text\":\"x\",\"timestamp\":\"2014-01-01\"}",
                             "{\"text\":\"x\",\"timestamp\":\"2014-01-01\",\"label\":1,\"tags\":[3]}"}) {
        std::istringstream one(line);
        EXPECT_THROW(read_documents(one), ParseError) << line;
    }
}

TEST(Corpus, StringLabelsAreNormalized) {
    std::istringstream in(
        "{\"text\":\"a\",\"timestamp\":\"2014-01-01T00:00:00Z\",\"label\":\"Bullish\"}\n"
        "{\"text\":\"b\",\"timestamp\":\"2014-01-01T00:00:00Z\",\"label\":\"bearish\",\"tags\":[\"AAPL\"]}\n");
    const auto docs = read_documents(in);
    ASSERT_EQ(docs.size(), 2u);
    EXPECT_EQ(docs[0].label, kPositive);
    EXPECT_EQ(docs[1].label, kNegative);
    EXPECT_EQ(docs[1].tags, std::vector<std::string>{"AAPL"});
}

TEST(Corpus, TimestampsAreBucketedInUtc) {
    const auto late = parse_timestamp("2014-01-31T23:30:00-02:00");
    ASSERT_TRUE(late);
    EXPECT_EQ(MonthKey::of(*late).to_string(), "2014-02");
    EXPECT_EQ(format_timestamp(*late), "2014-02-01T01:30:00Z");
    EXPECT_EQ(format_timestamp(*parse_timestamp("2014-03-04")), "2014-03-04T00:00:00Z");
    EXPECT_EQ(format_timestamp(*parse_timestamp("2014-03-04 05:06:07.250Z")), "2014-03-04T05:06:07Z");
    EXPECT_FALSE(parse_timestamp("2014-02-30"));
    EXPECT_FALSE(parse_timestamp("2014-02-03T25:00:00Z"));
    EXPECT_FALSE(parse_timestamp("2014-02-03Tjunk"));
}

TEST(Corpus, JsonlRoundTrip) {
    std::vector<Document> docs{doc("hello \"world\"", 1, "2014-01-02T03:04:05Z"), doc("bye", 0)};
    docs[1].tags = {"x", "y"};
    std::stringstream io;
    write_jsonl(io, docs);
    EXPECT_EQ(read_documents(io), docs);
}

TEST(Upsample, SixPositiveTwoNegative) {
    MonthlySlice s;
    for (int i = 0; i < 6; ++i) s.train.push_back(doc("p" + std::to_string(i), 1));
    s.train.push_back(doc("n0", 0));
    s.train.push_back(doc("n1", 0));
    s.validation = {doc("v", 0)};
    s.test = {doc("t", 1)};
    const auto out = upsample_minority(s, 1);
    ASSERT_EQ(out.train.size(), 12u);
    EXPECT_EQ(std::count_if(out.train.begin(), out.train.end(), [](auto& d) { return d.label == 0; }), 6);
    for (std::size_t i = 8; i < 12; ++i) EXPECT_TRUE(out.train[i].text == "n0" || out.train[i].text == "n1");
    EXPECT_EQ(out.validation, s.validation);
    EXPECT_EQ(out.test, s.test);
}

TEST(Upsample, BalancedIsUnchanged) {
    MonthlySlice s;
    s.train = {doc("a", 1), doc("b", 0), doc("c", 1), doc("d", 0)};
    EXPECT_EQ(upsample_minority(s, 9).train, s.train);
}

TEST(Upsample, HundredVersusThirtySeven) {
    MonthlySlice s;
    for (int i = 0; i < 100; ++i) s.train.push_back(doc("p" + std::to_string(i), 1));
    for (int i = 0; i < 37; ++i) s.train.push_back(doc("n" + std::to_string(i), 0));
    const auto out = upsample_minority(s, 4);
    long pos = 0, neg = 0;
    std::set<std::string> before, after;
    for (const auto& d : s.train) before.insert(d.text);
    for (const auto& d : out.train) {
        (d.label == 1 ? pos : neg)++;
        after.insert(d.text);
    }
    EXPECT_EQ(pos, 100);
    EXPECT_EQ(neg, 100);
    EXPECT_EQ(before, after);
}

TEST(Upsample, SingleClassIsAnError) {
    MonthlySlice s;
    s.train = {doc("a", 1), doc("b", 1)};
    EXPECT_THROW(upsample_minority(s, 1), DataError);
}

TEST(Positivity, Examples) {
    std::vector<Document> d{doc("a", 1), doc("b", 1), doc("c", 1), doc("d", 0)};
    EXPECT_DOUBLE_EQ(sentiment_positivity(d), 0.75);
    d.pop_back();
    EXPECT_DOUBLE_EQ(sentiment_positivity(d), 1.0);
    EXPECT_THROW(sentiment_positivity(std::vector<Document>{}), DataError);
}

TEST(Positivity, PermutationInvariant) {
    auto docs = spread(97, {"2014-01"});
    const double p = sentiment_positivity(docs);
    Rng rng(11);
    for (int k = 0; k < 20; ++k) {
        rng.shuffle(std::span<Document>(docs));
        EXPECT_EQ(sentiment_positivity(docs), p);
    }
}
