#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "tshift/eval/llm_eval.hpp"
#include "tshift/synthgen.hpp"

using namespace tshift;
using namespace tshift::llm;
using fixture::doc;

namespace {

TemporalCorpus small_corpus(std::size_t months, std::size_t docs) {
    auto c = synth::benchmark_config();
    c.months = months;
    c.docs_per_month = docs;
    return synth::generate_corpus(c);
}

/// Text after the final "text:" of a prompt, without the trailing " label:".
std::string test_text_of(const std::string& prompt) {
    const auto start = prompt.rfind("text:") + 5;
    return prompt.substr(start, prompt.size() - start - 7);
}

/// Local completion endpoint. `reply(request_index)` returns status and body.
class FakeEndpoint {
public:
    using Reply = std::function<std::pair<int, std::string>(std::size_t)>;

    explicit FakeEndpoint(Reply reply) : reply_(std::move(reply)) {
        server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
            std::size_t n;
            {
                std::lock_guard lock(mu_);
                n = requests_.size();
                requests_.push_back(req.body);
                auth_.push_back(req.get_header_value("Authorization"));
            }
            const auto [status, body] = reply_(n);
            res.status = status;
            res.set_content(body, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEndpoint() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/completions"; }
    std::vector<std::string> requests() const {
        std::lock_guard lock(mu_);
        return requests_;
    }
    std::vector<std::string> auth() const {
        std::lock_guard lock(mu_);
        return auth_;
    }

private:
    Reply reply_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    mutable std::mutex mu_;
    std::vector<std::string> requests_, auth_;
};

std::string completion_json(const std::string& text) {
    return nlohmann::json{{"choices", {{{"text", text}}}}}.dump();
}

RollingOptions fast_retry(std::size_t retries) {
    RollingOptions o;
    o.max_retries = retries;
    o.retry_backoff = std::chrono::milliseconds(1);
    return o;
}

}  // namespace

TEST(Llm, PromptTemplate) {
    EXPECT_EQ(build_prompt("up big", "down bad", "flat day"),
              "Perform financial sentiment classification: text:up big label:positive; text:down bad "
              "label:negative; text:flat day label:");
    EXPECT_EQ(test_text_of(build_prompt("a", "b", "some text")), "some text");
}

TEST(Llm, ParseCompletion) {
    EXPECT_EQ(parse_completion("positive"), 1);
    EXPECT_EQ(parse_completion("Negative."), 0);
    EXPECT_EQ(parse_completion("  POSITIVE!\nmore"), 1);
    EXPECT_EQ(parse_completion("\tnegative; because"), 0);
    EXPECT_EQ(parse_completion("maybe"), std::nullopt);
    EXPECT_EQ(parse_completion(""), std::nullopt);
    EXPECT_EQ(parse_completion("positively"), std::nullopt);
    EXPECT_EQ(parse_completion("neutral positive"), std::nullopt);
}

TEST(Llm, InContextPairIsDeterministicAndLabelled) {
    const auto corpus = small_corpus(2, 200);
    const auto a = select_in_context(corpus[0], 7), b = select_in_context(corpus[0], 7);
    EXPECT_EQ(a.positive, b.positive);
    EXPECT_EQ(a.negative, b.negative);
    EXPECT_EQ(a.positive.label, kPositive);
    EXPECT_EQ(a.negative.label, kNegative);
    std::set<std::string> seen;
    for (std::uint64_t draw = 0; draw < 20; ++draw) seen.insert(select_in_context(corpus[0], 7, draw).positive.text);
    EXPECT_GT(seen.size(), 1u);

    MonthlySlice one_class;
    one_class.train = {doc("up", 1), doc("up more", 1)};
    EXPECT_THROW(select_in_context(one_class, 1), DataError);
}

TEST(Llm, HttpSendsAuthAndParsesBothResponseShapes) {
    FakeEndpoint ep([](std::size_t n) {
        if (n == 0) return std::pair{200, completion_json(" positive")};
        return std::pair{200, nlohmann::json{{"choices", {{{"message", {{"content", "Negative."}}}}}}}.dump()};
    });
    ::setenv("TSHIFT_TEST_LLM_TOKEN", "s3cret", 1);
    ClientConfig cfg;
    cfg.url = ep.url();
    cfg.auth_env = "TSHIFT_TEST_LLM_TOKEN";
    cfg.model = "demo-model";
    const auto complete = http_completion(cfg);
    const InContextPair pair{doc("up", 1), doc("down", 0)};
    EXPECT_EQ(llm_classify(complete, pair, doc("rally", 1)).label, 1);
    EXPECT_EQ(llm_classify(complete, pair, doc("slump", 0)).label, 0);

    ASSERT_EQ(ep.requests().size(), 2u);
    EXPECT_EQ(ep.auth()[0], "Bearer s3cret");
    const auto body = nlohmann::json::parse(ep.requests()[0]);
    EXPECT_EQ(body.at("model"), "demo-model");
    EXPECT_EQ(body.at("prompt"), build_prompt("up", "down", "rally"));
    EXPECT_EQ(body.at("temperature"), 0);

    ::unsetenv("TSHIFT_TEST_LLM_TOKEN");
    const auto anonymous = http_completion(cfg);
    anonymous("x");
    EXPECT_EQ(ep.auth()[2], "");
}

TEST(Llm, RetriesRateLimitsAndServerErrors) {
    FakeEndpoint ep([](std::size_t n) {
        if (n == 0) return std::pair{429, std::string("{}")};
        if (n == 1) return std::pair{503, std::string("{}")};
        return std::pair{200, completion_json("negative")};
    });
    ClientConfig cfg;
    cfg.url = ep.url();
    const auto complete = http_completion(cfg);
    const InContextPair pair{doc("up", 1), doc("down", 0)};
    const auto c = classify_with_retry(complete, pair, doc("slump", 0), fast_retry(3));
    EXPECT_EQ(c.label, 0);
    EXPECT_EQ(ep.requests().size(), 3u);
}

TEST(Llm, GivesUpAfterMaxRetriesAndDoesNotRetryClientErrors) {
    FakeEndpoint always_busy([](std::size_t) { return std::pair{500, std::string("{}")}; });
    ClientConfig cfg;
    cfg.url = always_busy.url();
    const InContextPair pair{doc("up", 1), doc("down", 0)};
    EXPECT_THROW(classify_with_retry(http_completion(cfg), pair, doc("x", 1), fast_retry(2)), RetriableError);
    EXPECT_EQ(always_busy.requests().size(), 3u);

    FakeEndpoint forbidden([](std::size_t) { return std::pair{403, std::string("{}")}; });
    cfg.url = forbidden.url();
    try {
        classify_with_retry(http_completion(cfg), pair, doc("x", 1), fast_retry(3));
        FAIL();
    } catch (const RetriableError&) {
        FAIL() << "403 must not be retriable";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("403"), std::string::npos);
    }
    EXPECT_EQ(forbidden.requests().size(), 1u);

    FakeEndpoint garbage([](std::size_t) { return std::pair{200, std::string("{\"nope\":1}")}; });
    cfg.url = garbage.url();
    EXPECT_THROW(http_completion(cfg)("x"), Error);

    cfg.url = "localhost/no-scheme";
    EXPECT_THROW(http_completion(cfg), ValidationError);
}

TEST(LlmRolling, AlwaysPositiveMatchesClosedForm) {
    const auto corpus = small_corpus(4, 60);
    std::atomic<std::size_t> calls{0};
    const CompletionFn yes = [&](const std::string&) {
        ++calls;
        return std::string("Positive");
    };
    const auto r = rolling_evaluate(corpus, yes, 3);
    ASSERT_EQ(r.report.records.size(), 3u);
    EXPECT_EQ(r.report.strategy, "two-shot");
    EXPECT_EQ(r.abstentions, 0u);
    std::size_t expected_requests = 0;
    for (std::size_t t = 0; t + 1 < corpus.size(); ++t) {
        expected_requests += corpus[t].test.size() + corpus[t + 1].test.size();
        double pos = 0;
        for (const auto& d : corpus[t].test) pos += d.label;
        const double neg = static_cast<double>(corpus[t].test.size()) - pos;
        EXPECT_NEAR(r.report.records[t].f1_in_pos, 2 * pos / (2 * pos + neg), 1e-12);
        EXPECT_EQ(r.report.records[t].f1_in_neg, 0.0);
    }
    EXPECT_EQ(r.requests, expected_requests);
    EXPECT_EQ(calls.load(), expected_requests);
}

TEST(LlmRolling, AbstentionsAreCountedAndExcluded) {
    const auto corpus = small_corpus(3, 80);
    // Abstains on odd-length texts and answers "positive" otherwise.
    auto abstains = [](const std::string& text) { return text.size() % 2 == 1; };
    const CompletionFn fn = [&](const std::string& prompt) {
        return abstains(test_text_of(prompt)) ? std::string("unsure") : std::string("positive");
    };
    const auto r = rolling_evaluate(corpus, fn, 1);
    std::size_t skipped = 0;
    for (std::size_t t = 0; t + 1 < corpus.size(); ++t) {
        std::vector<int> pred, gold;
        for (const auto& d : corpus[t].test) {
            if (abstains(d.text)) {
                ++skipped;
                continue;
            }
            pred.push_back(1);
            gold.push_back(d.label);
        }
        EXPECT_EQ(r.report.records[t].f1_in_pos, f1_per_class(pred, gold, 1));
        for (const auto& d : corpus[t + 1].test) skipped += abstains(d.text);
    }
    EXPECT_GT(skipped, 0u);
    EXPECT_EQ(r.abstentions, skipped);

    const CompletionFn never = [](const std::string&) { return std::string("hmm"); };
    EXPECT_THROW(rolling_evaluate(corpus, never, 1), DataError);
    EXPECT_THROW(rolling_evaluate(corpus.subrange(0, 1), never, 1), DataError);
}

TEST(LlmRolling, ExamplePairIsFixedPerMonthUnlessResampled) {
    const auto corpus = small_corpus(2, 400);
    std::vector<std::string> prefixes;
    const CompletionFn record = [&](const std::string& prompt) {
        prefixes.push_back(prompt.substr(0, prompt.rfind("text:")));
        return std::string("negative");
    };
    RollingOptions opts;
    opts.docs_per_month = 10;
    const auto fixed = rolling_evaluate(corpus, record, 5, opts);
    EXPECT_EQ(fixed.requests, 20u);
    EXPECT_EQ(std::set<std::string>(prefixes.begin(), prefixes.end()).size(), 1u);

    prefixes.clear();
    opts.resample_per_document = true;
    rolling_evaluate(corpus, record, 5, opts);
    EXPECT_GT(std::set<std::string>(prefixes.begin(), prefixes.end()).size(), 1u);
}

TEST(LlmRolling, EndToEndOverHttp) {
    const auto corpus = small_corpus(3, 100);
    FakeEndpoint ep([](std::size_t n) {
        if (n % 7 == 3) return std::pair{429, std::string("{}")};
        return std::pair{200, completion_json(n % 2 ? "positive" : "negative")};
    });
    ClientConfig cfg;
    cfg.url = ep.url();
    auto opts = fast_retry(3);
    opts.docs_per_month = 6;
    const auto r = rolling_evaluate(corpus, http_completion(cfg), 2, opts);
    EXPECT_EQ(r.requests, 24u);
    EXPECT_EQ(r.report.records.size(), 2u);
    EXPECT_GT(ep.requests().size(), 24u);
}
