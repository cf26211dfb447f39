#pragma once

// Two-shot in-context classification through a remote completion endpoint.

#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "httplib.h"
// <resolv.h> (via httplib) defines _res, which collides with Eigen parameter names.
#ifdef _res
#undef _res
#endif
#include "json.hpp"
#include "tshift/core/error.hpp"
#include "tshift/core/random.hpp"
#include "tshift/corpus.hpp"

namespace tshift::llm {

struct ClientConfig {
    std::string url;                            // e.g. http://localhost:8080/v1/completions
    std::string model = "text-davinci-003";
    std::string auth_env = "TSHIFT_LLM_TOKEN";  // bearer token variable; unset = no auth header
    double timeout_seconds = 30.0;
    int max_tokens = 3;
    bool resample_per_document = false;         // false: one example pair per month
};

/// Maps a prompt to the raw completion text. Throws RetriableError on transport failure.
using CompletionFn = std::function<std::string(const std::string& prompt)>;

inline std::string build_prompt(const std::string& positive_example, const std::string& negative_example,
                                const std::string& test_text) {
    return "Perform financial sentiment classification: text:" + positive_example +
           " label:positive; text:" + negative_example + " label:negative; text:" + test_text +
           " label:";
}

/// First whitespace-delimited word of the completion, case- and
/// punctuation-insensitive: positive -> 1, negative -> 0, anything else -> nullopt.
inline std::optional<int> parse_completion(std::string_view completion) {
    std::size_t i = 0;
    while (i < completion.size() && std::isspace(static_cast<unsigned char>(completion[i]))) ++i;
    std::string word;
    for (; i < completion.size() && !std::isspace(static_cast<unsigned char>(completion[i])); ++i) {
        const auto c = static_cast<unsigned char>(completion[i]);
        if (std::isalpha(c)) word += static_cast<char>(std::tolower(c));
    }
    if (word == "positive") return kPositive;
    if (word == "negative") return kNegative;
    return std::nullopt;
}

struct InContextPair {
    Document positive;
    Document negative;
};

/// One positive and one negative example drawn from the slice's train partition.
inline InContextPair select_in_context(const MonthlySlice& slice, std::uint64_t seed,
                                       std::uint64_t draw = 0) {
    std::vector<const Document*> pos, neg;
    for (const auto& d : slice.train) (d.label == kPositive ? pos : neg).push_back(&d);
    if (pos.empty() || neg.empty())
        throw DataError("slice " + slice.month.to_string() + " lacks an in-context example of each label");
    Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(slice.month.ordinal())), draw));
    return {*pos[rng.below(pos.size())], *neg[rng.below(neg.size())]};
}

struct Classification {
    std::optional<int> label;  // nullopt = abstention
    std::string completion;
};

inline Classification llm_classify(const CompletionFn& complete, const InContextPair& examples,
                                   const Document& doc) {
    Classification c;
    c.completion = complete(build_prompt(examples.positive.text, examples.negative.text, doc.text));
    c.label = parse_completion(c.completion);
    return c;
}

/// HTTP transport for OpenAI-style completion endpoints.
inline CompletionFn http_completion(const ClientConfig& config) {
    const auto scheme_end = config.url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("llm.url", "expected scheme://host[:port]/path");
    const auto path_start = config.url.find('/', scheme_end + 3);
    const std::string base = config.url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : config.url.substr(path_start);
    std::string token;
    if (const char* t = std::getenv(config.auth_env.c_str())) token = t;

    return [=](const std::string& prompt) -> std::string {
        httplib::Client client(base);
        const auto secs = static_cast<time_t>(config.timeout_seconds);
        const auto usecs = static_cast<time_t>((config.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
        const nlohmann::json body = {{"model", config.model},
                                     {"prompt", prompt},
                                     {"max_tokens", config.max_tokens},
                                     {"temperature", 0}};
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) throw RetriableError("completion request failed: " + httplib::to_string(res.error()));
        if (res->status == 429 || res->status >= 500)
            throw RetriableError("completion endpoint returned HTTP " + std::to_string(res->status));
        if (res->status != 200)
            throw Error("completion endpoint returned HTTP " + std::to_string(res->status));
        try {
            const auto j = nlohmann::json::parse(res->body);
            const auto& choice = j.at("choices").at(0);
            if (choice.contains("text")) return choice.at("text").get<std::string>();
            return choice.at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("unexpected completion response: ") + e.what());
        }
    };
}

}  // namespace tshift::llm
