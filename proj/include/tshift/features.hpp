#pragma once

// Tokenization, vocabularies and bag-of-words features.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tshift/core/error.hpp"
#include "tshift/corpus.hpp"

namespace tshift {

/// Reserved token substituted for masked tokens. Never enters a vocabulary.
inline constexpr std::string_view kMaskToken = "<mask>";

namespace detail {

/// Byte length of the Unicode whitespace sequence starting at s[i], or 0.
inline std::size_t whitespace_length(std::string_view s, std::size_t i) {
    const auto b = [&](std::size_t k) -> unsigned char {
        return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0;
    };
    const unsigned char c = b(0);
    if (c == ' ' || (c >= '\t' && c <= '\r') || (c >= 0x1c && c <= 0x1f)) return 1;
    if (c == 0xC2 && (b(1) == 0x85 || b(1) == 0xA0)) return 2;
    if (c == 0xE1 && b(1) == 0x9A && b(2) == 0x80) return 3;
    if (c == 0xE2 && b(1) == 0x80 &&
        ((b(2) >= 0x80 && b(2) <= 0x8A) || b(2) == 0xA8 || b(2) == 0xA9 || b(2) == 0xAF))
        return 3;
    if (c == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) return 3;
    if (c == 0xE3 && b(1) == 0x80 && b(2) == 0x80) return 3;
    return 0;
}

inline bool is_ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u);
}

inline bool is_sigil(char c) { return c == '$' || c == '#'; }

inline std::optional<std::string> normalize_token(std::string_view raw) {
    if (raw == kMaskToken) return std::string(kMaskToken);
    std::size_t first = 0, last = raw.size();
    while (first < last && is_ascii_punct(raw[first]) && !is_sigil(raw[first])) ++first;
    while (last > first && is_ascii_punct(raw[last - 1])) --last;
    std::string_view core = raw.substr(first, last - first);
    if (std::all_of(core.begin(), core.end(), is_sigil)) return std::nullopt;
    std::string out(core);
    for (auto& ch : out)
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    return out;
}

}  // namespace detail

/// Lowercases (ASCII), splits on Unicode whitespace and strips leading and
/// trailing ASCII punctuation from each token. Leading '$' and '#' are kept.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t start = 0, i = 0;
    auto flush = [&](std::size_t end) {
        if (end > start)
            if (auto tok = detail::normalize_token(text.substr(start, end - start)))
                tokens.push_back(std::move(*tok));
    };
    while (i < text.size()) {
        if (const auto ws = detail::whitespace_length(text, i)) {
            flush(i);
            i += ws;
            start = i;
        } else {
            ++i;
        }
    }
    flush(text.size());
    return tokens;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

/// Dense bijective token <-> index mapping.
class Vocabulary {
public:
    Vocabulary() = default;

    explicit Vocabulary(std::vector<std::string> tokens, std::size_t min_frequency = 1)
        : tokens_(std::move(tokens)), min_frequency_(min_frequency) {
        index_.reserve(tokens_.size());
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (tokens_[i].empty()) throw DataError("vocabulary contains an empty token");
            if (tokens_[i] == kMaskToken) throw DataError("vocabulary contains the mask token");
            if (!index_.emplace(tokens_[i], static_cast<std::uint32_t>(i)).second)
                throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
        }
    }

    std::size_t size() const { return tokens_.size(); }
    bool empty() const { return tokens_.empty(); }
    std::size_t min_frequency() const { return min_frequency_; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(std::size_t i) const { return tokens_.at(i); }

    std::optional<std::uint32_t> index_of(std::string_view token) const {
        const auto it = index_.find(std::string(token));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    bool contains(std::string_view token) const { return index_of(token).has_value(); }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

    /// One token per line; line number (0-based) is the index.
    void save(std::ostream& out) const {
        for (const auto& t : tokens_) out << t << '\n';
    }
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write vocabulary to '" + path + "'");
        save(out);
    }
    static Vocabulary load(std::istream& in) {
        std::vector<std::string> tokens;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            tokens.push_back(line);
        }
        return Vocabulary(std::move(tokens));
    }
    static Vocabulary load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read vocabulary from '" + path + "'");
        return load(in);
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::size_t min_frequency_ = 1;
};

/// Tokens with corpus frequency >= min_frequency ordered by (frequency desc, token asc).
inline Vocabulary build_vocab_from_tokens(std::span<const std::vector<std::string>> tokenized,
                                          std::size_t min_frequency) {
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& toks : tokenized)
        for (const auto& t : toks)
            if (t != kMaskToken) ++freq[t];
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, n] : freq)
        if (n >= min_frequency) kept.emplace_back(tok, n);
    if (kept.empty())
        throw DataError("no token reaches min_frequency " + std::to_string(min_frequency));
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> tokens;
    tokens.reserve(kept.size());
    for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
    return Vocabulary(std::move(tokens), min_frequency);
}

inline Vocabulary build_vocab(std::span<const Document> docs, std::size_t min_frequency = 5) {
    if (docs.empty()) throw DataError("build_vocab on an empty document list");
    std::vector<std::vector<std::string>> tokenized;
    tokenized.reserve(docs.size());
    for (const auto& d : docs) tokenized.push_back(tokenize(d.text));
    return build_vocab_from_tokens(tokenized, min_frequency);
}

/// Sparse term-frequency vector, entries sorted by index, all counts > 0.
struct FeatureVector {
    struct Entry {
        std::uint32_t index;
        double count;
        friend bool operator==(const Entry&, const Entry&) = default;
    };
    std::vector<Entry> entries;

    double total() const {
        double s = 0;
        for (const auto& e : entries) s += e.count;
        return s;
    }
    bool empty() const { return entries.empty(); }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline FeatureVector featurize_tokens(std::span<const std::string> tokens, const Vocabulary& vocab) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens)
        if (auto i = vocab.index_of(t)) ids.push_back(*i);
    std::sort(ids.begin(), ids.end());
    FeatureVector fv;
    for (std::size_t i = 0; i < ids.size();) {
        std::size_t j = i;
        while (j < ids.size() && ids[j] == ids[i]) ++j;
        fv.entries.push_back({ids[i], static_cast<double>(j - i)});
        i = j;
    }
    return fv;
}

inline FeatureVector featurize(const Document& doc, const Vocabulary& vocab) {
    return featurize_tokens(tokenize(doc.text), vocab);
}

using TokenSet = std::unordered_set<std::string>;

/// Replaces every token in `masked` by the mask sentinel. The document is
/// returned untouched when nothing is replaced.
inline Document mask_tokens(const Document& doc, const TokenSet& masked) {
    if (masked.empty()) return doc;
    auto tokens = tokenize(doc.text);
    bool changed = false;
    for (auto& t : tokens) {
        if (masked.contains(t)) {
            t = kMaskToken;
            changed = true;
        }
    }
    if (!changed) return doc;
    Document out = doc;
    out.text = join_tokens(tokens);
    return out;
}

}  // namespace tshift
