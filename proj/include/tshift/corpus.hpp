#pragma once

// Timestamped labeled documents, monthly bucketing, per-month splitting and
// class balancing.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tshift/core/error.hpp"
#include "tshift/core/random.hpp"

namespace tshift {

inline constexpr int kNegative = 0;
inline constexpr int kPositive = 1;

using Timestamp = std::chrono::sys_seconds;

struct MonthKey {
    int year = 1970;
    unsigned month = 1;  // 1..12

    friend constexpr auto operator<=>(const MonthKey&, const MonthKey&) = default;

    static MonthKey of(Timestamp ts) {
        const std::chrono::year_month_day ymd{std::chrono::floor<std::chrono::days>(ts)};
        return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month())};
    }

    constexpr MonthKey next() const {
        return month == 12 ? MonthKey{year + 1, 1} : MonthKey{year, month + 1};
    }

    /// Months since 0000-01, handy as a stable integer id.
    constexpr std::int64_t ordinal() const { return std::int64_t{year} * 12 + (month - 1); }

    Timestamp start() const {
        return std::chrono::sys_days{std::chrono::year{year} / std::chrono::month{month} / 1};
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u", year, month);
        return buf;
    }
};

struct TimestampedDocument {
    std::string text;
    Timestamp timestamp{};
    int label = kPositive;
    std::vector<std::string> tags;

    friend bool operator==(const TimestampedDocument&, const TimestampedDocument&) = default;
};

using Document = TimestampedDocument;

struct SplitRatio {
    double train = 0.7;
    double validation = 0.15;
    double test = 0.15;

    void validate() const {
        if (train < 0 || validation < 0 || test < 0)
            throw ValidationError("split_ratio", "fractions must be non-negative");
        if (std::abs(train + validation + test - 1.0) > 1e-9)
            throw ValidationError("split_ratio", "fractions must sum to 1");
    }
};

struct PartitionSizes {
    std::size_t train = 0, validation = 0, test = 0;
};

/// Rounded partition sizes for n documents; test takes the remainder.
inline PartitionSizes partition_sizes(std::size_t n, const SplitRatio& ratio) {
    auto round_to = [n](double f) {
        return static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
    };
    PartitionSizes s;
    s.train = std::min(n, round_to(ratio.train));
    s.validation = std::min(n - s.train, round_to(ratio.validation));
    s.test = n - s.train - s.validation;
    return s;
}

struct MonthlySlice {
    int period = 0;
    MonthKey month;
    std::vector<Document> train;
    std::vector<Document> validation;
    std::vector<Document> test;

    std::size_t size() const { return train.size() + validation.size() + test.size(); }

    std::vector<Document> all() const {
        std::vector<Document> out;
        out.reserve(size());
        out.insert(out.end(), train.begin(), train.end());
        out.insert(out.end(), validation.begin(), validation.end());
        out.insert(out.end(), test.begin(), test.end());
        return out;
    }
};

/// Chronologically ordered monthly slices with consecutive periods 0..N-1.
/// Immutable after construction.
class TemporalCorpus {
public:
    TemporalCorpus() = default;

    TemporalCorpus(std::vector<MonthlySlice> slices, std::uint64_t split_seed)
        : slices_(std::move(slices)), split_seed_(split_seed) {
        for (std::size_t i = 0; i < slices_.size(); ++i) {
            if (slices_[i].period != static_cast<int>(i))
                throw DataError("slice periods must be consecutive from 0");
            if (i > 0 && slices_[i].month != slices_[i - 1].month.next())
                throw DataError("slice months must be consecutive; missing " +
                                slices_[i - 1].month.next().to_string());
        }
    }

    const std::vector<MonthlySlice>& slices() const { return slices_; }
    const MonthlySlice& operator[](std::size_t t) const { return slices_.at(t); }
    std::size_t size() const { return slices_.size(); }
    bool empty() const { return slices_.empty(); }
    std::uint64_t split_seed() const { return split_seed_; }

    /// Slices [first, last) re-indexed from period 0.
    TemporalCorpus subrange(std::size_t first, std::size_t last) const {
        if (first > last || last > slices_.size()) throw DataError("subrange out of bounds");
        std::vector<MonthlySlice> out(slices_.begin() + static_cast<std::ptrdiff_t>(first),
                                      slices_.begin() + static_cast<std::ptrdiff_t>(last));
        for (std::size_t i = 0; i < out.size(); ++i) out[i].period = static_cast<int>(i);
        return TemporalCorpus(std::move(out), split_seed_);
    }

    /// Applies fn(Document&) to every document of every partition.
    template <typename Fn>
    TemporalCorpus transformed(Fn&& fn) const {
        auto out = slices_;
        for (auto& s : out)
            for (auto* part : {&s.train, &s.validation, &s.test})
                for (auto& d : *part) fn(d);
        return TemporalCorpus(std::move(out), split_seed_);
    }

private:
    std::vector<MonthlySlice> slices_;
    std::uint64_t split_seed_ = 0;
};

// ---------------------------------------------------------------------------
// Timestamps

namespace detail {

inline bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    return std::from_chars(s.data() + pos, s.data() + pos + len, out).ec == std::errc{};
}

}  // namespace detail

/// Parses "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]" (a space
/// may replace the 'T'). A missing zone designator means UTC.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    using namespace std::chrono;
    int y, mo, d, hh = 0, mm = 0, ss = 0;
    if (!detail::read_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' ||
        !detail::read_int(s, 5, 2, mo) || s[7] != '-' || !detail::read_int(s, 8, 2, d))
        return std::nullopt;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    std::size_t pos = 10;
    int offset_minutes = 0;
    if (pos < s.size()) {
        if (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ') return std::nullopt;
        if (!detail::read_int(s, pos + 1, 2, hh) || s.size() < pos + 9 || s[pos + 3] != ':' ||
            !detail::read_int(s, pos + 4, 2, mm) || s[pos + 6] != ':' ||
            !detail::read_int(s, pos + 7, 2, ss))
            return std::nullopt;
        if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
        pos += 9;
        if (pos < s.size() && s[pos] == '.') {
            ++pos;
            const std::size_t digits = pos;
            while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
            if (pos == digits) return std::nullopt;
        }
        if (pos < s.size()) {
            if (s[pos] == 'Z' || s[pos] == 'z') {
                ++pos;
            } else if (s[pos] == '+' || s[pos] == '-') {
                int oh, om;
                if (!detail::read_int(s, pos + 1, 2, oh) || s.size() < pos + 6 ||
                    s[pos + 3] != ':' || !detail::read_int(s, pos + 4, 2, om))
                    return std::nullopt;
                offset_minutes = (s[pos] == '+' ? 1 : -1) * (oh * 60 + om);
                pos += 6;
            } else {
                return std::nullopt;
            }
        }
        if (pos != s.size()) return std::nullopt;
    }
    return Timestamp{sys_days{ymd}} + hours{hh} + minutes{mm} + seconds{ss} -
           minutes{offset_minutes};
}

inline std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const auto day_start = floor<days>(ts);
    const year_month_day ymd{day_start};
    const hh_mm_ss hms{ts - day_start};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

// ---------------------------------------------------------------------------
// JSONL ingestion

/// Fixed mapping for string labels; integer labels must be 0 or 1.
inline std::optional<int> normalize_label(const nlohmann::json& v) {
    if (v.is_number_integer() || v.is_number_unsigned()) {
        const auto i = v.get<std::int64_t>();
        if (i == 0 || i == 1) return static_cast<int>(i);
        return std::nullopt;
    }
    if (v.is_string()) {
        auto s = v.get<std::string>();
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (s == "bullish" || s == "positive") return kPositive;
        if (s == "bearish" || s == "negative") return kNegative;
    }
    return std::nullopt;
}

inline bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

inline Document parse_document(std::string_view line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
    Document doc;
    const auto text = j.find("text");
    if (text == j.end() || !text->is_string()) throw ParseError(line_no, "missing string field 'text'");
    doc.text = text->get<std::string>();
    if (is_blank(doc.text)) throw ParseError(line_no, "'text' is empty");
    const auto ts = j.find("timestamp");
    if (ts == j.end() || !ts->is_string())
        throw ParseError(line_no, "missing string field 'timestamp'");
    const auto parsed = parse_timestamp(ts->get<std::string>());
    if (!parsed) throw ParseError(line_no, "bad ISO-8601 timestamp '" + ts->get<std::string>() + "'");
    doc.timestamp = *parsed;
    const auto label = j.find("label");
    if (label == j.end()) throw ParseError(line_no, "missing field 'label'");
    const auto l = normalize_label(*label);
    if (!l) throw ParseError(line_no, "label must be 0, 1, bullish or bearish");
    doc.label = *l;
    if (const auto tags = j.find("tags"); tags != j.end()) {
        if (!tags->is_array()) throw ParseError(line_no, "'tags' must be a list of strings");
        for (const auto& t : *tags) {
            if (!t.is_string()) throw ParseError(line_no, "'tags' must be a list of strings");
            doc.tags.push_back(t.get<std::string>());
        }
    }
    return doc;
}

inline nlohmann::json document_to_json(const Document& doc) {
    nlohmann::json j;
    j["text"] = doc.text;
    j["timestamp"] = format_timestamp(doc.timestamp);
    j["label"] = doc.label;
    if (!doc.tags.empty()) j["tags"] = doc.tags;
    return j;
}

inline void write_jsonl(std::ostream& out, std::span<const Document> docs) {
    for (const auto& d : docs) out << document_to_json(d).dump() << '\n';
}

inline std::vector<Document> read_documents(std::istream& in) {
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line)) continue;
        docs.push_back(parse_document(line, line_no));
    }
    return docs;
}

/// Buckets documents by UTC calendar month and splits each month by an
/// independent uniform shuffle. Document order inside a month is the input order.
inline TemporalCorpus make_corpus(std::vector<Document> docs, const SplitRatio& ratio,
                                  std::uint64_t seed) {
    ratio.validate();
    if (docs.empty()) throw DataError("empty corpus");
    std::map<MonthKey, std::vector<Document>> by_month;
    for (auto& d : docs) by_month[MonthKey::of(d.timestamp)].push_back(std::move(d));

    std::vector<MonthlySlice> slices;
    slices.reserve(by_month.size());
    std::optional<MonthKey> prev;
    for (auto& [key, month_docs] : by_month) {
        if (prev && key != prev->next())
            throw DataError("gap month " + prev->next().to_string() + " has no documents");
        prev = key;
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(key.ordinal())));
        rng.shuffle(std::span<Document>(month_docs));
        const auto sizes = partition_sizes(month_docs.size(), ratio);
        MonthlySlice s;
        s.period = static_cast<int>(slices.size());
        s.month = key;
        auto it = std::make_move_iterator(month_docs.begin());
        s.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
        it += static_cast<std::ptrdiff_t>(sizes.train);
        s.validation.assign(it, it + static_cast<std::ptrdiff_t>(sizes.validation));
        it += static_cast<std::ptrdiff_t>(sizes.validation);
        s.test.assign(it, std::make_move_iterator(month_docs.end()));
        slices.push_back(std::move(s));
    }
    return TemporalCorpus(std::move(slices), seed);
}

inline TemporalCorpus load_jsonl(const std::string& path, const SplitRatio& ratio = {},
                                 std::uint64_t seed = 0) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file '" + path + "'");
    return make_corpus(read_documents(in), ratio, seed);
}

// ---------------------------------------------------------------------------
// Label statistics

inline double sentiment_positivity(std::span<const Document> docs) {
    if (docs.empty()) throw DataError("sentiment_positivity of an empty document list");
    const auto pos = std::count_if(docs.begin(), docs.end(),
                                   [](const Document& d) { return d.label == kPositive; });
    return static_cast<double>(pos) / static_cast<double>(docs.size());
}

/// Balances the train partition by drawing minority-label documents with
/// replacement until both labels have equal counts.
inline MonthlySlice upsample_minority(const MonthlySlice& slice, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < slice.train.size(); ++i)
        (slice.train[i].label == kPositive ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw DataError("upsample_minority: train partition of " + slice.month.to_string() +
                        " has a single class");
    MonthlySlice out = slice;
    if (pos.size() == neg.size()) return out;
    const auto& minority = pos.size() < neg.size() ? pos : neg;
    const std::size_t deficit = std::max(pos.size(), neg.size()) - minority.size();
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(slice.month.ordinal())));
    out.train.reserve(out.train.size() + deficit);
    for (std::size_t k = 0; k < deficit; ++k)
        out.train.push_back(slice.train[minority[rng.below(minority.size())]]);
    return out;
}

inline TemporalCorpus upsample_minority(const TemporalCorpus& corpus, std::uint64_t seed) {
    std::vector<MonthlySlice> slices;
    slices.reserve(corpus.size());
    for (const auto& s : corpus.slices()) slices.push_back(upsample_minority(s, seed));
    return TemporalCorpus(std::move(slices), corpus.split_seed());
}

}  // namespace tshift
