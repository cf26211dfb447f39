#pragma once

// Spurious Tokens Masking: tokens whose importance is most volatile across
// months are declared spurious and masked before training a fresh NDOM chain.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tshift/baselines/importance.hpp"
#include "tshift/eval/rolling.hpp"
#include "tshift/models/strategy.hpp"

namespace tshift {

struct TokenVolatility {
    std::string token;
    std::vector<std::optional<double>> monthly;  // nullopt where the token is below the frequency floor
    double stddev = 0;
    bool frequency_penalized = false;             // excluded from at least one month
};

struct SpuriousTokenReport {
    std::vector<TokenVolatility> tokens;  // eligible tokens, in selection order
    std::vector<std::string> selected;
    std::size_t requested = 0;
    std::vector<std::string> warnings;

    TokenSet selected_set() const { return {selected.begin(), selected.end()}; }
};

struct StmOptions {
    std::size_t k = 250;
    std::size_t min_monthly_freq = 10;
};

/// Population standard deviation of the present values.
inline double present_stddev(std::span<const std::optional<double>> xs) {
    // Shifted by the first present value so a constant series gives exactly 0.
    std::optional<double> origin;
    double sum = 0;
    std::size_t n = 0;
    for (const auto& x : xs) {
        if (!x) continue;
        if (!origin) origin = *x;
        sum += *x - *origin;
        ++n;
    }
    if (n == 0) return 0;
    const double mean = sum / static_cast<double>(n);
    double ss = 0;
    for (const auto& x : xs)
        if (x) ss += (*x - *origin - mean) * (*x - *origin - mean);
    return std::sqrt(ss / static_cast<double>(n));
}

inline SpuriousTokenReport stm_identify(const TemporalCorpus& first_half, std::span<const ModelSnapshot> snapshots,
                                        const StmOptions& opts = {}, std::size_t workers = 1) {
    if (first_half.size() < 2) throw DataError("STM needs at least 2 months");
    const auto months = monthly_importance(first_half, snapshots, workers);

    std::map<std::string, TokenVolatility> by_token;
    for (std::size_t t = 0; t < months.size(); ++t) {
        for (const auto& [tok, s] : months[t]) {
            if (s.occurrences < opts.min_monthly_freq) continue;
            auto& v = by_token[tok];
            if (v.monthly.empty()) {
                v.token = tok;
                v.monthly.assign(months.size(), std::nullopt);
            }
            v.monthly[t] = s.mean();
        }
    }
    SpuriousTokenReport report;
    report.requested = opts.k;
    for (auto& [tok, v] : by_token) {
        v.stddev = present_stddev(v.monthly);
        v.frequency_penalized = std::any_of(v.monthly.begin(), v.monthly.end(),
                                            [](const auto& x) { return !x.has_value(); });
        report.tokens.push_back(std::move(v));
    }
    std::sort(report.tokens.begin(), report.tokens.end(), [](const auto& a, const auto& b) {
        return a.stddev != b.stddev ? a.stddev > b.stddev : a.token < b.token;
    });
    std::size_t k = opts.k;
    if (k > report.tokens.size()) {
        report.warnings.push_back("k=" + std::to_string(k) + " exceeds the " +
                                  std::to_string(report.tokens.size()) + " eligible tokens; clamped");
        k = report.tokens.size();
    }
    for (std::size_t i = 0; i < k; ++i) report.selected.push_back(report.tokens[i].token);
    return report;
}

/// Masks `spurious` in every partition, trains the strategy chain and runs
/// the rolling evaluation on the masked corpus.
inline RollingReport stm_run(const TemporalCorpus& second_half, const TokenSet& spurious, ModelKind kind,
                             const TrainConfig& config, StrategyKind strategy = StrategyKind::ndom,
                             std::size_t workers = 1) {
    const auto masked = second_half.transformed([&](Document& d) { d = mask_tokens(d, spurious); });
    const auto snaps = run_strategy(masked, strategy, kind, config, workers);
    return rolling_evaluate(snaps, masked, workers, "stm-" + to_string(strategy), to_string(kind));
}

// ---------------------------------------------------------------------------
// Token-list files: one token per line.

inline void write_token_list(std::ostream& out, std::span<const std::string> tokens) {
    for (const auto& t : tokens) out << t << '\n';
}

inline std::vector<std::string> read_token_list(std::istream& in) {
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

inline std::vector<std::string> read_token_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read_token_list(in);
}

}  // namespace tshift
