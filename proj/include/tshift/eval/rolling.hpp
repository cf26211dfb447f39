#pragma once

// Rolling in-sample / out-of-sample evaluation: snapshot M_t is scored on
// test(t) (in-sample) and test(t+1) (out-of-sample) for t = 0..N-2.

#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tshift/core/error.hpp"
#include "tshift/core/parallel.hpp"
#include "tshift/corpus.hpp"
#include "tshift/eval/metrics.hpp"
#include "tshift/models/snapshot.hpp"

namespace tshift {

struct RollingReport {
    std::string strategy;
    std::string model;
    std::vector<MetricsRecord> records;
    MetricsRecord mean;  // unweighted mean over records; period = -1

    void aggregate() {
        mean = MetricsRecord{};
        mean.period = -1;
        if (records.empty()) return;
        const double n = static_cast<double>(records.size());
        for (const auto& r : records) {
            mean.f1_in_pos += r.f1_in_pos / n;
            mean.f1_in_neg += r.f1_in_neg / n;
            mean.f1_in_avg += r.f1_in_avg / n;
            mean.f1_out_pos += r.f1_out_pos / n;
            mean.f1_out_neg += r.f1_out_neg / n;
            mean.f1_out_avg += r.f1_out_avg / n;
        }
        mean.delta_pos = mean.f1_in_pos - mean.f1_out_pos;
        mean.delta_neg = mean.f1_in_neg - mean.f1_out_neg;
        mean.delta_avg = mean.f1_in_avg - mean.f1_out_avg;
    }

    std::vector<double> delta_avg_series() const {
        std::vector<double> v;
        for (const auto& r : records) v.push_back(r.delta_avg);
        return v;
    }
};

/// Predicts a label for a document at period t.
using PeriodPredictor = std::function<int(std::size_t t, const Document& doc)>;

/// Generic rolling harness over periods [first, last) (each needs t+1 < N).
inline std::vector<MetricsRecord> evaluate_periods(const TemporalCorpus& corpus, std::size_t first,
                                                   std::size_t last, const PeriodPredictor& in_sample,
                                                   const PeriodPredictor& out_of_sample,
                                                   std::size_t workers = 1) {
    if (last > corpus.size() - 1 || first > last) throw DataError("evaluation period range out of bounds");
    std::vector<MetricsRecord> records(last - first);
    parallel_for(last - first, workers, [&](std::size_t i) {
        const std::size_t t = first + i;
        auto run = [&](const std::vector<Document>& docs, const PeriodPredictor& f) {
            std::pair<std::vector<int>, std::vector<int>> pg;
            for (const auto& d : docs) {
                pg.first.push_back(f(t, d));
                pg.second.push_back(d.label);
            }
            return pg;
        };
        const auto in = run(corpus[t].test, in_sample);
        const auto out = run(corpus[t + 1].test, out_of_sample);
        records[i] = MetricsRecord::compute(static_cast<int>(t), in.first, in.second, out.first, out.second);
    });
    return records;
}

inline RollingReport rolling_evaluate(std::span<const ModelSnapshot> snapshots, const TemporalCorpus& corpus,
                                      std::size_t workers = 1, std::string strategy = "",
                                      std::string model = "") {
    if (corpus.size() < 2) throw DataError("rolling evaluation needs at least 2 slices");
    if (snapshots.size() < corpus.size() - 1)
        throw DataError("missing snapshot for period " + std::to_string(snapshots.size()));
    for (std::size_t t = 0; t + 1 < corpus.size(); ++t)
        if (snapshots[t].period() != static_cast<int>(t))
            throw DataError("missing snapshot for period " + std::to_string(t));
    const PeriodPredictor predict = [&](std::size_t t, const Document& d) { return snapshots[t].predict(d); };
    RollingReport report;
    report.strategy = std::move(strategy);
    report.model = std::move(model);
    if (report.model.empty() && !snapshots.empty()) report.model = to_string(snapshots.front().kind());
    report.records = evaluate_periods(corpus, 0, corpus.size() - 1, predict, predict, workers);
    report.aggregate();
    return report;
}

// ---------------------------------------------------------------------------
// Output

inline const char* kRollingCsvHeader =
    "strategy,model,period,month,f1_in_pos,f1_out_pos,delta_pos,f1_in_neg,f1_out_neg,delta_neg,"
    "f1_in_avg,f1_out_avg,delta_avg";

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

/// One row per period, F1 values x100.
inline void write_rolling_csv_rows(std::ostream& out, const RollingReport& r, const TemporalCorpus* corpus) {
    for (const auto& m : r.records) {
        out << r.strategy << ',' << r.model << ',' << m.period << ','
            << (corpus ? (*corpus)[static_cast<std::size_t>(m.period)].month.to_string() : std::string())
            << ',' << fixed6(100 * m.f1_in_pos) << ',' << fixed6(100 * m.f1_out_pos) << ','
            << fixed6(100 * m.delta_pos) << ',' << fixed6(100 * m.f1_in_neg) << ','
            << fixed6(100 * m.f1_out_neg) << ',' << fixed6(100 * m.delta_neg) << ','
            << fixed6(100 * m.f1_in_avg) << ',' << fixed6(100 * m.f1_out_avg) << ','
            << fixed6(100 * m.delta_avg) << '\n';
    }
}

inline const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> cols = {
        "F1_in(pos)", "F1_out(pos)", "dF1(pos)", "F1_in(neg)", "F1_out(neg)",
        "dF1(neg)",   "F1_in(avg)",  "F1_out(avg)", "dF1(avg)"};
    return cols;
}

inline std::vector<double> summary_values(const MetricsRecord& m) {
    return {m.f1_in_pos, m.f1_out_pos, m.delta_pos, m.f1_in_neg, m.f1_out_neg,
            m.delta_neg, m.f1_in_avg,  m.f1_out_avg, m.delta_avg};
}

/// Row of a table-shaped summary: nine F1 columns (x100, 2 decimals) per strategy.
inline nlohmann::json summary_row(const RollingReport& r) {
    nlohmann::json row;
    row["model"] = r.model;
    row["strategy"] = r.strategy;
    row["periods"] = r.records.size();
    const auto values = summary_values(r.mean);
    for (std::size_t i = 0; i < values.size(); ++i)
        row[summary_columns()[i]] = std::round(values[i] * 10000.0) / 100.0;
    return row;
}

}  // namespace tshift
