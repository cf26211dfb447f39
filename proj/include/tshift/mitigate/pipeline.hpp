#pragma once

// Gated inference: the detector decides whether x_{t+1} is OOD for M_t; ID
// documents keep M_t's label, OOD documents take the AR ensemble's label.
// Only out-of-sample predictions pass through the gate.

#include <atomic>
#include <span>
#include <string>
#include <vector>

#include "tshift/eval/rolling.hpp"
#include "tshift/mitigate/ar.hpp"
#include "tshift/mitigate/detector.hpp"
#include "tshift/mitigate/ood_dataset.hpp"

namespace tshift {

struct MitigationPipeline {
    OodDetector detector;
    ArParams ar;
    double threshold = 0.5;
};

struct GatedPrediction {
    int label = 0;
    bool ood = false;
};

/// `history` = (M_t, M_{t-1}, ...), at least ar.order() long.
inline GatedPrediction mitigated_predict(const MitigationPipeline& pipeline,
                                         std::span<const ModelSnapshot* const> history, const Document& doc) {
    if (history.empty()) throw DataError("mitigated_predict needs at least M_t");
    const ModelSnapshot& current = *history.front();
    const auto x = current.features(doc);
    if (current.rep_dim() != pipeline.detector.input_dim())
        throw DataError("snapshot representation width does not match the detector");
    GatedPrediction g;
    g.ood = pipeline.detector.is_ood(current.representation(x), pipeline.threshold);
    g.label = g.ood ? ar_predict(pipeline.ar, history, doc).label : current.predict(x);
    return g;
}

struct MitigationOptions {
    std::size_t order = 3;              // p
    std::size_t window_months = 3;
    double threshold = 0.5;
    ArInput ar_input = ArInput::probability;
    std::size_t fit_end = 0;            // first evaluation period; 0 = half of the corpus
    DetectorTrainingOptions detector;
    std::string label = "NDOM";         // strategy name in the reports
};

struct MitigationResult {
    MitigationPipeline pipeline;
    DetectorTrainingResult detector_training;
    std::size_t ood_examples = 0;
    double ood_fraction = 0;            // share of OOD-labeled examples
    std::size_t fit_end = 0;
    RollingReport unmitigated;          // periods [fit_end, N-1)
    RollingReport mitigated;
    double flagged_fraction = 0;        // share of out-of-sample docs routed to the AR model
    double delta_reduction = 0;         // 1 - mitigated mean dF1(avg) / unmitigated
};

/// Fits the detector and AR model on periods [0, fit_end) and evaluates the
/// gated pipeline on [fit_end, N-1).
inline MitigationResult run_mitigation(std::span<const ModelSnapshot> snapshots, const TemporalCorpus& corpus,
                                       std::uint64_t seed, const MitigationOptions& opts = {},
                                       std::size_t workers = 1) {
    const std::size_t n = corpus.size();
    const std::size_t fit_end = opts.fit_end ? opts.fit_end : n / 2;
    if (snapshots.size() < n) throw DataError("mitigation needs one snapshot per period");
    if (fit_end <= opts.order || fit_end + 1 >= n)
        throw DataError("corpus too short for the mitigation split (fit_end " + std::to_string(fit_end) + ")");

    MitigationResult r;
    r.fit_end = fit_end;
    const auto examples = build_ood_dataset(
        snapshots, corpus, {.window_months = opts.window_months, .first_period = 0, .end_period = fit_end});
    r.ood_examples = examples.size();
    std::size_t n_ood = 0;
    for (const auto& e : examples) n_ood += e.ood_label;
    r.ood_fraction = static_cast<double>(n_ood) / static_cast<double>(examples.size());
    r.detector_training = train_detector(examples, seed, opts.detector);

    r.pipeline.detector = r.detector_training.detector;
    r.pipeline.ar = fit_ar(snapshots, corpus, opts.order, fit_end,
                           {.order = opts.order, .partition = Partition::validation, .input = opts.ar_input});
    r.pipeline.threshold = opts.threshold;

    const std::string model = to_string(snapshots.front().kind());
    const PeriodPredictor plain = [&](std::size_t t, const Document& d) { return snapshots[t].predict(d); };
    std::atomic<std::size_t> flagged{0}, total{0};
    const PeriodPredictor gated = [&](std::size_t t, const Document& d) {
        const auto h = history_at(snapshots, t, opts.order);
        const auto g = mitigated_predict(r.pipeline, h, d);
        flagged += g.ood;
        ++total;
        return g.label;
    };
    r.unmitigated = {opts.label, model, evaluate_periods(corpus, fit_end, n - 1, plain, plain, workers), {}};
    r.unmitigated.aggregate();
    r.mitigated = {opts.label + "+mitigation", model, evaluate_periods(corpus, fit_end, n - 1, plain, gated, workers), {}};
    r.mitigated.aggregate();
    r.flagged_fraction = total ? static_cast<double>(flagged) / static_cast<double>(total) : 0.0;
    r.delta_reduction = r.unmitigated.mean.delta_avg != 0
                            ? 1.0 - r.mitigated.mean.delta_avg / r.unmitigated.mean.delta_avg
                            : 0.0;
    return r;
}

}  // namespace tshift
