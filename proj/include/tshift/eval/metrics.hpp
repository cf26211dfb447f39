#pragma once

#include <span>
#include <vector>

#include "tshift/core/error.hpp"

namespace tshift {

/// F1 of the `target` class; 0 when precision + recall = 0.
inline double f1_per_class(std::span<const int> predictions, std::span<const int> gold, int target) {
    if (predictions.size() != gold.size())
        throw DataError("f1_per_class: prediction and gold lengths differ");
    if (gold.empty()) throw DataError("f1_per_class: empty input");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool p = predictions[i] == target;
        const bool g = gold[i] == target;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    // 2PR/(P+R) == 2TP/(2TP+FP+FN); zero exactly when TP == 0.
    if (tp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

struct ClassF1 {
    double pos = 0, neg = 0, avg = 0;
};

inline ClassF1 class_f1(std::span<const int> predictions, std::span<const int> gold) {
    ClassF1 f;
    f.pos = f1_per_class(predictions, gold, 1);
    f.neg = f1_per_class(predictions, gold, 0);
    f.avg = (f.pos + f.neg) / 2.0;
    return f;
}

/// In-sample / out-of-sample F1 for one period; fractions in [0,1].
struct MetricsRecord {
    int period = 0;
    double f1_in_pos = 0, f1_in_neg = 0, f1_in_avg = 0;
    double f1_out_pos = 0, f1_out_neg = 0, f1_out_avg = 0;
    double delta_pos = 0, delta_neg = 0, delta_avg = 0;

    static MetricsRecord from_f1(int period, const ClassF1& in, const ClassF1& out) {
        MetricsRecord r;
        r.period = period;
        r.f1_in_pos = in.pos;
        r.f1_in_neg = in.neg;
        r.f1_in_avg = in.avg;
        r.f1_out_pos = out.pos;
        r.f1_out_neg = out.neg;
        r.f1_out_avg = out.avg;
        r.delta_pos = in.pos - out.pos;
        r.delta_neg = in.neg - out.neg;
        r.delta_avg = in.avg - out.avg;
        return r;
    }

    static MetricsRecord compute(int period, std::span<const int> in_pred, std::span<const int> in_gold,
                                 std::span<const int> out_pred, std::span<const int> out_gold) {
        return from_f1(period, class_f1(in_pred, in_gold), class_f1(out_pred, out_gold));
    }

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

}  // namespace tshift
