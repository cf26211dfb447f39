#pragma once

// Autoregressive ensemble over past snapshots:
//   score(x_{t+1}) = sum_{k=0}^{p-1} alpha_k * M_{t-k}(x_{t+1}) + epsilon
// fitted by ordinary least squares of y_t on (M_{t-1}(x_t), ..., M_{t-p}(x_t)).

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "tshift/core/error.hpp"
#include "tshift/corpus.hpp"
#include "tshift/mitigate/ood_dataset.hpp"
#include "tshift/models/snapshot.hpp"

namespace tshift {

/// What M(x) means inside the regression.
enum class ArInput { probability, label };

struct ArParams {
    std::vector<double> coefficients;  // alpha_0 .. alpha_{p-1}; alpha_0 weighs the most recent model
    double intercept = 0;              // epsilon
    ArInput input = ArInput::probability;

    std::size_t order() const { return coefficients.size(); }

    nlohmann::json to_json() const {
        return {{"format", "tshift-ar"}, {"version", 1}, {"coefficients", coefficients},
                {"intercept", intercept}, {"input", input == ArInput::probability ? "probability" : "label"}};
    }
    static ArParams from_json(const nlohmann::json& j) {
        ArParams a;
        try {
            a.coefficients = j.at("coefficients").get<std::vector<double>>();
            a.intercept = j.at("intercept").get<double>();
            a.input = j.value("input", std::string("probability")) == "label" ? ArInput::label : ArInput::probability;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(0, std::string("malformed AR parameters: ") + e.what());
        }
        if (a.coefficients.empty()) throw ParseError(0, "AR order must be >= 1");
        return a;
    }
};

inline double model_input(const ModelSnapshot& m, const FeatureVector& x, ArInput input) {
    const double p = m.predict_proba(x);
    return input == ArInput::probability ? p : (p >= 0.5 ? 1.0 : 0.0);
}

/// Design matrix (without the intercept column) and targets for periods
/// [first, last): row = (M_{t-1}(x), .., M_{t-p}(x)) for each x in slice t.
struct ArDesign {
    std::vector<std::vector<double>> rows;
    std::vector<double> targets;
};

inline ArDesign ar_design(std::span<const ModelSnapshot> snapshots, const TemporalCorpus& corpus, std::size_t p,
                          std::size_t first, std::size_t last, Partition partition = Partition::validation,
                          ArInput input = ArInput::probability) {
    if (p < 1) throw ValidationError("ar.order", "must be >= 1");
    if (first < p) throw DataError("AR fit range must start at period >= p");
    if (last > corpus.size() || last > snapshots.size() || first >= last)
        throw DataError("AR fit range out of bounds");
    ArDesign d;
    for (std::size_t t = first; t < last; ++t) {
        for (const auto& doc : partition_of(corpus[t], partition)) {
            std::vector<double> row(p);
            for (std::size_t k = 0; k < p; ++k) {
                const auto& m = snapshots[t - 1 - k];
                row[k] = model_input(m, m.features(doc), input);
            }
            d.rows.push_back(std::move(row));
            d.targets.push_back(doc.label);
        }
    }
    return d;
}

enum class RankPolicy { reject, minimum_norm };

/// Least squares with an intercept. Returns (coefficients, intercept).
inline std::pair<std::vector<double>, double> least_squares_with_intercept(const ArDesign& d,
                                                                           RankPolicy policy = RankPolicy::reject) {
    if (d.rows.empty()) throw DataError("AR fit set is empty");
    const std::size_t n = d.rows.size(), p = d.rows.front().size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < p; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = d.rows[i][k];
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = 1.0;
        y(static_cast<Eigen::Index>(i)) = d.targets[i];
    }
    Eigen::VectorXd beta;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < static_cast<Eigen::Index>(p + 1)) {
        if (policy == RankPolicy::reject)
            throw DataError("AR design matrix is rank-deficient (rank " + std::to_string(qr.rank()) + " < " +
                            std::to_string(p + 1) + "); try a smaller order p");
        beta = x.completeOrthogonalDecomposition().solve(y);
    } else {
        beta = qr.solve(y);
    }
    std::vector<double> coef(p);
    for (std::size_t k = 0; k < p; ++k) coef[k] = beta(static_cast<Eigen::Index>(k));
    return {coef, beta(static_cast<Eigen::Index>(p))};
}

struct ArFitOptions {
    std::size_t order = 3;
    Partition partition = Partition::validation;
    ArInput input = ArInput::probability;
    RankPolicy rank_policy = RankPolicy::reject;
};

/// Fits on slices [first, last); first must be >= order.
inline ArParams fit_ar(std::span<const ModelSnapshot> snapshots, const TemporalCorpus& corpus, std::size_t first,
                       std::size_t last, const ArFitOptions& opts = {}) {
    const auto design = ar_design(snapshots, corpus, opts.order, first, last, opts.partition, opts.input);
    auto [coef, intercept] = least_squares_with_intercept(design, opts.rank_policy);
    return {std::move(coef), intercept, opts.input};
}

struct ArPrediction {
    double score = 0;  // unclamped
    int label = 0;     // 1 iff score >= 0.5
};

/// `history` = (M_t, M_{t-1}, .., M_{t-p+1}), most recent first.
inline ArPrediction ar_predict(const ArParams& ar, std::span<const ModelSnapshot* const> history,
                               const Document& doc) {
    if (history.size() < ar.order())
        throw DataError("ar_predict needs " + std::to_string(ar.order()) + " snapshots, got " +
                        std::to_string(history.size()));
    ArPrediction out;
    out.score = ar.intercept;
    for (std::size_t k = 0; k < ar.order(); ++k) {
        const auto& m = *history[k];
        out.score += ar.coefficients[k] * model_input(m, m.features(doc), ar.input);
    }
    out.label = out.score >= 0.5 ? 1 : 0;
    return out;
}

/// Most-recent-first history ending at period t.
inline std::vector<const ModelSnapshot*> history_at(std::span<const ModelSnapshot> snapshots, std::size_t t,
                                                    std::size_t p) {
    if (t + 1 < p) throw DataError("not enough snapshots before period " + std::to_string(t));
    std::vector<const ModelSnapshot*> h;
    for (std::size_t k = 0; k < p; ++k) h.push_back(&snapshots[t - k]);
    return h;
}

}  // namespace tshift
