#pragma once

// Two-layer OOD detector over a snapshot's pooled representation:
//   f(M, x) = W2 GELU(W1 rep + b1) + b2, two logits (ID, OOD).
// Only detector parameters are trained; snapshots are read-only inputs.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tshift/core/error.hpp"
#include "tshift/core/random.hpp"
#include "tshift/mitigate/ood_dataset.hpp"
#include "tshift/models/optimizer.hpp"
#include "tshift/models/snapshot.hpp"

namespace tshift {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

class OodDetector {
public:
    OodDetector() = default;
    OodDetector(std::size_t input_dim, std::size_t hidden_dim)
        : input_dim_(input_dim), hidden_dim_(hidden_dim), theta_(param_count(input_dim, hidden_dim), 0.0) {}

    static std::size_t param_count(std::size_t in, std::size_t hidden) { return hidden * in + hidden + 2 * hidden + 2; }

    std::size_t input_dim() const { return input_dim_; }
    std::size_t hidden_dim() const { return hidden_dim_; }
    std::span<double> parameters() { return theta_; }
    std::span<const double> parameters() const { return theta_; }

    // Layout: [W1 (H x In) | b1 (H) | W2 (2 x H) | b2 (2)]
    std::size_t w1_offset() const { return 0; }
    std::size_t b1_offset() const { return hidden_dim_ * input_dim_; }
    std::size_t w2_offset() const { return b1_offset() + hidden_dim_; }
    std::size_t b2_offset() const { return w2_offset() + 2 * hidden_dim_; }

    void init(Rng& rng) {
        const double a1 = std::sqrt(6.0 / static_cast<double>(input_dim_ + hidden_dim_));
        const double a2 = std::sqrt(6.0 / static_cast<double>(hidden_dim_ + 2));
        std::fill(theta_.begin(), theta_.end(), 0.0);
        for (std::size_t i = 0; i < hidden_dim_ * input_dim_; ++i) theta_[w1_offset() + i] = (2 * rng.uniform() - 1) * a1;
        for (std::size_t i = 0; i < 2 * hidden_dim_; ++i) theta_[w2_offset() + i] = (2 * rng.uniform() - 1) * a2;
    }

    struct Pass {
        std::vector<double> pre;     // W1 rep + b1
        std::vector<double> act;     // GELU(pre)
        double logits[2] = {0, 0};   // ID, OOD
    };

    void forward(std::span<const double> rep, Pass& p) const {
        if (rep.size() != input_dim_)
            throw DataError("representation width " + std::to_string(rep.size()) + " does not match detector input " +
                            std::to_string(input_dim_));
        p.pre.resize(hidden_dim_);
        p.act.resize(hidden_dim_);
        const double* w1 = theta_.data() + w1_offset();
        const double* b1 = theta_.data() + b1_offset();
        for (std::size_t h = 0; h < hidden_dim_; ++h) {
            double z = b1[h];
            const double* row = w1 + h * input_dim_;
            for (std::size_t k = 0; k < input_dim_; ++k) z += row[k] * rep[k];
            p.pre[h] = z;
            p.act[h] = gelu(z);
        }
        const double* w2 = theta_.data() + w2_offset();
        for (int c = 0; c < 2; ++c) {
            double z = theta_[b2_offset() + static_cast<std::size_t>(c)];
            for (std::size_t h = 0; h < hidden_dim_; ++h) z += w2[static_cast<std::size_t>(c) * hidden_dim_ + h] * p.act[h];
            p.logits[c] = z;
        }
    }

    /// Softmax probability of the OOD class.
    double ood_probability(std::span<const double> rep) const {
        Pass p;
        forward(rep, p);
        return sigmoid(p.logits[1] - p.logits[0]);
    }

    /// OOD iff P(OOD) > threshold. threshold <= 0 flags everything, >= 1 nothing.
    bool is_ood(std::span<const double> rep, double threshold = 0.5) const {
        if (threshold <= 0) {
            if (rep.size() != input_dim_) ood_probability(rep);  // width check
            return true;
        }
        if (threshold >= 1) {
            if (rep.size() != input_dim_) ood_probability(rep);
            return false;
        }
        return ood_probability(rep) > threshold;
    }

    /// Weighted mean cross-entropy over examples; overwrites `grad`.
    double loss_and_gradient(std::span<const OodExample* const> batch, const double class_weight[2],
                             std::span<double> grad) const {
        std::fill(grad.begin(), grad.end(), 0.0);
        Pass p;
        double loss = 0, weight_sum = 0;
        for (const auto* ex : batch) weight_sum += class_weight[ex->ood_label];
        const double* w2 = theta_.data() + w2_offset();
        std::vector<double> dact(hidden_dim_);
        for (const auto* ex : batch) {
            forward(ex->representation, p);
            const double w = class_weight[ex->ood_label] / weight_sum;
            const double m = std::max(p.logits[0], p.logits[1]);
            const double lse = m + std::log(std::exp(p.logits[0] - m) + std::exp(p.logits[1] - m));
            loss += w * (lse - p.logits[ex->ood_label]);
            double dlogit[2];
            for (int c = 0; c < 2; ++c)
                dlogit[c] = w * (std::exp(p.logits[c] - lse) - (c == ex->ood_label ? 1.0 : 0.0));
            std::fill(dact.begin(), dact.end(), 0.0);
            for (int c = 0; c < 2; ++c) {
                const auto cu = static_cast<std::size_t>(c);
                grad[b2_offset() + cu] += dlogit[c];
                for (std::size_t h = 0; h < hidden_dim_; ++h) {
                    grad[w2_offset() + cu * hidden_dim_ + h] += dlogit[c] * p.act[h];
                    dact[h] += dlogit[c] * w2[cu * hidden_dim_ + h];
                }
            }
            for (std::size_t h = 0; h < hidden_dim_; ++h) {
                const double dpre = dact[h] * gelu_derivative(p.pre[h]);
                grad[b1_offset() + h] += dpre;
                double* g = grad.data() + w1_offset() + h * input_dim_;
                for (std::size_t k = 0; k < input_dim_; ++k) g[k] += dpre * ex->representation[k];
            }
        }
        return loss;
    }

    nlohmann::json to_json() const {
        return {{"format", "tshift-ood-detector"}, {"version", 1}, {"input_dim", input_dim_},
                {"hidden_dim", hidden_dim_}, {"parameters", theta_}};
    }

    static OodDetector from_json(const nlohmann::json& j) {
        try {
            OodDetector d(j.at("input_dim").get<std::size_t>(), j.at("hidden_dim").get<std::size_t>());
            auto theta = j.at("parameters").get<std::vector<double>>();
            if (theta.size() != d.theta_.size()) throw ParseError(0, "detector parameter count mismatch");
            d.theta_ = std::move(theta);
            return d;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(0, std::string("malformed detector: ") + e.what());
        }
    }

private:
    std::size_t input_dim_ = 0;
    std::size_t hidden_dim_ = 0;
    std::vector<double> theta_;
};

/// Detector decision for document x against snapshot M_t.
inline bool detect(const OodDetector& detector, const ModelSnapshot& snapshot, const Document& doc,
                   double threshold = 0.5) {
    if (snapshot.rep_dim() != detector.input_dim())
        throw DataError("snapshot representation width " + std::to_string(snapshot.rep_dim()) +
                        " does not match detector input " + std::to_string(detector.input_dim()));
    return detector.is_ood(snapshot.representation(doc), threshold);
}

struct BinaryReport {
    double precision_ood = 0, recall_ood = 0, f1_ood = 0;
    double precision_id = 0, recall_id = 0, f1_id = 0;
    double accuracy = 0;
    std::size_t support_ood = 0, support_id = 0;
    std::size_t predicted_ood = 0;
};

inline BinaryReport score_detector(const OodDetector& d, std::span<const OodExample* const> examples,
                                   double threshold = 0.5) {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto* ex : examples) {
        const bool pred = d.is_ood(ex->representation, threshold);
        const bool gold = ex->ood_label == kOutOfDistribution;
        tp += pred && gold;
        fp += pred && !gold;
        fn += !pred && gold;
        tn += !pred && !gold;
    }
    auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
    auto f1 = [](double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; };
    BinaryReport r;
    r.precision_ood = ratio(tp, tp + fp);
    r.recall_ood = ratio(tp, tp + fn);
    r.f1_ood = f1(r.precision_ood, r.recall_ood);
    r.precision_id = ratio(tn, tn + fn);
    r.recall_id = ratio(tn, tn + fp);
    r.f1_id = f1(r.precision_id, r.recall_id);
    r.accuracy = ratio(tp + tn, examples.size());
    r.support_ood = tp + fn;
    r.support_id = tn + fp;
    r.predicted_ood = tp + fp;
    return r;
}

struct DetectorTrainingOptions {
    std::vector<double> learning_rates{2e-3, 2e-4, 2e-5};
    std::vector<std::size_t> batch_sizes{32, 64};
    std::size_t hidden_dim = 64;
    std::size_t epochs = 20;
    double weight_decay = 0.01;
    bool balance_classes = true;       // inverse-frequency class weights in the loss
    double validation_fraction = 0.15;
    double test_fraction = 0.15;
    double threshold = 0.5;
};

struct GridCell {
    double learning_rate = 0;
    std::size_t batch_size = 0;
    BinaryReport validation;
    bool eligible = true;
};

struct DetectorTrainingResult {
    OodDetector detector;
    std::vector<GridCell> grid;
    std::size_t selected = 0;
    BinaryReport test;  // held-out split, never used for fitting or selection
    std::size_t n_train = 0, n_validation = 0, n_test = 0;
};

/// Shuffles the examples into train / validation / test, trains one detector
/// per grid cell with AdamW, and keeps the cell with the best validation
/// OOD recall (ties: validation accuracy). Cells whose validation predictions
/// are all one class are skipped unless every cell is.
inline DetectorTrainingResult train_detector(std::span<const OodExample> examples, std::uint64_t seed,
                                             const DetectorTrainingOptions& opts = {}) {
    if (examples.empty()) throw DataError("train_detector: no examples");
    const std::size_t dim = examples.front().representation.size();
    std::size_t n_ood = 0;
    for (const auto& ex : examples) {
        if (ex.representation.size() != dim) throw DataError("train_detector: inconsistent representation widths");
        n_ood += ex.ood_label == kOutOfDistribution;
    }
    if (n_ood == 0 || n_ood == examples.size()) throw DataError("train_detector: examples contain a single OOD label");
    if (opts.learning_rates.empty() || opts.batch_sizes.empty()) throw ValidationError("detector.grid", "empty grid");

    std::vector<const OodExample*> all;
    for (const auto& ex : examples) all.push_back(&ex);
    Rng split_rng(derive_seed(seed, 0x73706c74ULL));
    split_rng.shuffle(std::span<const OodExample*>(all));
    const auto n = all.size();
    const auto n_val = static_cast<std::size_t>(std::llround(opts.validation_fraction * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(opts.test_fraction * static_cast<double>(n)));
    if (n_val + n_test >= n) throw DataError("train_detector: too few examples to split");
    const std::span<const OodExample* const> train(all.data(), n - n_val - n_test);
    const std::span<const OodExample* const> val(all.data() + train.size(), n_val);
    const std::span<const OodExample* const> test(all.data() + train.size() + n_val, n_test);

    double class_weight[2] = {1.0, 1.0};
    if (opts.balance_classes) {
        std::size_t c[2] = {0, 0};
        for (const auto* ex : train) ++c[ex->ood_label];
        for (int k = 0; k < 2; ++k)
            class_weight[k] = c[k] ? static_cast<double>(train.size()) / (2.0 * static_cast<double>(c[k])) : 1.0;
    }

    DetectorTrainingResult result;
    result.n_train = train.size();
    result.n_validation = val.size();
    result.n_test = test.size();
    std::vector<OodDetector> trained;
    std::size_t cell_index = 0;
    for (double lr : opts.learning_rates) {
        for (std::size_t bs : opts.batch_sizes) {
            OodDetector d(dim, opts.hidden_dim);
            Rng init_rng(derive_seed(seed, 0x696e6974ULL));
            d.init(init_rng);
            Optimizer opt(d.parameters().size(), {.learning_rate = lr, .adam = true,
                                                  .decoupled_weight_decay = opts.weight_decay});
            std::vector<const OodExample*> order(train.begin(), train.end());
            Rng order_rng(derive_seed(seed, 0x6f72640000ULL + cell_index));
            std::vector<double> grad(d.parameters().size());
            for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
                order_rng.shuffle(std::span<const OodExample*>(order));
                for (std::size_t b = 0; b < order.size(); b += bs) {
                    const std::span<const OodExample* const> batch(order.data() + b, std::min(bs, order.size() - b));
                    d.loss_and_gradient(batch, class_weight, grad);
                    opt.step(d.parameters(), grad);
                }
            }
            GridCell cell{lr, bs, score_detector(d, val, opts.threshold)};
            cell.eligible = cell.validation.predicted_ood > 0 && cell.validation.predicted_ood < val.size();
            result.grid.push_back(cell);
            trained.push_back(std::move(d));
            ++cell_index;
        }
    }
    const bool any_eligible =
        std::any_of(result.grid.begin(), result.grid.end(), [](const GridCell& c) { return c.eligible; });
    std::size_t best = result.grid.size();
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
        const auto& c = result.grid[i];
        if (any_eligible && !c.eligible) continue;
        if (best == result.grid.size()) {
            best = i;
            continue;
        }
        const auto& b = result.grid[best].validation;
        if (c.validation.recall_ood > b.recall_ood ||
            (c.validation.recall_ood == b.recall_ood && c.validation.accuracy > b.accuracy))
            best = i;
    }
    result.selected = best;
    result.detector = std::move(trained[best]);
    result.test = score_detector(result.detector, test, opts.threshold);
    return result;
}

}  // namespace tshift
