// Acceptance run over the pinned synthetic benchmark. Prints one PASS/FAIL
// line per criterion and exits non-zero if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tshift/core/random.hpp"
#include "tshift/experiment.hpp"

using namespace tshift;

namespace {

/// Collects sub-check results for one criterion.
class Criterion {
public:
    void check(bool ok, const std::string& what) {
        if (!ok) failures_.push_back(what);
        ++checks_;
    }
    void note(const std::string& s) { notes_.push_back(s); }
    bool ok() const { return failures_.empty(); }

    std::string summary() const {
        auto join = [](const std::vector<std::string>& xs) {
            std::string out;
            for (const auto& x : xs) out += (out.empty() ? "" : "; ") + x;
            return out;
        };
        std::string s = ok() ? std::to_string(checks_) + " checks" : "failed: " + join(failures_);
        if (!notes_.empty()) s += " | " + join(notes_);
        return s;
    }

private:
    std::size_t checks_ = 0;
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Shared benchmark state

struct KindRun {
    ModelKind kind;
    TrainConfig config;
    std::vector<ModelSnapshot> ndom;
    std::map<StrategyKind, RollingReport> reports;
    std::optional<MitigationResult> mitigation;
    std::string snapshot_bytes_before, snapshot_bytes_after;
};

struct Benchmark {
    synth::GeneratorConfig gen;
    TemporalCorpus corpus;
    std::vector<KindRun> runs;
    DriftReport drift;
};

std::string serialize(const std::vector<ModelSnapshot>& snaps) {
    std::string s;
    for (const auto& m : snaps) s += snapshot_to_json(m).dump() + "\n";
    return s;
}

Benchmark build_benchmark() {
    Benchmark b;
    b.gen = synth::benchmark_config();
    const auto seed = b.gen.seed;
    b.corpus = make_corpus(synth::generate_documents(b.gen).documents, {}, seed);
    for (auto kind : {ModelKind::logreg, ModelKind::mlp}) {
        KindRun r;
        r.kind = kind;
        r.config = synth::benchmark_train_config(kind);
        r.config.seed = seed;
        for (auto s : {StrategyKind::odnm, StrategyKind::ndnm, StrategyKind::ndom}) {
            auto snaps = run_strategy(b.corpus, s, kind, r.config);
            r.reports[s] = rolling_evaluate(snaps, b.corpus, 1, to_string(s), to_string(kind));
            if (s == StrategyKind::ndom) r.ndom = std::move(snaps);
        }
        r.snapshot_bytes_before = serialize(r.ndom);
        MitigationOptions opts;
        opts.label = "NDOM";
        r.mitigation = run_mitigation(r.ndom, b.corpus, derive_seed(seed, 0x6d697469ULL), opts);
        r.snapshot_bytes_after = serialize(r.ndom);
        b.runs.push_back(std::move(r));
    }
    b.drift = drift_series(b.corpus, b.runs.front().config.min_frequency, 0.5);
    return b;
}

// ---------------------------------------------------------------------------
// Criteria

Criterion metric_oracle() {
    Criterion c;
    Rng rng(20240601);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(80);
        std::array<std::vector<int>, 4> v;
        for (auto& x : v) {
            x.resize(n);
            for (auto& y : x) y = static_cast<int>(rng.below(2));
        }
        const auto m = MetricsRecord::compute(trial, v[0], v[1], v[2], v[3]);
        const double ip = oracle::f1(v[0], v[1], 1), in = oracle::f1(v[0], v[1], 0);
        const double op = oracle::f1(v[2], v[3], 1), on = oracle::f1(v[2], v[3], 0);
        const std::array<std::pair<double, double>, 7> pairs{{{m.f1_in_pos, ip},
                                                              {m.f1_in_neg, in},
                                                              {m.f1_out_pos, op},
                                                              {m.f1_out_neg, on},
                                                              {m.delta_pos, ip - op},
                                                              {m.delta_neg, in - on},
                                                              {m.delta_avg, (ip + in) / 2 - (op + on) / 2}}};
        for (const auto& [got, want] : pairs)
            if (std::abs(got - want) > 1e-12) ++mismatches;
    }
    c.check(mismatches == 0, std::to_string(mismatches) + " values off by more than 1e-12");
    c.note("1000 random sets");
    return c;
}

Criterion drift_metric(const Benchmark& b) {
    Criterion c;
    const auto& month = b.corpus[0].all();
    const auto v = shared_vocabulary(month, month, 5);
    c.check(weighted_drift(token_stats(month, v), token_stats(month, v)) == 0.0, "identical months drift != 0");

    std::vector<std::size_t> order(month.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(5);
    rng.shuffle(std::span<std::size_t>(order));
    double previous = -1;
    std::string series;
    for (double rate : {0.0, 0.1, 0.2, 0.3}) {
        auto copy = month;
        const auto flips = static_cast<std::size_t>(rate * static_cast<double>(month.size()));
        for (std::size_t k = 0; k < flips; ++k) copy[order[k]].label = 1 - copy[order[k]].label;
        const double d = weighted_drift(token_stats(month, v), token_stats(copy, v));
        c.check(d > previous, "drift not increasing at flip rate " + fmt("%.1f", rate));
        previous = d;
        series += (series.empty() ? "" : ",") + fmt("%.4f", d);
    }
    c.note("flip series " + series);

    const auto one = std::make_shared<const Vocabulary>(std::vector<std::string>{"v"});
    auto d = [](const char* text, int label) {
        Document x;
        x.text = text;
        x.label = label;
        return x;
    };
    const auto a = token_stats(std::vector<Document>{d("v", 1), d("v", 0)}, one);
    const auto bb = token_stats(std::vector<Document>(4, d("v", 1)), one);
    const double hand = weighted_drift(a, bb);
    c.check(std::abs(hand - 0.5108) <= 1e-4, "hand case " + fmt("%.6f", hand));
    c.check(std::abs(hand - oracle::bernoulli_kl(0.5, 0.9)) < 1e-12, "hand case differs from the KL oracle");
    c.note("hand case " + fmt("%.4f nats", hand));
    return c;
}

Criterion orderings(const Benchmark& b) {
    Criterion c;
    for (const auto& r : b.runs) {
        const std::string k = to_string(r.kind);
        const auto& odnm = r.reports.at(StrategyKind::odnm).mean;
        const auto& ndnm = r.reports.at(StrategyKind::ndnm).mean;
        const auto& ndom = r.reports.at(StrategyKind::ndom).mean;
        for (const auto& [name, m] : {std::pair{"ODNM", &odnm}, {"NDNM", &ndnm}, {"NDOM", &ndom}}) {
            c.check(m->delta_avg > 0, k + " " + name + " mean dF1 not positive");
            c.check(m->delta_neg > m->delta_pos, k + " " + name + " negative-class dF1 not above positive-class");
        }
        c.check(odnm.delta_avg < ndnm.delta_avg, k + " ODNM dF1 not below NDNM");
        c.check(ndom.f1_in_avg > odnm.f1_in_avg && ndom.f1_in_avg > ndnm.f1_in_avg,
                k + " NDOM in-sample F1 not the maximum");
        c.note(k + " dF1 ODNM/NDNM/NDOM " + fmt("%.2f", 100 * odnm.delta_avg) + "/" +
               fmt("%.2f", 100 * ndnm.delta_avg) + "/" + fmt("%.2f", 100 * ndom.delta_avg));
    }
    c.note("positivity " + fmt("%.3f", [&] {
               std::vector<Document> all;
               for (const auto& s : b.corpus.slices()) {
                   auto x = s.all();
                   all.insert(all.end(), x.begin(), x.end());
               }
               return sentiment_positivity(all);
           }()));
    return c;
}

Criterion drift_correlation(const Benchmark& b) {
    Criterion c;
    for (const auto& r : b.runs) {
        const auto corr = drift_vs_degradation(r.reports.at(StrategyKind::ndom), b.drift);
        c.note(to_string(r.kind) + "/NDOM rho " + fmt("%.3f", corr.rho) + " p " + fmt("%.4f", corr.p_value));
        if (r.kind == ModelKind::mlp) {
            c.check(corr.rho > 0, "MLP/NDOM rho not positive");
            c.check(corr.p_value < 0.1, "MLP/NDOM p >= 0.1");
        }
    }
    return c;
}

Criterion ood_machinery(const Benchmark& b) {
    Criterion c;
    for (int past : {0, 1})
        for (int now : {0, 1})
            for (int gold : {0, 1}) {
                const std::optional<int> want =
                    now != gold ? std::nullopt : std::optional<int>(past == gold ? 0 : 1);
                c.check(ood_label(past, now, gold) == want, "truth table row " + std::to_string(past) +
                                                                std::to_string(now) + std::to_string(gold));
            }

    // Dataset builder against direct evaluation on real snapshots.
    const auto& snaps = b.runs.front().ndom;
    const auto built = build_ood_dataset(snaps, b.corpus, {.window_months = 2, .first_period = 0, .end_period = 5});
    std::vector<std::tuple<int, int, int>> got, want;
    for (const auto& e : built) got.emplace_back(e.source_period, e.target_period, e.ood_label);
    for (int j = 1; j < 5; ++j)
        for (int i = std::max(0, j - 2); i < j; ++i)
            for (const auto& x : b.corpus[static_cast<std::size_t>(j)].validation)
                if (const auto l = ood_label(snaps[i].predict(x), snaps[j].predict(x), x.label))
                    want.emplace_back(i, j, *l);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    c.check(got == want, "OOD dataset differs from direct evaluation");

    for (const auto& r : b.runs) {
        const auto& t = r.mitigation->detector_training;
        c.check(t.test.recall_ood >= 0.75, to_string(r.kind) + " detector OOD recall " + fmt("%.3f", t.test.recall_ood));
        c.check(r.snapshot_bytes_before == r.snapshot_bytes_after, to_string(r.kind) + " snapshot bytes changed");
        c.note(to_string(r.kind) + " recall " + fmt("%.3f", t.test.recall_ood) + " on " +
               std::to_string(t.n_test) + " held-out");
    }
    return c;
}

Criterion ar_model(const Benchmark& b) {
    Criterion c;
    const std::size_t half = b.corpus.size() / 2;
    double worst = 0;
    for (const auto& r : b.runs) {
        for (std::size_t p : {1u, 2u, 3u}) {
            const auto fitted = fit_ar(r.ndom, b.corpus, p, half, {.order = p});
            const auto design = ar_design(r.ndom, b.corpus, p, p, half);
            const auto [coef, intercept] = oracle::normal_equations(design.rows, design.targets);
            std::vector<double> x = fitted.coefficients, y = coef;
            x.push_back(fitted.intercept);
            y.push_back(intercept);
            const double err = oracle::relative_error(x, y);
            worst = std::max(worst, err);
            c.check(err <= 1e-8, to_string(r.kind) + " p=" + std::to_string(p) + " off by " + fmt("%.2e", err));
        }
        const ArParams identity{{1.0}, 0.0, ArInput::probability};
        std::size_t diffs = 0;
        for (std::size_t t = 0; t < b.corpus.size(); ++t) {
            const auto h = history_at(r.ndom, t, 1);
            for (const auto& d : b.corpus[t].test)
                if (ar_predict(identity, h, d).score != r.ndom[t].predict_proba(d)) ++diffs;
        }
        c.check(diffs == 0, to_string(r.kind) + " identity AR differs on " + std::to_string(diffs) + " docs");
    }
    c.note("max relative error " + fmt("%.2e", worst));
    return c;
}

Criterion mitigation(const Benchmark& b) {
    Criterion c;
    for (const auto& r : b.runs) {
        const auto& m = *r.mitigation;
        const std::string k = to_string(r.kind);
        c.check(m.delta_reduction >= 0.2, k + " reduction " + fmt("%.3f", m.delta_reduction));
        c.check(m.mitigated.mean.f1_out_avg >= m.unmitigated.mean.f1_out_avg, k + " out-of-sample F1 dropped");
        bool identical = m.mitigated.records.size() == m.unmitigated.records.size();
        for (std::size_t i = 0; identical && i < m.mitigated.records.size(); ++i) {
            const auto& x = m.mitigated.records[i];
            const auto& y = m.unmitigated.records[i];
            identical = std::memcmp(&x.f1_in_pos, &y.f1_in_pos, sizeof(double)) == 0 &&
                        std::memcmp(&x.f1_in_neg, &y.f1_in_neg, sizeof(double)) == 0;
        }
        c.check(identical, k + " in-sample F1 changed");
        c.note(k + " reduction " + fmt("%.1f%%", 100 * m.delta_reduction) + " (dF1 " +
               fmt("%.2f", 100 * m.unmitigated.mean.delta_avg) + " -> " +
               fmt("%.2f", 100 * m.mitigated.mean.delta_avg) + ")");
    }
    return c;
}

Criterion baselines(const Benchmark& b) {
    Criterion c;
    const auto& r = b.runs.front();  // logistic regression
    const std::size_t half = b.corpus.size() / 2;
    const auto first = b.corpus.subrange(0, half);
    const auto second = b.corpus.subrange(half, b.corpus.size());
    const std::span<const ModelSnapshot> first_snaps(r.ndom.data(), half);

    // STM: no selected token survives into any feature vector.
    const auto stm = stm_identify(first, first_snaps);
    const auto spurious = stm.selected_set();
    const auto masked = second.transformed([&](Document& d) { d = mask_tokens(d, spurious); });
    const auto masked_snaps = run_strategy(masked, StrategyKind::ndom, r.kind, r.config);
    std::size_t leaks = 0;
    for (std::size_t t = 0; t < masked.size(); ++t) {
        const auto& m = masked_snaps[t];
        for (const auto& tok : spurious)
            if (m.vocab().index_of(tok)) ++leaks;
        for (const auto& d : masked[t].all()) {
            for (const auto& tok : tokenize(d.text)) leaks += spurious.contains(tok);
            for (const auto& e : m.features(d).entries) leaks += spurious.contains(m.vocab().token(e.index));
        }
    }
    c.check(!spurious.empty(), "STM selected nothing");
    c.check(leaks == 0, "masked tokens leaked " + std::to_string(leaks) + " times");
    c.note("STM masked " + std::to_string(spurious.size()));

    // CDA: augmentation counts and flips against a direct count.
    const AntonymLexicon lexicon(synth::antonym_lexicon(b.gen.vocab));
    const auto& mlp = b.runs.back();
    // After 18 warm-started months the representations crowd together; a tighter threshold keeps a minority causal.
    CdaOptions cda_opts;
    cda_opts.sim_threshold = 0.999;
    const auto causal = cda_identify(first, std::span<const ModelSnapshot>(mlp.ndom.data(), half), cda_opts);
    c.note("CDA causal " + std::to_string(causal.causal.size()) + "/" + std::to_string(causal.candidates.size()));
    std::vector<std::string> covered;
    for (const auto& w : causal.causal)
        if (lexicon.find(w)) covered.push_back(w);
    c.check(!covered.empty(), "no causal token is covered by the lexicon");
    if (covered.empty()) return c;
    const TokenSet cover(covered.begin(), covered.end());
    const auto aug = cda_augment(second, causal.causal, lexicon);
    std::size_t direct = 0, bad_flips = 0;
    for (std::size_t t = 0; t < second.size(); ++t) {
        const auto& orig = second[t].train;
        std::size_t here = 0;
        for (const auto& d : orig) {
            const auto toks = tokenize(d.text);
            if (std::none_of(toks.begin(), toks.end(), [&](auto& x) { return cover.contains(x); })) continue;
            const auto& extra = aug.corpus[t].train[orig.size() + here];
            bad_flips += extra.label != 1 - d.label;
            auto expected = toks;
            for (auto& x : expected)
                if (cover.contains(x)) x = *lexicon.find(x);
            bad_flips += tokenize(extra.text) != expected;
            ++here;
        }
        direct += here;
        c.check(aug.corpus[t].train.size() == orig.size() + here, "train size mismatch in month " + std::to_string(t));
        c.check(aug.corpus[t].test == second[t].test && aug.corpus[t].validation == second[t].validation,
                "held-out partitions changed");
    }
    c.check(aug.augmented == direct, "augmented " + std::to_string(aug.augmented) + " vs direct " +
                                         std::to_string(direct));
    c.check(bad_flips == 0, std::to_string(bad_flips) + " counterfactuals disagree with the direct edit");

    for (const auto& run : b.runs) {
        const auto report = cda_augment_and_run(second, causal.causal, lexicon, run.kind, run.config);
        const auto& m = report.mean;
        c.check(m.f1_out_pos > 0 && m.f1_out_neg > 0 && m.f1_in_pos > 0 && m.f1_in_neg > 0,
                to_string(run.kind) + " CDA-NDOM has a zero-F1 class");
        c.note(to_string(run.kind) + " CDA-NDOM out-of-sample F1 pos/neg " + fmt("%.3f", m.f1_out_pos) + "/" +
               fmt("%.3f", m.f1_out_neg));
    }
    c.note("CDA augmented " + std::to_string(aug.augmented));
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Criterion determinism() {
    Criterion c;
    const auto root = fixture::temp_dir("acceptance_determinism");
    auto make = [&](const std::string& name) {
        nlohmann::json j = {
            {"seed", 11},
            {"corpus", {{"synth", {{"benchmark", true}, {"months", 8}, {"docs_per_month", 400}}}}},
            {"mitigation", {{"enabled", true}}},
            {"baselines", {{"stm", {{"enabled", true}}}, {"cda", {{"enabled", true}}}}},
            {"output_dir", (root / name).string()}};
        return experiment_config_from_json(j);
    };
    const auto a = run_experiment(make("a"));
    const auto b = run_experiment(make("b"));
    c.check(a.ok(), "first run failed");
    c.check(b.ok(), "second run failed");
    std::size_t csvs = 0;
    for (const auto& f : a.files) {
        if (!f.path.ends_with(".csv")) continue;
        ++csvs;
        c.check(slurp(root / "a" / f.path) == slurp(root / "b" / f.path), f.path + " differs");
    }
    c.check(csvs >= 7, "only " + std::to_string(csvs) + " CSV files written");
    c.note(std::to_string(csvs) + " CSV files compared");
    std::filesystem::remove_all(root);
    return c;
}

}  // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, std::function<Criterion()>>> criteria;
    std::optional<Benchmark> bench;
    auto shared = [&]() -> const Benchmark& {
        if (!bench) bench = build_benchmark();
        return *bench;
    };
    criteria.emplace_back("metric oracle", [] { return metric_oracle(); });
    criteria.emplace_back("drift metric", [&] { return drift_metric(shared()); });
    criteria.emplace_back("degradation orderings", [&] { return orderings(shared()); });
    criteria.emplace_back("drift-degradation correlation", [&] { return drift_correlation(shared()); });
    criteria.emplace_back("OOD machinery", [&] { return ood_machinery(shared()); });
    criteria.emplace_back("AR model", [&] { return ar_model(shared()); });
    criteria.emplace_back("mitigation efficacy", [&] { return mitigation(shared()); });
    criteria.emplace_back("baselines", [&] { return baselines(shared()); });
    criteria.emplace_back("determinism", [] { return determinism(); });

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Criterion c;
        try {
            c = criteria[i].second();
        } catch (const std::exception& e) {
            c.check(false, std::string("exception: ") + e.what());
        }
        failed += !c.ok();
        std::printf("%s [%zu] %s: %s\n", c.ok() ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    c.summary().c_str());
        std::fflush(stdout);
    }
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%d of %zu criteria failed (%.0f s)\n", failed, criteria.size(), secs);
    return failed ? 1 : 0;
}
