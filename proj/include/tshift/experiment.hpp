#pragma once

// Experiment orchestration: config parsing, the fixed stage sequence
// (corpus, drift, strategies, mitigation, baselines, llm) and report
// emission with a hashed run manifest.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tshift/baselines/cda.hpp"
#include "tshift/baselines/stm.hpp"
#include "tshift/core/hash.hpp"
#include "tshift/core/json_fields.hpp"
#include "tshift/corpus.hpp"
#include "tshift/drift.hpp"
#include "tshift/eval/llm_eval.hpp"
#include "tshift/eval/rolling.hpp"
#include "tshift/mitigate/pipeline.hpp"
#include "tshift/models/persist.hpp"
#include "tshift/models/strategy.hpp"
#include "tshift/synthgen.hpp"

namespace tshift {

inline constexpr const char* kToolVersion = "0.1.0";

struct MitigationConfig {
    bool enabled = false;
    MitigationOptions options;
};

struct BaselineConfig {
    bool stm = false;
    bool cda = false;
    StmOptions stm_options;
    CdaOptions cda_options;
    std::string lexicon_path;  // empty: the generator's own lexicon (synthetic corpora only)
};

struct LlmStageConfig {
    llm::ClientConfig client;
    llm::RollingOptions rolling;
};

struct ExperimentConfig {
    std::optional<std::string> corpus_path;
    std::optional<synth::GeneratorConfig> synth;
    SplitRatio split;
    ModelKind model = ModelKind::logreg;
    std::vector<StrategyKind> strategies{StrategyKind::odnm, StrategyKind::ndnm, StrategyKind::ndom};
    TrainConfig train;
    MitigationConfig mitigation;
    BaselineConfig baselines;
    std::optional<LlmStageConfig> llm;
    bool upsample = false;
    std::size_t top_features = 20;
    bool save_snapshots = false;
    std::string output_dir = "out";
    std::size_t workers = 1;
    std::uint64_t seed = 0;
    bool synth_seed_explicit = false;  // the generator spec carried its own seed

    /// Reseeds the run; the generator follows unless its spec pinned a seed.
    void set_seed(std::uint64_t s) {
        seed = s;
        train.seed = s;
        if (synth && !synth_seed_explicit) synth->seed = s;
    }

    void validate() const {
        if (corpus_path.has_value() == synth.has_value())
            throw ValidationError("corpus", "exactly one of corpus.path and corpus.synth is required");
        split.validate();
        if (model == ModelKind::remote_llm) {
            if (!llm) throw ValidationError("llm", "is required for model remote-llm");
            if (mitigation.enabled) throw ValidationError("mitigation.enabled", "needs a trainable model");
            if (baselines.stm || baselines.cda) throw ValidationError("baselines", "need a trainable model");
        } else {
            if (strategies.empty()) throw ValidationError("strategies", "must name at least one strategy");
            train.validate();
        }
        if (mitigation.enabled) {
            const auto& m = mitigation.options;
            if (m.order < 1) throw ValidationError("mitigation.p", "must be >= 1");
            if (m.window_months < 1) throw ValidationError("mitigation.window", "must be >= 1");
            if (!(m.threshold >= 0.0 && m.threshold <= 1.0))
                throw ValidationError("mitigation.threshold", "must lie in [0, 1]");
            if (m.detector.learning_rates.empty() || m.detector.batch_sizes.empty())
                throw ValidationError("mitigation.detector", "grid must be non-empty");
        }
        if (baselines.cda && baselines.lexicon_path.empty() && !synth)
            throw ValidationError("baselines.cda.lexicon", "is required for corpora not produced by the generator");
        if (!(baselines.cda_options.sim_threshold >= -1.0 && baselines.cda_options.sim_threshold <= 1.0))
            throw ValidationError("baselines.cda.sim_threshold", "must lie in [-1, 1]");
        if (output_dir.empty()) throw ValidationError("output_dir", "must be non-empty");
        if (workers < 1) throw ValidationError("workers", "must be >= 1");
    }
};

namespace detail {

inline OptimizerKind parse_optimizer(const std::string& s, const std::string& field) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ValidationError(field, "unknown optimizer '" + s + "'");
}

inline ArInput parse_ar_input(const std::string& s, const std::string& field) {
    if (s == "probability") return ArInput::probability;
    if (s == "label") return ArInput::label;
    throw ValidationError(field, "expected \"probability\" or \"label\"");
}

inline std::vector<StrategyKind> parse_strategy_list(const std::vector<std::string>& names) {
    std::vector<StrategyKind> out;
    for (const auto& n : names) {
        const auto s = parse_strategy(n);
        if (std::find(out.begin(), out.end(), s) != out.end())
            throw ValidationError("strategies", "duplicate strategy '" + n + "'");
        out.push_back(s);
    }
    return out;
}

}  // namespace detail

/// Strategy names such as "odnm,ndnm,ndom".
inline std::vector<StrategyKind> parse_strategy_csv(const std::string& csv) {
    std::vector<std::string> names;
    std::stringstream ss(csv);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) names.push_back(item);
    return detail::parse_strategy_list(names);
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    FieldReader r(j, "");
    ExperimentConfig c;
    c.seed = r.require<std::uint64_t>("seed");

    const auto* corpus = r.child("corpus");
    if (!corpus) throw ValidationError("corpus", "is required");
    {
        FieldReader cr(*corpus, "corpus");
        if (const auto* p = cr.child("path")) {
            if (!p->is_string()) throw ValidationError("corpus.path", "has the wrong type");
            c.corpus_path = p->get<std::string>();
        }
        if (const auto* s = cr.child("synth")) {
            c.synth = synth::generator_config_from_json(*s, "corpus.synth.");
            c.synth_seed_explicit = s->contains("seed");
            if (!c.synth_seed_explicit) c.synth->seed = c.seed;
        }
        cr.finish();
    }
    if (const auto* s = r.child("split")) {
        FieldReader sr(*s, "split");
        c.split.train = sr.get("train", c.split.train);
        c.split.validation = sr.get("validation", c.split.validation);
        c.split.test = sr.get("test", c.split.test);
        sr.finish();
    }
    c.model = parse_model_kind(r.get<std::string>("model", "logreg"));
    if (const auto* s = r.child("strategies")) {
        if (!s->is_array()) throw ValidationError("strategies", "must be a list");
        std::vector<std::string> names;
        for (const auto& v : *s) {
            if (!v.is_string()) throw ValidationError("strategies", "entries must be strings");
            names.push_back(v.get<std::string>());
        }
        c.strategies = detail::parse_strategy_list(names);
    }

    const bool benchmark = corpus->contains("synth") && (*corpus)["synth"].is_object() &&
                           (*corpus)["synth"].value("benchmark", false);
    c.train = benchmark ? synth::benchmark_train_config(c.model) : TrainConfig::defaults_for(c.model);
    if (const auto* t = r.child("train")) {
        FieldReader tr(*t, "train");
        auto& tc = c.train;
        tc.learning_rate = tr.get("learning_rate", tc.learning_rate);
        tc.epochs = tr.get("epochs", tc.epochs);
        tc.batch_size = tr.get("batch_size", tc.batch_size);
        tc.l2_penalty = tr.get("l2_penalty", tc.l2_penalty);
        tc.hidden_dim = tr.get("hidden_dim", tc.hidden_dim);
        tc.embedding_dim = tr.get("embedding_dim", tc.embedding_dim);
        tc.projection_dim = tr.get("projection_dim", tc.projection_dim);
        tc.min_frequency = tr.get("min_frequency", tc.min_frequency);
        if (tr.has("optimizer"))
            tc.optimizer = detail::parse_optimizer(tr.get<std::string>("optimizer", ""), "train.optimizer");
        tr.finish();
    }
    c.train.seed = c.seed;

    if (const auto* m = r.child("mitigation")) {
        FieldReader mr(*m, "mitigation");
        auto& o = c.mitigation.options;
        c.mitigation.enabled = mr.get("enabled", true);
        o.order = mr.get("p", o.order);
        o.window_months = mr.get("window", o.window_months);
        o.threshold = mr.get("threshold", o.threshold);
        o.fit_end = mr.get("fit_end", o.fit_end);
        if (mr.has("ar_input"))
            o.ar_input = detail::parse_ar_input(mr.get<std::string>("ar_input", ""), "mitigation.ar_input");
        if (const auto* d = mr.child("detector")) {
            FieldReader dr(*d, "mitigation.detector");
            auto& dt = o.detector;
            dt.learning_rates = dr.get("learning_rates", dt.learning_rates);
            dt.batch_sizes = dr.get("batch_sizes", dt.batch_sizes);
            dt.hidden_dim = dr.get("hidden_dim", dt.hidden_dim);
            dt.epochs = dr.get("epochs", dt.epochs);
            dt.weight_decay = dr.get("weight_decay", dt.weight_decay);
            dt.balance_classes = dr.get("balance_classes", dt.balance_classes);
            dr.finish();
        }
        o.detector.threshold = o.threshold;
        mr.finish();
    }

    if (const auto* b = r.child("baselines")) {
        FieldReader br(*b, "baselines");
        if (const auto* s = br.child("stm")) {
            FieldReader sr(*s, "baselines.stm");
            c.baselines.stm = sr.get("enabled", true);
            c.baselines.stm_options.k = sr.get("k", c.baselines.stm_options.k);
            c.baselines.stm_options.min_monthly_freq =
                sr.get("min_monthly_freq", c.baselines.stm_options.min_monthly_freq);
            sr.finish();
        }
        if (const auto* s = br.child("cda")) {
            FieldReader sr(*s, "baselines.cda");
            auto& o = c.baselines.cda_options;
            c.baselines.cda = sr.get("enabled", true);
            o.n_candidates = sr.get("n_candidates", o.n_candidates);
            o.sim_threshold = sr.get("sim_threshold", o.sim_threshold);
            o.max_docs_per_month = sr.get("max_docs_per_month", o.max_docs_per_month);
            c.baselines.lexicon_path = sr.get<std::string>("lexicon", "");
            sr.finish();
        }
        br.finish();
    }

    if (const auto* l = r.child("llm")) {
        FieldReader lr(*l, "llm");
        LlmStageConfig s;
        s.client.url = lr.require<std::string>("url");
        s.client.model = lr.get("model", s.client.model);
        s.client.auth_env = lr.get("auth_env", s.client.auth_env);
        s.client.timeout_seconds = lr.get("timeout_seconds", s.client.timeout_seconds);
        s.client.max_tokens = lr.get("max_tokens", s.client.max_tokens);
        s.client.resample_per_document = lr.get("resample_per_document", s.client.resample_per_document);
        s.rolling.docs_per_month = lr.get("docs_per_month", s.rolling.docs_per_month);
        s.rolling.max_retries = lr.get("max_retries", s.rolling.max_retries);
        s.rolling.resample_per_document = s.client.resample_per_document;
        if (!(s.client.timeout_seconds > 0)) throw ValidationError("llm.timeout_seconds", "must be > 0");
        lr.finish();
        c.llm = std::move(s);
    }

    c.upsample = r.get("upsample", c.upsample);
    c.top_features = r.get("top_features", c.top_features);
    c.save_snapshots = r.get("save_snapshots", c.save_snapshots);
    c.output_dir = r.get("output_dir", c.output_dir);
    c.workers = r.get("workers", c.workers);
    r.finish();
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config", std::string("invalid JSON: ") + e.what());
    }
    return experiment_config_from_json(j);
}

/// Canonical JSON of the resolved configuration, hashed into the manifest.
inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    if (c.corpus_path) j["corpus"]["path"] = *c.corpus_path;
    if (c.synth) j["corpus"]["synth"] = synth::to_json(*c.synth);
    j["split"] = {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test}};
    j["model"] = to_string(c.model);
    j["strategies"] = nlohmann::json::array();
    for (auto s : c.strategies) j["strategies"].push_back(to_string(s));
    const auto& t = c.train;
    j["train"] = {{"learning_rate", t.learning_rate}, {"epochs", t.epochs},
                  {"batch_size", t.batch_size},       {"l2_penalty", t.l2_penalty},
                  {"hidden_dim", t.hidden_dim},       {"embedding_dim", t.embedding_dim},
                  {"projection_dim", t.projection_dim}, {"min_frequency", t.min_frequency},
                  {"optimizer", t.optimizer == OptimizerKind::adam ? "adam" : "sgd"}};
    const auto& m = c.mitigation.options;
    j["mitigation"] = {{"enabled", c.mitigation.enabled},
                       {"p", m.order},
                       {"window", m.window_months},
                       {"threshold", m.threshold},
                       {"fit_end", m.fit_end},
                       {"ar_input", m.ar_input == ArInput::label ? "label" : "probability"},
                       {"detector",
                        {{"learning_rates", m.detector.learning_rates},
                         {"batch_sizes", m.detector.batch_sizes},
                         {"hidden_dim", m.detector.hidden_dim},
                         {"epochs", m.detector.epochs},
                         {"weight_decay", m.detector.weight_decay},
                         {"balance_classes", m.detector.balance_classes}}}};
    j["baselines"] = {
        {"stm",
         {{"enabled", c.baselines.stm},
          {"k", c.baselines.stm_options.k},
          {"min_monthly_freq", c.baselines.stm_options.min_monthly_freq}}},
        {"cda",
         {{"enabled", c.baselines.cda},
          {"n_candidates", c.baselines.cda_options.n_candidates},
          {"sim_threshold", c.baselines.cda_options.sim_threshold},
          {"max_docs_per_month", c.baselines.cda_options.max_docs_per_month},
          {"lexicon", c.baselines.lexicon_path}}}};
    if (c.llm)
        j["llm"] = {{"url", c.llm->client.url},
                    {"model", c.llm->client.model},
                    {"auth_env", c.llm->client.auth_env},
                    {"timeout_seconds", c.llm->client.timeout_seconds},
                    {"max_tokens", c.llm->client.max_tokens},
                    {"resample_per_document", c.llm->client.resample_per_document},
                    {"docs_per_month", c.llm->rolling.docs_per_month},
                    {"max_retries", c.llm->rolling.max_retries}};
    j["upsample"] = c.upsample;
    j["top_features"] = c.top_features;
    j["save_snapshots"] = c.save_snapshots;
    j["output_dir"] = c.output_dir;
    return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
    auto j = to_json(c);
    j.erase("output_dir");  // where results go does not change them
    return hex64(fnv1a64(j.dump()));
}

// ---------------------------------------------------------------------------
// Run

struct StageRecord {
    std::string name;
    std::string status;  // "ok", "failed", "skipped"
    std::string error;
};

struct OutputFile {
    std::string path;  // relative to the output directory
    std::string fnv1a64;
    std::size_t bytes = 0;
};

struct ExperimentOutcome {
    std::vector<StageRecord> stages;
    std::vector<OutputFile> files;
    std::vector<RollingReport> reports;             // one per strategy (or the LLM run)
    std::map<std::string, Correlation> correlations; // strategy -> drift correlation
    std::optional<MitigationResult> mitigation;
    std::vector<std::string> warnings;

    bool ok() const {
        return std::all_of(stages.begin(), stages.end(), [](const auto& s) { return s.status == "ok"; });
    }
    const StageRecord* failed_stage() const {
        for (const auto& s : stages)
            if (s.status == "failed") return &s;
        return nullptr;
    }
};

namespace detail {

class OutputWriter {
public:
    explicit OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    void write(const std::string& rel, const std::string& content, std::vector<OutputFile>& files) {
        const auto path = dir_ / rel;
        std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << content;
        if (!out) throw Error("failed writing " + path.string());
        files.push_back({rel, hex64(fnv1a64(content)), content.size()});
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

inline std::string rolling_csv(std::span<const RollingReport> reports, const TemporalCorpus& corpus) {
    std::ostringstream out;
    out << kRollingCsvHeader << '\n';
    for (const auto& r : reports) write_rolling_csv_rows(out, r, &corpus);
    return out.str();
}

inline std::string summary_csv(std::span<const RollingReport> reports) {
    std::ostringstream out;
    out << "strategy,model,periods";
    for (const auto& c : summary_columns()) out << ',' << c;
    out << '\n';
    for (const auto& r : reports) {
        out << r.strategy << ',' << r.model << ',' << r.records.size();
        for (double v : summary_values(r.mean)) out << ',' << fixed6(100 * v);
        out << '\n';
    }
    return out.str();
}

inline std::string plot_f1_csv(std::span<const RollingReport> reports, const TemporalCorpus& corpus) {
    std::ostringstream out;
    out << "strategy,period,month,f1_in_avg,f1_out_avg\n";
    for (const auto& r : reports)
        for (const auto& m : r.records)
            out << r.strategy << ',' << m.period << ','
                << corpus[static_cast<std::size_t>(m.period)].month.to_string() << ','
                << fixed6(100 * m.f1_in_avg) << ',' << fixed6(100 * m.f1_out_avg) << '\n';
    return out.str();
}

inline std::string corpus_csv(const TemporalCorpus& corpus) {
    std::ostringstream out;
    out << "period,month,train,validation,test,positivity\n";
    for (const auto& s : corpus.slices()) {
        const auto all = s.all();
        out << s.period << ',' << s.month.to_string() << ',' << s.train.size() << ',' << s.validation.size()
            << ',' << s.test.size() << ',' << fixed6(sentiment_positivity(all)) << '\n';
    }
    return out.str();
}

inline nlohmann::json binary_report_json(const BinaryReport& b) {
    return {{"precision_ood", b.precision_ood}, {"recall_ood", b.recall_ood}, {"f1_ood", b.f1_ood},
            {"precision_id", b.precision_id},   {"recall_id", b.recall_id},   {"f1_id", b.f1_id},
            {"accuracy", b.accuracy},           {"support_ood", b.support_ood}, {"support_id", b.support_id},
            {"predicted_ood", b.predicted_ood}};
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

/// Executes the configured stages in order, stopping at the first failure.
/// Every stage's status and every written file end up in manifest.json.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
    cfg.validate();
    ExperimentOutcome out;
    detail::OutputWriter writer(cfg.output_dir);
    const std::size_t workers = cfg.workers;
    auto note = [&](const std::string& msg) {
        if (log) *log << msg << '\n';
    };

    std::vector<std::string> plan{"corpus", "drift"};
    plan.push_back(cfg.model == ModelKind::remote_llm ? "llm" : "strategies");
    if (cfg.mitigation.enabled) plan.push_back("mitigation");
    if (cfg.baselines.stm || cfg.baselines.cda) plan.push_back("baselines");

    TemporalCorpus corpus;
    DriftReport drifts;
    std::optional<std::vector<ModelSnapshot>> ndom;
    const auto ndom_snapshots = [&]() -> const std::vector<ModelSnapshot>& {
        if (!ndom) ndom = run_strategy(corpus, StrategyKind::ndom, cfg.model, cfg.train, workers);
        return *ndom;
    };

    auto stage_corpus = [&] {
        if (cfg.synth) {
            corpus = make_corpus(synth::generate_documents(*cfg.synth).documents, cfg.split, cfg.seed);
        } else {
            corpus = load_jsonl(*cfg.corpus_path, cfg.split, cfg.seed);
        }
        if (corpus.size() < 2) throw DataError("corpus spans fewer than 2 months");
        if (cfg.upsample) corpus = upsample_minority(corpus, cfg.seed);
        writer.write("corpus.csv", detail::corpus_csv(corpus), out.files);
        note("corpus: " + std::to_string(corpus.size()) + " months");
    };

    auto stage_drift = [&] {
        drifts = drift_series(corpus, cfg.train.min_frequency, 0.5, workers);
        std::ostringstream s;
        write_drift_csv(s, drifts);
        writer.write("drift.csv", s.str(), out.files);
    };

    auto stage_strategies = [&] {
        nlohmann::json summary;
        summary["model"] = to_string(cfg.model);
        summary["columns"] = summary_columns();
        summary["rows"] = nlohmann::json::array();
        for (const auto s : cfg.strategies) {
            note("training " + to_string(s));
            auto snaps = run_strategy(corpus, s, cfg.model, cfg.train, workers);
            auto report = rolling_evaluate(snaps, corpus, workers, to_string(s), to_string(cfg.model));
            nlohmann::json row = summary_row(report);
            try {
                const auto c = drift_vs_degradation(report, drifts);
                out.correlations[report.strategy] = c;
                row["drift_spearman_rho"] = c.rho;
                row["drift_spearman_p"] = c.p_value;
            } catch (const DataError& e) {
                out.warnings.push_back(to_string(s) + " drift correlation: " + e.what());
                row["drift_spearman_rho"] = nullptr;
                row["drift_spearman_p"] = nullptr;
            }
            summary["rows"].push_back(row);
            if (cfg.model == ModelKind::logreg && cfg.top_features > 0) {
                std::ostringstream tsv;
                write_top_features_tsv(tsv, extract_top_features(snaps.back(), cfg.top_features));
                writer.write("top_features_" + report.strategy + ".tsv", tsv.str(), out.files);
            }
            if (cfg.save_snapshots)
                for (const auto& m : snaps) {
                    char name[64];
                    std::snprintf(name, sizeof name, "snapshots/%s/period_%03d.json", report.strategy.c_str(),
                                  m.period());
                    writer.write(name, snapshot_to_json(m).dump() + "\n", out.files);
                }
            if (s == StrategyKind::ndom) ndom = std::move(snaps);
            out.reports.push_back(std::move(report));
        }
        writer.write("rolling.csv", detail::rolling_csv(out.reports, corpus), out.files);
        writer.write("summary.csv", detail::summary_csv(out.reports), out.files);
        writer.write("summary.json", detail::dump(summary), out.files);
        writer.write("plot_f1.csv", detail::plot_f1_csv(out.reports, corpus), out.files);
    };

    auto stage_llm = [&] {
        const auto& l = *cfg.llm;
        const auto complete = llm::http_completion(l.client);
        auto res = llm::rolling_evaluate(corpus, complete, cfg.seed, l.rolling);
        nlohmann::json summary;
        summary["model"] = "remote-llm";
        summary["columns"] = summary_columns();
        summary["rows"] = nlohmann::json::array({summary_row(res.report)});
        summary["requests"] = res.requests;
        summary["abstentions"] = res.abstentions;
        out.reports.push_back(std::move(res.report));
        writer.write("rolling.csv", detail::rolling_csv(out.reports, corpus), out.files);
        writer.write("summary.csv", detail::summary_csv(out.reports), out.files);
        writer.write("summary.json", detail::dump(summary), out.files);
        writer.write("plot_f1.csv", detail::plot_f1_csv(out.reports, corpus), out.files);
    };

    auto stage_mitigation = [&] {
        auto opts = cfg.mitigation.options;
        opts.label = to_string(StrategyKind::ndom);
        const auto& snaps = ndom_snapshots();
        auto r = run_mitigation(snaps, corpus, derive_seed(cfg.seed, 0x6d697469ULL), opts, workers);
        const std::vector<RollingReport> reports{r.unmitigated, r.mitigated};
        writer.write("mitigation.csv", detail::rolling_csv(reports, corpus), out.files);
        nlohmann::json j;
        j["fit_end"] = r.fit_end;
        j["ood_examples"] = r.ood_examples;
        j["ood_fraction"] = r.ood_fraction;
        j["detector"] = {{"selected", r.detector_training.selected},
                         {"n_train", r.detector_training.n_train},
                         {"n_validation", r.detector_training.n_validation},
                         {"n_test", r.detector_training.n_test},
                         {"test", detail::binary_report_json(r.detector_training.test)},
                         {"grid", nlohmann::json::array()}};
        for (const auto& g : r.detector_training.grid)
            j["detector"]["grid"].push_back({{"learning_rate", g.learning_rate},
                                             {"batch_size", g.batch_size},
                                             {"eligible", g.eligible},
                                             {"validation", detail::binary_report_json(g.validation)}});
        j["ar"] = r.pipeline.ar.to_json();
        j["threshold"] = r.pipeline.threshold;
        j["flagged_fraction"] = r.flagged_fraction;
        j["rows"] = {summary_row(r.unmitigated), summary_row(r.mitigated)};
        j["delta_reduction"] = r.delta_reduction;
        writer.write("mitigation.json", detail::dump(j), out.files);
        writer.write("detector.json", detail::dump(r.pipeline.detector.to_json()), out.files);
        out.mitigation = std::move(r);
    };

    auto stage_baselines = [&] {
        const std::size_t half = corpus.size() / 2;
        if (half < 2 || corpus.size() - half < 2) throw DataError("baselines need at least 4 months");
        const auto& snaps = ndom_snapshots();
        const auto first = corpus.subrange(0, half);
        const auto second = corpus.subrange(half, corpus.size());
        const std::span<const ModelSnapshot> first_snaps(snaps.data(), half);

        std::vector<RollingReport> reports;
        const auto reference = run_strategy(second, StrategyKind::ndom, cfg.model, cfg.train, workers);
        reports.push_back(rolling_evaluate(reference, second, workers, to_string(StrategyKind::ndom),
                                           to_string(cfg.model)));
        nlohmann::json j;
        j["first_half_months"] = half;
        if (cfg.baselines.stm) {
            note("baseline: STM");
            const auto rep = stm_identify(first, first_snaps, cfg.baselines.stm_options, workers);
            for (const auto& w : rep.warnings) out.warnings.push_back("stm: " + w);
            std::ostringstream set, tsv;
            write_token_list(set, rep.selected);
            writer.write("stm_spurious.txt", set.str(), out.files);
            tsv << "token\tstddev\tmonths_present\tfrequency_penalized\n";
            for (const auto& t : rep.tokens) {
                const auto present = std::count_if(t.monthly.begin(), t.monthly.end(),
                                                   [](const auto& v) { return v.has_value(); });
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.10f", t.stddev);
                tsv << t.token << '\t' << buf << '\t' << present << '\t' << (t.frequency_penalized ? 1 : 0)
                    << '\n';
            }
            writer.write("stm_volatility.tsv", tsv.str(), out.files);
            reports.push_back(stm_run(second, rep.selected_set(), cfg.model, cfg.train, StrategyKind::ndom,
                                      workers));
            j["stm"] = {{"requested", rep.requested}, {"eligible", rep.tokens.size()},
                        {"selected", rep.selected.size()}, {"warnings", rep.warnings}};
        }
        if (cfg.baselines.cda) {
            note("baseline: CDA");
            const auto lexicon = cfg.baselines.lexicon_path.empty()
                                     ? AntonymLexicon(synth::antonym_lexicon(cfg.synth->vocab))
                                     : AntonymLexicon::load(cfg.baselines.lexicon_path);
            // Matching always runs on MLP pooled representations.
            std::vector<ModelSnapshot> mlp_first;
            if (cfg.model != ModelKind::mlp) {
                auto mc = TrainConfig::defaults_for(ModelKind::mlp);
                mc.seed = cfg.train.seed;
                mc.min_frequency = cfg.train.min_frequency;
                mlp_first = run_strategy(first, StrategyKind::ndom, ModelKind::mlp, mc, workers);
            }
            const auto causal = cda_identify(
                first, mlp_first.empty() ? first_snaps : std::span<const ModelSnapshot>(mlp_first),
                cfg.baselines.cda_options, workers);
            std::ostringstream set;
            write_token_list(set, causal.causal);
            writer.write("cda_causal.txt", set.str(), out.files);
            std::size_t augmented = 0;
            reports.push_back(cda_augment_and_run(second, causal.causal, lexicon, cfg.model, cfg.train,
                                                  StrategyKind::ndom, workers, &augmented));
            j["cda"] = {{"candidates", causal.candidates.size()},
                        {"causal", causal.causal.size()},
                        {"sim_threshold", causal.sim_threshold},
                        {"augmented_documents", augmented}};
        }
        j["rows"] = nlohmann::json::array();
        for (const auto& r : reports) j["rows"].push_back(summary_row(r));
        writer.write("baselines.csv", detail::rolling_csv(reports, second), out.files);
        writer.write("baselines.json", detail::dump(j), out.files);
    };

    const std::map<std::string, std::function<void()>> stages{
        {"corpus", stage_corpus},         {"drift", stage_drift},         {"strategies", stage_strategies},
        {"llm", stage_llm},               {"mitigation", stage_mitigation}, {"baselines", stage_baselines}};
    bool failed = false;
    for (const auto& name : plan) {
        if (failed) {
            out.stages.push_back({name, "skipped", ""});
            continue;
        }
        try {
            stages.at(name)();
            out.stages.push_back({name, "ok", ""});
        } catch (const std::exception& e) {
            out.stages.push_back({name, "failed", e.what()});
            failed = true;
        }
    }

    nlohmann::json manifest;
    manifest["tool"] = "tshift";
    manifest["version"] = kToolVersion;
    manifest["seed"] = cfg.seed;
    manifest["seeds"] = {{"split", cfg.seed},
                         {"train", cfg.train.seed},
                         {"detector", derive_seed(cfg.seed, 0x6d697469ULL)}};
    if (cfg.synth) manifest["seeds"]["generator"] = cfg.synth->seed;
    manifest["config_hash"] = config_hash(cfg);
    manifest["config"] = to_json(cfg);
    manifest["status"] = out.ok() ? "ok" : "failed";
    if (const auto* f = out.failed_stage()) manifest["failed_stage"] = f->name;
    manifest["stages"] = nlohmann::json::array();
    for (const auto& s : out.stages) {
        nlohmann::json sj = {{"name", s.name}, {"status", s.status}};
        if (!s.error.empty()) sj["error"] = s.error;
        manifest["stages"].push_back(sj);
    }
    manifest["warnings"] = out.warnings;
    manifest["files"] = nlohmann::json::array();
    for (const auto& f : out.files)
        manifest["files"].push_back({{"path", f.path}, {"fnv1a64", f.fnv1a64}, {"bytes", f.bytes}});
    std::vector<OutputFile> ignored;
    writer.write("manifest.json", detail::dump(manifest), ignored);
    return out;
}

// ---------------------------------------------------------------------------
// Re-rendering stored artifacts

/// Parses a rolling CSV written by run_experiment back into reports (F1
/// fractions, rounded to the stored precision). Order of first appearance.
inline std::vector<RollingReport> read_rolling_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kRollingCsvHeader) throw ParseError(1, "not a rolling report CSV");
    std::vector<RollingReport> reports;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 13) throw ParseError(line_no, "expected 13 columns");
        auto num = [&](std::size_t i) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cells[i], &used);
                if (used != cells[i].size()) throw std::invalid_argument("trailing");
                return v / 100.0;
            } catch (const std::exception&) {
                throw ParseError(line_no, "bad number '" + cells[i] + "'");
            }
        };
        auto it = std::find_if(reports.begin(), reports.end(), [&](const RollingReport& r) {
            return r.strategy == cells[0] && r.model == cells[1];
        });
        if (it == reports.end()) {
            reports.push_back({cells[0], cells[1], {}, {}});
            it = std::prev(reports.end());
        }
        MetricsRecord m;
        try {
            m.period = std::stoi(cells[2]);
        } catch (const std::exception&) {
            throw ParseError(line_no, "bad period '" + cells[2] + "'");
        }
        m.f1_in_pos = num(4), m.f1_out_pos = num(5), m.delta_pos = num(6);
        m.f1_in_neg = num(7), m.f1_out_neg = num(8), m.delta_neg = num(9);
        m.f1_in_avg = num(10), m.f1_out_avg = num(11), m.delta_avg = num(12);
        it->records.push_back(m);
    }
    for (auto& r : reports) r.aggregate();
    return reports;
}

/// Fixed-width text table: one row per report, the nine F1 columns x100.
inline std::string render_summary_table(std::span<const RollingReport> reports) {
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-22s %-8s", "strategy", "model");
    out << buf;
    for (const auto& c : summary_columns()) {
        std::snprintf(buf, sizeof buf, " %11s", c.c_str());
        out << buf;
    }
    out << '\n';
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%-22s %-8s", r.strategy.c_str(), r.model.c_str());
        out << buf;
        for (double v : summary_values(r.mean)) {
            std::snprintf(buf, sizeof buf, " %11.2f", 100 * v);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace tshift
