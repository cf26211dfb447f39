// tshift command line: gen-data, run, report.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "tshift/experiment.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int gen_data(const std::string& spec_path, const std::string& out_path, const std::optional<std::uint64_t>& seed) {
    std::ifstream in(spec_path);
    if (!in) throw tshift::Error("cannot open spec " + spec_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw tshift::ValidationError("spec", std::string("invalid JSON: ") + e.what());
    }
    auto config = tshift::synth::generator_config_from_json(j);
    if (seed) config.seed = *seed;
    const auto stream = tshift::synth::generate_documents(config);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw tshift::Error("cannot write " + out_path);
    tshift::write_jsonl(out, stream.documents);
    if (!out) throw tshift::Error("failed writing " + out_path);
    std::fprintf(stderr, "wrote %zu documents over %zu months to %s\n", stream.documents.size(), config.months,
                 out_path.c_str());
    return 0;
}

struct RunFlags {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> strategies;
    bool mitigate = false;
    std::optional<std::string> baselines;
    std::optional<std::size_t> p;
    std::optional<std::size_t> window;
    std::optional<double> threshold;
    std::optional<std::string> ar_input;
};

int run(const RunFlags& f) {
    auto cfg = tshift::load_experiment_config(f.config);
    if (f.out) cfg.output_dir = *f.out;
    if (f.seed) cfg.set_seed(*f.seed);
    if (f.workers) cfg.workers = *f.workers;
    if (f.strategies) cfg.strategies = tshift::parse_strategy_csv(*f.strategies);
    if (f.mitigate) cfg.mitigation.enabled = true;
    auto& m = cfg.mitigation.options;
    if (f.p) m.order = *f.p;
    if (f.window) m.window_months = *f.window;
    if (f.threshold) m.threshold = m.detector.threshold = *f.threshold;
    if (f.ar_input) m.ar_input = tshift::detail::parse_ar_input(*f.ar_input, "--ar-input");
    if (f.baselines) {
        const auto& b = *f.baselines;
        if (b != "none" && b != "stm" && b != "cda" && b != "all" && b != "stm,cda" && b != "cda,stm")
            throw tshift::ValidationError("--baselines", "expected none, stm, cda or all");
        cfg.baselines.stm = b == "all" || b.find("stm") != std::string::npos;
        cfg.baselines.cda = b == "all" || b.find("cda") != std::string::npos;
    }

    const auto outcome = tshift::run_experiment(cfg, &std::cerr);
    for (const auto& w : outcome.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (!outcome.reports.empty()) std::cout << tshift::render_summary_table(outcome.reports);
    if (outcome.mitigation) {
        const auto& r = *outcome.mitigation;
        std::cout << '\n' << tshift::render_summary_table(std::vector{r.unmitigated, r.mitigated});
        std::printf("dF1(avg) reduction: %.1f%%\n", 100 * r.delta_reduction);
    }
    if (const auto* failed = outcome.failed_stage()) {
        std::fprintf(stderr, "error: stage '%s' failed: %s\n", failed->name.c_str(), failed->error.c_str());
        return kExitFailure;
    }
    return 0;
}

int report(const std::string& dir) {
    const auto path = std::filesystem::path(dir) / "rolling.csv";
    std::ifstream in(path);
    if (!in) throw tshift::Error("cannot open " + path.string());
    const auto reports = tshift::read_rolling_csv(in);
    std::cout << tshift::render_summary_table(reports);
    const auto mpath = std::filesystem::path(dir) / "mitigation.csv";
    if (std::ifstream min(mpath); min) {
        const auto mitigation = tshift::read_rolling_csv(min);
        std::cout << '\n' << tshift::render_summary_table(mitigation);
    }
    const auto bpath = std::filesystem::path(dir) / "baselines.csv";
    if (std::ifstream bin(bpath); bin) {
        const auto baselines = tshift::read_rolling_csv(bin);
        std::cout << '\n' << tshift::render_summary_table(baselines);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal distribution shift experiments for text classifiers"};
    app.require_subcommand(1);

    std::string spec_path, data_out;
    std::optional<std::uint64_t> gen_seed;
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic JSONL corpus from a generator spec");
    gen->add_option("--config,spec", spec_path, "Generator spec (JSON)")->required();
    gen->add_option("--out,out", data_out, "Output JSONL path")->required();
    gen->add_option("--seed", gen_seed, "Override the spec's seed");

    RunFlags rf;
    auto* run_cmd = app.add_subcommand("run", "Run an experiment from a config file");
    run_cmd->add_option("--config", rf.config, "Experiment config (JSON)")->required();
    run_cmd->add_option("--out", rf.out, "Output directory (overrides output_dir)");
    run_cmd->add_option("--seed", rf.seed, "Override the experiment seed");
    run_cmd->add_option("--workers", rf.workers, "Worker threads")->check(CLI::PositiveNumber);
    run_cmd->add_option("--strategies", rf.strategies, "Comma-separated list, e.g. odnm,ndnm,ndom");
    run_cmd->add_flag("--mitigate", rf.mitigate, "Enable the OOD detector + AR mitigation stage");
    run_cmd->add_option("--baselines", rf.baselines, "none, stm, cda or all");
    run_cmd->add_option("--p", rf.p, "AR order")->check(CLI::PositiveNumber);
    run_cmd->add_option("--window", rf.window, "OOD labeling window in months")->check(CLI::PositiveNumber);
    run_cmd->add_option("--threshold", rf.threshold, "Detector decision threshold")->check(CLI::Range(0.0, 1.0));
    run_cmd->add_option("--ar-input", rf.ar_input, "AR model input: probability or label");

    std::string report_dir;
    auto* report_cmd = app.add_subcommand("report", "Re-render summary tables from a run directory");
    report_cmd->add_option("--out,dir", report_dir, "Run output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (*gen) return gen_data(spec_path, data_out, gen_seed);
        if (*run_cmd) return run(rf);
        if (*report_cmd) return report(report_dir);
    } catch (const tshift::ValidationError& e) {
        std::fprintf(stderr, "error: invalid configuration: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return 0;
}
