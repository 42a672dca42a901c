// Command-line driver for the training / testing protocol.
//
//   ehl train   --config <file> --out <dir>
//   ehl test    --config <file> --kb <file> --out <dir>
//   ehl run-all --config <file> --out <dir>
//   ehl report  --in <dir>
//
// Global flags: --seed (master seed), --threads, --verbose.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ehl/ehl.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ehl::harness;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    bool verbose = false;
};

ExperimentConfig resolve_config(const std::string& path, const std::string& out, const Globals& g) {
    ExperimentConfig cfg = load_config(path);
    apply_env_overrides(cfg);
    if (!out.empty()) cfg.output_dir = out;
    if (g.seed) cfg.master_seed = *g.seed;
    if (g.threads) cfg.threads = *g.threads;
    return cfg;
}

std::ostream* log_stream(const Globals& g) { return g.verbose ? &std::cerr : nullptr; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lifelong policy-gradient experiments on an energy-harvesting sensor network"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Master seed (overrides the config file)");
    app.add_option("--threads", g.threads, "Worker threads for the test phase, 0 = all cores (overrides EHL_THREADS)");
    app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");

    std::string config_path, out_dir, kb_path, in_dir;

    CLI::App* train = app.add_subcommand("train", "Run the training stream and write the knowledge base");
    train->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out_dir, "Output directory (overrides EHL_OUT_DIR)");

    CLI::App* test = app.add_subcommand("test", "Run the test phase against a saved knowledge base");
    test->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    test->add_option("--kb", kb_path, "Knowledge-base snapshot")->required()->check(CLI::ExistingFile);
    test->add_option("--out", out_dir, "Output directory (overrides EHL_OUT_DIR)");

    CLI::App* all = app.add_subcommand("run-all", "Training followed by testing");
    all->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    all->add_option("--out", out_dir, "Output directory (overrides EHL_OUT_DIR)");

    CLI::App* report = app.add_subcommand("report", "Recompute the summary and plot CSVs of a finished test phase");
    report->add_option("--in", in_dir, "Directory written by test or run-all")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const ExperimentConfig cfg = resolve_config(config_path, out_dir, g);
            const TrainingResult r = run_training(cfg, log_stream(g));
            write_training_outputs(cfg.output_dir, cfg, r);
            std::cout << "trained on " << r.run.task_ids.size() << "/" << r.tasks.size() << " tasks; kb "
                      << detail::hex64(kb_hash(r.run.kb)) << " -> " << (fs::path(cfg.output_dir) / "kb.bin").string()
                      << "\n";
            return r.run.failures.empty() ? 0 : 3;
        }
        if (*test) {
            const ExperimentConfig cfg = resolve_config(config_path, out_dir, g);
            KbLineage lineage;
            const ehl::KnowledgeBase kb = load_kb(kb_path, &lineage);
            if (g.verbose && lineage.master_seed != cfg.master_seed) {
                std::cerr << "note: knowledge base was trained under master seed " << lineage.master_seed << "\n";
            }
            print_summary(run_testing(kb, cfg, cfg.output_dir, log_stream(g)), std::cout);
            return 0;
        }
        if (*all) {
            const ExperimentConfig cfg = resolve_config(config_path, out_dir, g);
            print_summary(run_all(cfg, cfg.output_dir, log_stream(g)), std::cout);
            return 0;
        }
        if (*report) {
            print_summary(run_report(in_dir), std::cout);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "ehl: " << e.what() << "\n";
        return 2;
    } catch (const KbFormatError& e) {
        std::cerr << "ehl: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ehl: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
