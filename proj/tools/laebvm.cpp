// laebvm: run, validate and re-summarize boundary-model experiments.
//
//   laebvm run <config.json> [--seed N] [--threads K] [--resume] [--out DIR]
//   laebvm validate <config.json>
//   laebvm report <out_dir>

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "laebvm/harness/config.hpp"
#include "laebvm/harness/runner.hpp"

namespace {

void print_verdicts(const laebvm::harness::ExperimentResult& r) {
    std::cout << "experiment: " << to_string(r.config.experiment) << "\n"
              << "config hash: " << r.config_hash << "\n"
              << "rows: " << r.rows.size() << "\n"
              << "verdicts: " << r.verdicts.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bernstein-von Mises experiments for models with a density jump at the boundary"};
    app.require_subcommand(1);

    std::string run_config;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string out_dir;
    bool resume = false;
    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", run_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", seed, "Override master_seed");
    auto* threads_opt = run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    auto* out_opt = run->add_option("--out", out_dir, "Override output_dir");
    run->add_flag("--resume", resume, "Skip replicates already recorded in the output directory");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a config and print its normalized form");
    validate->add_option("config", validate_path, "Experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Re-derive summary.csv and verdicts from rows.csv");
    report->add_option("out_dir", report_dir, "Output directory of a finished run")
        ->required()
        ->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            laebvm::harness::RunOverrides o;
            if (*seed_opt) o.seed = seed;
            if (*threads_opt) o.threads = threads;
            if (*out_opt) o.out = out_dir;
            o.resume = resume;
            const auto result = laebvm::harness::run(laebvm::harness::load_config(run_config), o);
            print_verdicts(result);
            std::cout << "output: " << result.config.output_dir << "\n";
        } else if (*validate) {
            const auto c = laebvm::harness::validate_config(validate_path);
            std::cout << laebvm::harness::to_json(c).dump(2) << "\n"
                      << "config hash: " << laebvm::harness::config_hash(c) << "\n";
        } else if (*report) {
            print_verdicts(laebvm::harness::report(report_dir));
        }
    } catch (const laebvm::harness::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
