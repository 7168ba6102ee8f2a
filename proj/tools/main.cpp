#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "pofbm/config.hpp"
#include "pofbm/harness.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t workers = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config file");
    cmd->add_option("--out", flags.out_dir, "output directory");
    auto* seed_opt = cmd->add_option("--seed", flags.seed, "master RNG seed");
    seed_opt->each([&flags](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--workers", flags.workers, "worker threads");
}

pofbm::config::ExperimentConfig load(const CommonFlags& flags) {
    pofbm::config::ExperimentConfig cfg;
    if (!flags.config_path.empty()) cfg = pofbm::config::load_config(flags.config_path);
    if (flags.seed_set) cfg.seed = flags.seed;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.workers > 0) cfg.workers = flags.workers;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian inference for partially observed SDEs driven by fractional "
                 "Brownian motion: single-level and multilevel particle MCMC"};
    app.require_subcommand(1);

    CommonFlags flags;
    int (*entry)(const pofbm::config::ExperimentConfig&) = nullptr;

    auto wire = [&](const char* name, const char* help,
                    int (*fn)(const pofbm::config::ExperimentConfig&)) {
        auto* cmd = app.add_subcommand(name, help);
        add_common(cmd, flags);
        cmd->callback([&entry, fn]() { entry = fn; });
        return cmd;
    };

    wire("synth", "generate synthetic observations", &pofbm::harness::cmd_synth);
    wire("fgn-check", "autocovariance and circulant spectrum diagnostics",
         &pofbm::harness::cmd_fgn_check);
    wire("pmcmc", "single-level particle MCMC with importance correction",
         &pofbm::harness::cmd_pmcmc);
    wire("mlpmcmc", "multilevel particle MCMC estimator", &pofbm::harness::cmd_mlpmcmc);
    wire("study", "cost-versus-MSE study over a level grid", &pofbm::harness::cmd_study);
    wire("rates", "rate regression over a completed study", &pofbm::harness::cmd_rates);
    wire("plots", "emit the plotting script for a completed study", &pofbm::harness::cmd_plots);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        const auto cfg = load(flags);
        return entry(cfg);
    } catch (const pofbm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pofbm::MalformedCSV& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pofbm::NonContiguousTime& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pofbm::Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
