// Command line front-end: check / solve / compare / truncation / simulate
// over a declarative experiment config.

#include <CLI11.hpp>

#include <iostream>

#include "aoce/cli.hpp"

namespace {

int dispatch(const std::string& command, const std::string& config_path,
             const aoce::CliOptions& opts) {
    aoce::ExperimentConfig config;
    try {
        config = aoce::ExperimentConfig::load(config_path);
    } catch (const aoce::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return aoce::kExitConfig;
    }
    try {
        if (command == "check") return aoce::run_check(config, opts);
        if (command == "solve") return aoce::run_solve(config, opts);
        if (command == "compare") return aoce::run_compare(config, opts);
        if (command == "truncation") return aoce::run_truncation(config, opts);
        if (command == "simulate") return aoce::run_simulate(config, opts);
    } catch (const aoce::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return aoce::kExitConfig;
    } catch (const aoce::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return aoce::kExitSolver;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return aoce::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return aoce::kExitSolver;
    }
    std::cerr << "unknown command " << command << "\n";
    return aoce::kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transmission policies for remote estimation under consecutive-error aging"};
    app.require_subcommand(1);

    std::string config_path;
    aoce::CliOptions opts;
    std::uint64_t seed = 0;
    std::int64_t horizon = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("--out", opts.out_dir, "output directory (overrides the config)");
        cmd->add_option("--threads", opts.threads, "worker threads for sweeps")
            ->check(CLI::PositiveNumber);
        return cmd;
    };

    auto* check = add_common(app.add_subcommand("check", "validate the model and existence conditions"));
    auto* solve = add_common(app.add_subcommand("solve", "optimal switching thresholds over the sweep"));
    solve->add_flag("--force", opts.force, "solve even if the existence check fails");
    auto* compare = add_common(app.add_subcommand("compare", "cost table: baselines vs the switching policy"));
    auto* trunc = add_common(app.add_subcommand("truncation", "optimal cost across truncation sizes"));
    auto* sim = add_common(app.add_subcommand("simulate", "Monte Carlo rollout of the solved policy"));
    for (auto* cmd : {compare, sim}) {
        cmd->add_option("--seed", seed, "master RNG seed");
        cmd->add_option("--horizon", horizon, "simulation horizon in slots");
    }

    CLI11_PARSE(app, argc, argv);

    for (auto* cmd : {check, solve, compare, trunc, sim})
        if (cmd->parsed()) {
            if (auto* opt = cmd->get_option_no_throw("--seed"); opt && opt->count())
                opts.seed = seed;
            if (auto* opt = cmd->get_option_no_throw("--horizon"); opt && opt->count())
                opts.horizon = horizon;
            return dispatch(cmd->get_name(), config_path, opts);
        }
    return aoce::kExitConfig;
}
