// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wsim/experiment.hpp"

using wsim::harness::ConfigError;
using wsim::harness::ExperimentConfig;
using wsim::harness::StageError;

int main(int argc, char** argv) {
    CLI::App app{"deterministic simulator of learned multimodal wireless links, "
                 "universal-perturbation attacks against them, and the standard defenses"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "experiment config (json)");
    app.add_option("--out", out_override, "output directory override");
    auto* seed_opt = app.add_option("--seed", seed_override, "master seed override");

    const std::vector<std::string> stages = {"synth-data", "train-jscc", "train-downstream",
                                             "train-pgm",  "attack-sweep", "defend",
                                             "detect",     "report"};
    for (const auto& s : stages) app.add_subcommand(s, "run the " + s + " stage");
    auto* all = app.add_subcommand("run-all", "run every stage in order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    seed_set = seed_opt->count() > 0;

    ExperimentConfig cfg;
    try {
        cfg = config_path.empty() ? wsim::harness::default_config()
                                  : wsim::harness::load_config(config_path);
        if (seed_set) cfg.seed = seed_override;
        if (!out_override.empty()) cfg.out_dir = out_override;
        cfg.validate();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    }

    try {
        if (all->parsed()) {
            wsim::harness::run_experiment(cfg, stages);
        } else {
            for (const auto& s : stages)
                if (app.get_subcommand(s)->parsed()) {
                    wsim::harness::run_experiment(cfg, {s});
                    break;
                }
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "stage failure: %s\n", e.what());
        return 2;
    }
    return 0;
}
