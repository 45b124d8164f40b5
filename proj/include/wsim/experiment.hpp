// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_EXPERIMENT_HPP
#define WSIM_EXPERIMENT_HPP

#include <memory>
#include <string>
#include <vector>

#include "wsim/attack.hpp"
#include "wsim/config.hpp"
#include "wsim/defense.hpp"
#include "wsim/downstream.hpp"

namespace wsim::harness {

// One result row. The column order is fixed; every row carries enough
// context (seed, config hash, scenario, psr) to be regenerated in isolation.
struct CsvRow {
    std::string stage;
    std::string scenario;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string codec = "-";
    std::string modality = "-";
    std::string task = "-";
    double psr_db = 0.0;
    std::string arm = "-";
    std::string metric;
    double value = 0.0;
    std::size_t trials = 0;
};

std::string csv_header();
std::string csv_line(const CsvRow& row);
void write_csv(const std::string& path, const std::vector<CsvRow>& rows);

// ---- artifact construction and persistence ----

std::string checkpoint_dir(const ExperimentConfig& cfg);
std::string codec_checkpoint_path(const ExperimentConfig& cfg, const jscc::CodecSpec& spec);

std::shared_ptr<jscc::JsccCodec> build_codec(const ExperimentConfig& cfg,
                                             const jscc::CodecSpec& spec);
std::shared_ptr<jscc::JsccCodec> load_codec(const ExperimentConfig& cfg,
                                            const jscc::CodecSpec& spec);

std::unique_ptr<task::Classifier> build_classifier(const ExperimentConfig& cfg, task::TaskKind task,
                                                   jscc::ArchVariant variant);
std::unique_ptr<task::Classifier> load_classifier(const ExperimentConfig& cfg, task::TaskKind task,
                                                  jscc::ArchVariant variant);

attack::PgmConfig pgm_config(const ExperimentConfig& cfg);
std::unique_ptr<attack::Pgm> load_pgm(const ExperimentConfig& cfg, const std::string& name);
phy::SymbolGrid load_vanilla(const ExperimentConfig& cfg);

jscc::ModalityDataset modality_data(const ExperimentConfig& cfg, jscc::Modality q,
                                    const std::string& split, std::size_t size);
attack::AttackTrainData attack_data(const ExperimentConfig& cfg, const std::string& split,
                                    std::size_t size);
std::vector<phy::ChannelRealization> attacker_channel_set(const ExperimentConfig& cfg);
attack::SurrogateEnsemble load_surrogate_ensemble(const ExperimentConfig& cfg);

jscc::TrainConfig jscc_train_config(const ExperimentConfig& cfg, jscc::Modality q);

// ---- stages ----
// synth-data, train-jscc, train-downstream, train-pgm, attack-sweep,
// defend, detect, report
std::vector<CsvRow> run_stage(const ExperimentConfig& cfg, const std::string& stage);

// runs the listed stages in order, writing {out_dir}/{stage}.csv after each
// and a summary json at the end
void run_experiment(const ExperimentConfig& cfg, const std::vector<std::string>& stages);

} // namespace wsim::harness

#endif
