// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_CONFIG_HPP
#define WSIM_CONFIG_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "wsim/channel.hpp"
#include "wsim/jscc.hpp"

namespace wsim::harness {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Experiment configuration, loaded from JSON. Every run artifact is a pure
// function of this struct; sub-seeds are derived from `seed` by label.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "runs/out";
    std::string scenario = "los"; // los: decaying taps; nlos: flat profile

    phy::OfdmConfig ofdm;
    phy::ChannelModel channel; // decay filled from scenario

    std::vector<jscc::Modality> modalities;
    std::vector<phy::Constellation> constellations;
    std::vector<int> rate_denoms;

    // jscc training
    int jscc_epochs = 44;
    std::size_t jscc_batch = 8;
    double jscc_lr = 3e-3;
    std::size_t jscc_train_items = 160;
    std::size_t jscc_val_items = 24;
    int video_epochs = 36;
    std::size_t video_batch = 4;
    std::size_t video_train_items = 64;
    std::size_t video_val_items = 8;
    int text_epochs = 200;
    std::size_t text_train_items = 1024;

    // downstream training
    int clf_epochs = 20;
    double clf_lr = 3e-3;
    std::size_t vc_train_items = 320;
    std::size_t ave_train_items = 640;
    std::size_t clf_test_items = 48;

    // pgm
    std::size_t latent_dim = 128;
    std::size_t n_g = 6;
    std::size_t mu = 2;
    int pgm_epochs = 32;
    std::size_t pgm_batches_per_modality = 12;
    std::size_t pgm_batch_size = 4;
    double pgm_lr = 5e-3;
    double psr_min = -20.0;
    double psr_max = -10.0;
    double beta_cls = 1.0;
    double beta_ds = 1.0;
    // the paper-scale diversity weight saturates the desk-scale generator;
    // the default keeps the term's role at a scale the small losses tolerate
    double beta_dv = 0.05;
    bool pgm_stealth = true;
    bool pgm_downstream_terms = true;
    bool train_nonstealth_pgm = false;
    std::size_t attacker_channel_count = 2000;
    int vanilla_iterations = 500;

    // sweeps
    std::vector<double> psr_list = {-20, -18, -16, -14, -12, -10};
    std::size_t sweep_trials = 200;
    std::vector<double> downstream_psr_list = {-10};
    std::size_t downstream_trials = 100;

    // defenses
    std::size_t defense_trials = 100;
    int detector_epochs = 20;
    std::size_t detector_samples = 150;
    int defender_pgm_epochs = 4;

    bool allow_psr_override = false;

    std::size_t rows_total() const { return mu * n_g; }
    void validate() const;
    std::uint64_t config_hash() const;
    std::string canonical_json() const;
};

ExperimentConfig default_config();
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& json_text);

// label-derived component seed
std::uint64_t derived_seed(std::uint64_t master, const std::string& label);

} // namespace wsim::harness

#endif
