// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_DEFENSE_HPP
#define WSIM_DEFENSE_HPP

#include <vector>

#include "wsim/attack.hpp"
#include "wsim/jscc.hpp"
#include "wsim/pgm.hpp"

namespace wsim::defense {

// ---- adversarial training ----

struct AdversarialTrainConfig {
    int epochs = 4;
    std::size_t batch = 8;
    double lr = 1e-3;
    std::size_t mu = 2;
    double psr_min = -20.0;
    double psr_max = -10.0;
    phy::OfdmConfig ofdm;
    phy::ChannelModel channel;
    std::uint64_t seed = 0;
};

struct AdversarialTrainReport {
    std::size_t initial_dataset_size = 0;
    std::vector<std::size_t> dataset_sizes; // after each epoch's append
    double clean_val_loss = 0.0;            // hardened codec, clean channel
};

// Dataset-augmentation hardening: each epoch trains on the current dataset
// (clean items plus previously stored adversarial examples) and appends one
// defender-generated perturbation per clean item for the following epochs.
AdversarialTrainReport adversarial_train(jscc::JsccCodec& codec, const jscc::ModalityDataset& train,
                                         const jscc::ModalityDataset& val,
                                         const attack::Pgm& defender_pgm,
                                         const AdversarialTrainConfig& cfg);

// ---- perturbation subtraction ----

// received - H_a_est * P_tau(G_def(z_def)), truncated to the received rows
phy::SymbolGrid perturbation_subtract(const phy::SymbolGrid& received, const attack::Pgm& defender_pgm,
                                      const nn::Tensor& z_def, const attack::TransformParams& tau_def,
                                      const std::vector<phy::cd>& h_a_est);

// ---- perturbation detection ----

class Detector {
public:
    Detector(std::size_t hidden, std::uint64_t init_seed);

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    double threshold = 0.5;

    // mapped equalized compact grid [rows,48,2] -> probability of attack
    nn::Var score_var(nn::Tape& t, nn::Var grid) const;
    double score(const phy::SymbolGrid& grid) const;
    bool flagged(const phy::SymbolGrid& grid) const { return score(grid) >= threshold; }

private:
    nn::ParamStore params_;
    nn::LinearLayer l1_, l2_;
};

struct DetectorTrainConfig {
    int epochs = 20;
    double lr = 2e-3;
    std::uint64_t seed = 0;
};

// binary cross-entropy on clean (label 0) vs perturbed (label 1) grids
void train_detector(Detector& det, const std::vector<phy::SymbolGrid>& clean,
                    const std::vector<phy::SymbolGrid>& perturbed, const DetectorTrainConfig& cfg);

// continues from the current parameters on the combined corpus
void fine_tune(Detector& det, const std::vector<phy::SymbolGrid>& clean,
               const std::vector<phy::SymbolGrid>& perturbed, const DetectorTrainConfig& cfg);

double detector_accuracy(const Detector& det, const std::vector<phy::SymbolGrid>& clean,
                         const std::vector<phy::SymbolGrid>& perturbed);

// ---- oracle defenders ----

// synced: subtract H_a * P_tau(delta) with the attacker's exact parameters.
// unsynced: phase and time offsets are replaced with independent uniform
// guesses; everything else stays exact.
phy::SymbolGrid oracle_defend(const phy::SymbolGrid& received, const phy::SymbolGrid& attacker_delta,
                              const attack::TransformParams& attacker_tau,
                              const std::vector<phy::cd>& h_a, bool synced, RngStream& guess_rng,
                              std::size_t symbol_len);

} // namespace wsim::defense

#endif
