// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_ATTACK_HPP
#define WSIM_ATTACK_HPP

#include <map>
#include <memory>
#include <vector>

#include "wsim/downstream.hpp"
#include "wsim/jscc.hpp"
#include "wsim/pgm.hpp"
#include "wsim/transform.hpp"

namespace wsim::attack {

// ---- ensembles ----

struct SurrogateEnsemble {
    std::vector<std::shared_ptr<jscc::JsccCodec>> codecs; // trained and frozen
    phy::ChannelModel channel;
    std::vector<phy::ChannelRealization> attacker_channels; // drawn once, reused

    const jscc::JsccCodec& pick(jscc::Modality q, RngStream& rng) const;
    bool has_modality(jscc::Modality q) const;
};

std::vector<phy::ChannelRealization> draw_attacker_channels(std::size_t count,
                                                            const phy::ChannelModel& model,
                                                            std::size_t n_fft, RngStream& rng);

void freeze_codec(jscc::JsccCodec& codec);

// ---- reconstruction loss (per-modality receiver distortion) ----

double loss_rx_image(const nn::Tensor& x, const nn::Tensor& x_bar);
double loss_rx_video(const std::vector<nn::Tensor>& x, const std::vector<nn::Tensor>& x_bar);
double loss_rx_speech(const nn::Tensor& x_framed, const nn::Tensor& x_bar_framed);
// cross-entropy of the perturbed logits against the reference tokens
double loss_rx_text(const nn::Tensor& logits_bar, const std::vector<int>& reference,
                    const jscc::TextVocab& vocab);

// ---- training data ----

struct AttackTrainData {
    std::vector<nn::Tensor> images;
    std::vector<harness::AvePair> ave_pairs; // image-batch items when downstream terms are on
    std::vector<harness::VideoClip> clips;   // 8-frame clips (two GOPs)
    std::vector<nn::Tensor> waves;
    std::vector<std::vector<int>> sentences;
};

struct DownstreamSurrogates {
    const task::Classifier* vc = nullptr;
    const task::Classifier* ave = nullptr;
};

struct AttackTrainConfig {
    int epochs = 6;
    std::size_t batches_per_modality = 6;
    std::size_t batch_size = 4;
    double psr_min = -20.0;
    double psr_max = -10.0;
    double beta_cls_vc = 1.0;
    double beta_cls_ave = 1.0;
    double beta_ds = 1.0;
    double beta_dv = 1.0;
    double lr_g = 1e-3;
    double lr_d = 1e-3;
    std::size_t mu = 2;
    bool stealth = true;     // include the discrimination and diversity terms
    bool downstream = true;  // include the classifier margin terms
    bool verbose = false;    // per-epoch objective trace on stdout
    phy::OfdmConfig ofdm;
    std::uint64_t seed = 0;
};

// Ensemble max-min training: one discriminator step then one generator step
// per batch, iterating modalities image, video, speech, text.
void train_pgm(Pgm& pgm, Discriminator& disc, const SurrogateEnsemble& ensemble,
               const AttackTrainData& data, const DownstreamSurrogates& surrogates,
               const AttackTrainConfig& cfg);

// Entry-level baseline: a single perturbation grid optimized against one
// image surrogate with no transformation modeling and a unit attacker
// channel assumption.
phy::SymbolGrid train_vanilla_uap(const jscc::JsccCodec& image_surrogate,
                                  const std::vector<nn::Tensor>& images, std::size_t rows_total,
                                  const phy::ChannelModel& channel, const phy::OfdmConfig& ofdm,
                                  int iterations, double train_psr_db, std::uint64_t seed);

// ---- evaluation ----

enum class Arm : int { None = 0, Random = 1, Vanilla = 2, TrainedPgm = 3 };
const char* arm_name(Arm a);

struct AttackArtifacts {
    const Pgm* pgm = nullptr;
    const phy::SymbolGrid* vanilla = nullptr;
    std::size_t mu = 2;
    std::size_t rows_total = 12;                           // mu * n_g
    const std::vector<std::size_t>* shuffle_domain = nullptr; // data subcarriers
    bool disable_shuffle = false; // diagnostic: evaluate without the shuffle
    bool fixed_latent = false;    // diagnostic: reuse one latent code
};

// per-transmission draws shared by every arm of a matched trial
struct PertDraws {
    double phi = 0.0;
    int delta_t = 0;
    std::uint64_t zeta = 0;
    std::size_t band_shift = 0; // subcarrier misalignment for protocol-blind arms
    nn::Tensor z;
    phy::SymbolGrid random_grid; // unscaled complex gaussian entries
};

PertDraws draw_perturbation_inputs(RngStream& rng, const AttackArtifacts& art,
                                   const phy::OfdmConfig& ofdm);

// rows_total x n_fft grid with power <= epsilon (== epsilon for the random
// and vanilla arms, which are rescaled exactly)
phy::SymbolGrid build_perturbation(Arm arm, const AttackArtifacts& art, const PertDraws& draws,
                                   double epsilon);

// The attacker budgets its whole transmission against the victim's
// per-symbol power, then the overlap with the victim's rows is clamped so
// the measured perturbation-to-signal ratio never exceeds the configured
// one: epsilon_grid = rows_total * victim_power/rows * 10^(psr/10),
// epsilon_overlap = victim_power * 10^(psr/10).
phy::SymbolGrid budgeted_perturbation(Arm arm, const AttackArtifacts& art, const PertDraws& draws,
                                      double victim_power, std::size_t victim_rows, double psr_db);

// One full-band transmission: preamble + interleaved payload through the
// transmitter channel, perturbation through the attacker channel, LS
// estimation, equalization, de-interleaving, re-quantization, decoding.
struct EvalTx {
    nn::Tensor recon;
    phy::SymbolGrid eq_compact_raw;
    phy::SymbolGrid eq_compact_mapped;
    double victim_power = 0.0;
    double measured_psr_db = 0.0; // -inf-like sentinel when no perturbation
};

EvalTx run_transmission(const jscc::JsccCodec& codec, const nn::Tensor& x, jscc::GopBuffer& txbuf,
                        jscc::GopBuffer& rxbuf, const phy::OfdmConfig& ofdm,
                        const phy::ChannelRealization& ht, const phy::ChannelRealization& ha,
                        const phy::SymbolGrid& preamble_noise, const phy::SymbolGrid& payload_noise,
                        const std::vector<std::size_t>& interleave,
                        const phy::SymbolGrid* perturbation);

// convenience: victim payload power of a mapped compact payload placed on the
// full band (pilots included), used for the epsilon budget
double full_band_power(const phy::SymbolGrid& payload_mapped, const phy::OfdmConfig& ofdm);

struct SweepConfig {
    std::vector<double> psr_list;
    std::size_t trials = 200;
    phy::OfdmConfig ofdm;
    phy::ChannelModel channel;
    std::uint64_t seed = 0;
};

// per psr, per arm: per-trial modality metric (psnr dB for image/video, mse
// for speech, bleu for text)
struct ModalitySweep {
    std::map<double, std::map<Arm, std::vector<double>>> metric;
};

ModalitySweep sweep_modality(const jscc::JsccCodec& target, const AttackTrainData& eval_data,
                             const AttackArtifacts& art, const SweepConfig& cfg,
                             const std::vector<Arm>& arms);

// degradation relative to the no-attack arm, oriented so larger = worse
std::vector<double> degradation(jscc::Modality q, const std::vector<double>& none,
                                const std::vector<double>& attacked);

struct DownstreamEval {
    std::map<Arm, double> untargeted_success;
    std::map<Arm, double> targeted_success;
    bool targeted_agreement = true; // margin sign vs argmax accounting
    std::size_t records = 0;
};

DownstreamEval eval_downstream_vc(const task::Classifier& target, const jscc::JsccCodec& video_codec,
                                  const std::vector<harness::LabeledClip>& clips,
                                  const AttackArtifacts& art, double psr_db, std::size_t trials,
                                  const SweepConfig& cfg, const std::vector<Arm>& arms);

DownstreamEval eval_downstream_ave(const task::Classifier& target, const jscc::JsccCodec& image_codec,
                                   const jscc::JsccCodec& speech_codec,
                                   const std::vector<harness::AvePair>& pairs,
                                   const AttackArtifacts& art, double psr_db, std::size_t trials,
                                   const SweepConfig& cfg, const std::vector<Arm>& arms);

} // namespace wsim::attack

#endif
