// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wsim::defense {

using attack::TransformParams;
using jscc::JsccCodec;
using jscc::Modality;
using nn::Tape;
using nn::Tensor;
using nn::Var;
using phy::cd;
using phy::SymbolGrid;

// ---- adversarial training (dataset augmentation) ----

namespace {

struct AdvItem {
    std::size_t clean_index = 0;
    SymbolGrid perturbation; // transformed defender perturbation, full band
};

Tensor modality_input(const jscc::ModalityDataset& data, std::size_t i, const JsccCodec& codec) {
    switch (data.kind) {
        case Modality::Image: return data.items[i];
        case Modality::Speech: {
            const Tensor framed = jscc::speech_frame(data.items[i], codec.framing());
            return Tensor({1, codec.framing().frame_count, codec.framing().frame_len}, framed.vec());
        }
        case Modality::Text: return jscc::text_onehot(data.sentences[i], codec.vocab());
        case Modality::Video: break;
    }
    throw std::invalid_argument("adversarial_train: video hardening is trained per frame");
}

} // namespace

AdversarialTrainReport adversarial_train(JsccCodec& codec, const jscc::ModalityDataset& train,
                                         const jscc::ModalityDataset& val,
                                         const attack::Pgm& defender_pgm,
                                         const AdversarialTrainConfig& cfg) {
    if (train.size() == 0) throw std::invalid_argument("adversarial_train: empty dataset");
    if (train.kind == Modality::Video)
        throw std::invalid_argument("adversarial_train: desk-scale hardening covers the frame codecs");
    AdversarialTrainReport report;
    report.initial_dataset_size = train.size();

    RngStream root(cfg.seed);
    nn::AdamState adam;
    adam.lr = cfg.lr;
    const std::size_t rows = codec.payload_rows();
    std::vector<AdvItem> adversarial;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream erng = root.derive("epoch").derive(static_cast<std::uint64_t>(epoch));
        RngStream chan_rng = erng.derive("ht");
        const phy::ChannelRealization ht = sample_channel(chan_rng, cfg.channel, cfg.ofdm.n_fft);
        RngStream ha_rng = erng.derive("ha");
        const phy::ChannelRealization ha = sample_channel(ha_rng, cfg.channel, cfg.ofdm.n_fft);
        RngStream noise_rng = erng.derive("noise");
        RngStream z_rng = erng.derive("z");
        RngStream tau_rng = erng.derive("tau");

        // current dataset: clean items then the accumulated adversarial set
        const std::size_t total = train.size() + adversarial.size();
        std::vector<std::size_t> order(total);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[erng.uniform_int(i)]);

        std::vector<AdvItem> fresh;
        std::size_t in_batch = 0, batch_clean_seen = 0;
        for (std::size_t bi = 0; bi < order.size(); ++bi) {
            const std::size_t idx = order[bi];
            const bool is_adv = idx >= train.size();
            const std::size_t clean_idx = is_adv ? adversarial[idx - train.size()].clean_index : idx;
            const Tensor x = modality_input(train, clean_idx, codec);

            const jscc::ChannelDraw draw = jscc::make_channel_draw(ht, cfg.ofdm, rows, noise_rng);
            Tape t;
            Var xv = t.constant(x);
            Var flat = codec.build_encode(t, xv, nullptr);
            Var payload = codec.symbols_to_payload_var(t, flat);
            Var mapped = map_constellation_ste(payload, static_cast<int>(codec.spec().c));

            // equalized compact payload, with the stored perturbation routed
            // through the attacker channel for adversarial items
            Tensor base(std::vector<std::size_t>{rows, 48, 2});
            Tensor ratio(std::vector<std::size_t>{rows, 48, 2});
            const SymbolGrid* pert = is_adv ? &adversarial[idx - train.size()].perturbation : nullptr;
            for (std::size_t j = 0; j < 48; ++j) {
                const std::size_t k = cfg.ofdm.data_subcarriers[j];
                const bool faded = std::abs(draw.h_est[k]) <= 1e-8;
                for (std::size_t i = 0; i < rows; ++i) {
                    cd r{0.0, 0.0}, w{0.0, 0.0};
                    if (!faded) {
                        r = draw.ch.freq_response[k] / draw.h_est[k];
                        w = draw.noise_payload.at(i, k) / draw.h_est[k];
                        if (pert != nullptr) w += ha.freq_response[k] * pert->at(i, k) / draw.h_est[k];
                    }
                    ratio[(i * 48 + j) * 2] = r.real();
                    ratio[(i * 48 + j) * 2 + 1] = r.imag();
                    base[(i * 48 + j) * 2] = w.real();
                    base[(i * 48 + j) * 2 + 1] = w.imag();
                }
            }
            Var eq = add(cmul(mapped, t.constant(ratio)), t.constant(base));
            Var recon = codec.build_decode(t, eq, nullptr);
            Var loss = codec.spec().q == Modality::Text
                           ? softmax_xent(recon, t.constant(x))
                           : mse(recon, xv);
            t.backward(scale(loss, 1.0 / static_cast<double>(cfg.batch)));
            if (!is_adv) ++batch_clean_seen;
            if (++in_batch == cfg.batch || bi + 1 == order.size()) {
                adam_step(codec.params(), adam);
                in_batch = 0;
                // one defender draw per batch, stored for every clean item
                // seen in it (they seed the next epochs)
                const double psr = tau_rng.uniform(cfg.psr_min, cfg.psr_max);
                const Tensor z = defender_pgm.draw_latent(z_rng);
                const SymbolGrid delta = defender_pgm.generate(z);
                // budget from a nominal unit-power payload
                TransformParams tau = attack::draw_tau(
                    tau_rng, cfg.mu,
                    attack::psr_to_epsilon_power(static_cast<double>(rows * 52),
                                                 psr),
                    cfg.ofdm.symbol_len());
                const SymbolGrid transformed = attack::apply_transform(delta, tau);
                SymbolGrid trunc(rows, cfg.ofdm.n_fft);
                for (std::size_t i = 0; i < trunc.size(); ++i) trunc[i] = transformed[i];
                for (std::size_t c = 0; c < batch_clean_seen; ++c) {
                    AdvItem item;
                    item.clean_index = 0; // filled below
                    item.perturbation = trunc;
                    fresh.push_back(std::move(item));
                }
                batch_clean_seen = 0;
            }
        }
        // pair the fresh perturbations with clean items round-robin
        for (std::size_t i = 0; i < fresh.size(); ++i) fresh[i].clean_index = i % train.size();
        adversarial.insert(adversarial.end(), fresh.begin(), fresh.end());
        report.dataset_sizes.push_back(train.size() + adversarial.size());
    }

    jscc::TrainConfig vcfg;
    vcfg.channel = cfg.channel;
    vcfg.channel.snr_db = 40.0;
    vcfg.ofdm = cfg.ofdm;
    vcfg.seed = cfg.seed;
    report.clean_val_loss = jscc::validation_loss(codec, val, vcfg);
    return report;
}

// ---- perturbation subtraction ----

SymbolGrid perturbation_subtract(const SymbolGrid& received, const attack::Pgm& defender_pgm,
                                 const Tensor& z_def, const TransformParams& tau_def,
                                 const std::vector<cd>& h_a_est) {
    if (h_a_est.size() != received.cols())
        throw std::invalid_argument("perturbation_subtract: channel estimate width mismatch");
    const SymbolGrid transformed = attack::apply_transform(defender_pgm.generate(z_def), tau_def);
    if (transformed.rows() < received.rows())
        throw std::invalid_argument("perturbation_subtract: perturbation shorter than the signal");
    SymbolGrid out = received;
    for (std::size_t r = 0; r < received.rows(); ++r)
        for (std::size_t k = 0; k < received.cols(); ++k)
            out.at(r, k) -= h_a_est[k] * transformed.at(r, k);
    return out;
}

// ---- detector ----

Detector::Detector(std::size_t hidden, std::uint64_t init_seed) {
    RngStream init(init_seed);
    l1_ = nn::LinearLayer::make(params_, "l1", 96, hidden, init);
    l2_ = nn::LinearLayer::make(params_, "l2", hidden, 1, init);
}

nn::Var Detector::score_var(Tape& t, Var grid) const {
    const auto& s = grid.shape();
    if (s.size() != 3 || s[1] != 48 || s[2] != 2)
        throw std::invalid_argument("detector: input must be [rows,48,2]");
    Var rows = reshape(grid, {s[0], 96});
    Var logits = l2_(t, relu(l1_(t, rows)));
    return sigmoid(mean(logits));
}

double Detector::score(const SymbolGrid& grid) const {
    Tape t;
    return score_var(t, t.constant(grid.to_tensor())).value()[0];
}

namespace {

void detector_epochs(Detector& det, const std::vector<const SymbolGrid*>& grids,
                     const std::vector<double>& labels, const DetectorTrainConfig& cfg,
                     nn::AdamState& adam, RngStream& root) {
    std::vector<std::size_t> order(grids.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream erng = root.derive("epoch").derive(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[erng.uniform_int(i)]);
        const std::size_t batch = 8;
        std::size_t in_batch = 0;
        for (std::size_t bi = 0; bi < order.size(); ++bi) {
            const std::size_t idx = order[bi];
            Tape t;
            Var p = det.score_var(t, t.constant(grids[idx]->to_tensor()));
            Var pc = add_scalar(scale(p, 1.0 - 2e-7), 1e-7);
            Var loss = labels[idx] > 0.5 ? neg(log_(pc))
                                         : neg(log_(sub(t.constant_scalar(1.0), pc)));
            t.backward(scale(loss, 1.0 / static_cast<double>(batch)));
            if (++in_batch == batch || bi + 1 == order.size()) {
                adam_step(det.params(), adam);
                in_batch = 0;
            }
        }
    }
}

std::pair<std::vector<const SymbolGrid*>, std::vector<double>> make_corpus(
    const std::vector<SymbolGrid>& clean, const std::vector<SymbolGrid>& perturbed) {
    if (clean.empty() || perturbed.empty())
        throw std::invalid_argument("detector training needs both classes");
    std::vector<const SymbolGrid*> grids;
    std::vector<double> labels;
    for (const auto& g : clean) {
        grids.push_back(&g);
        labels.push_back(0.0);
    }
    for (const auto& g : perturbed) {
        grids.push_back(&g);
        labels.push_back(1.0);
    }
    return {grids, labels};
}

} // namespace

void train_detector(Detector& det, const std::vector<SymbolGrid>& clean,
                    const std::vector<SymbolGrid>& perturbed, const DetectorTrainConfig& cfg) {
    auto [grids, labels] = make_corpus(clean, perturbed);
    nn::AdamState adam;
    adam.lr = cfg.lr;
    RngStream root(cfg.seed);
    detector_epochs(det, grids, labels, cfg, adam, root);
}

void fine_tune(Detector& det, const std::vector<SymbolGrid>& clean,
               const std::vector<SymbolGrid>& perturbed, const DetectorTrainConfig& cfg) {
    auto [grids, labels] = make_corpus(clean, perturbed);
    nn::AdamState adam;
    adam.lr = cfg.lr * 0.5; // gentler steps when continuing
    RngStream root(cfg.seed ^ 0x5eedf1e1dULL);
    detector_epochs(det, grids, labels, cfg, adam, root);
}

double detector_accuracy(const Detector& det, const std::vector<SymbolGrid>& clean,
                         const std::vector<SymbolGrid>& perturbed) {
    std::size_t hits = 0;
    for (const auto& g : clean)
        if (!det.flagged(g)) ++hits;
    for (const auto& g : perturbed)
        if (det.flagged(g)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(clean.size() + perturbed.size());
}

// ---- oracle defenders ----

SymbolGrid oracle_defend(const SymbolGrid& received, const SymbolGrid& attacker_delta,
                         const TransformParams& attacker_tau, const std::vector<cd>& h_a,
                         bool synced, RngStream& guess_rng, std::size_t symbol_len) {
    if (h_a.size() != received.cols())
        throw std::invalid_argument("oracle_defend: channel width mismatch");
    TransformParams tau = attacker_tau;
    if (!synced) {
        tau.phi = guess_rng.uniform(0.0, 2.0 * M_PI);
        tau.delta_t = static_cast<int>(guess_rng.uniform_int(symbol_len));
    }
    const SymbolGrid transformed = attack::apply_transform(attacker_delta, tau);
    if (transformed.rows() < received.rows())
        throw std::invalid_argument("oracle_defend: perturbation shorter than the signal");
    SymbolGrid out = received;
    for (std::size_t r = 0; r < received.rows(); ++r)
        for (std::size_t k = 0; k < received.cols(); ++k)
            out.at(r, k) -= h_a[k] * transformed.at(r, k);
    return out;
}

} // namespace wsim::defense
