// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wsim/metrics.hpp"

namespace wsim::attack {

using jscc::GopBuffer;
using jscc::JsccCodec;
using jscc::Modality;
using nn::Tape;
using nn::Tensor;
using nn::Var;
using phy::cd;
using phy::SymbolGrid;

// ---- ensemble ----

const JsccCodec& SurrogateEnsemble::pick(Modality q, RngStream& rng) const {
    std::vector<const JsccCodec*> candidates;
    for (const auto& c : codecs)
        if (c->spec().q == q) candidates.push_back(c.get());
    if (candidates.empty())
        throw std::invalid_argument(std::string("ensemble: no surrogate for modality ") +
                                    jscc::modality_name(q));
    return *candidates[rng.uniform_int(candidates.size())];
}

bool SurrogateEnsemble::has_modality(Modality q) const {
    for (const auto& c : codecs)
        if (c->spec().q == q) return true;
    return false;
}

std::vector<phy::ChannelRealization> draw_attacker_channels(std::size_t count,
                                                            const phy::ChannelModel& model,
                                                            std::size_t n_fft, RngStream& rng) {
    std::vector<phy::ChannelRealization> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample_channel(rng, model, n_fft));
    return out;
}

void freeze_codec(JsccCodec& codec) {
    for (nn::Parameter* p : codec.params().all()) p->trainable = false;
}

// ---- plain reconstruction losses ----

double loss_rx_image(const Tensor& x, const Tensor& x_bar) {
    return metrics::mse_metric(x.vec(), x_bar.vec());
}

double loss_rx_video(const std::vector<Tensor>& x, const std::vector<Tensor>& x_bar) {
    if (x.size() != x_bar.size() || x.empty())
        throw std::invalid_argument("loss_rx_video: clip size mismatch");
    double acc = 0.0;
    for (std::size_t f = 0; f < x.size(); ++f) acc += metrics::mse_metric(x[f].vec(), x_bar[f].vec());
    return acc;
}

double loss_rx_speech(const Tensor& x_framed, const Tensor& x_bar_framed) {
    return metrics::mse_metric(x_framed.vec(), x_bar_framed.vec());
}

double loss_rx_text(const Tensor& logits_bar, const std::vector<int>& reference,
                    const jscc::TextVocab& vocab) {
    const Tensor target = jscc::text_onehot(reference, vocab);
    double total = 0.0;
    const std::size_t rows = logits_bar.dim(0), cols = logits_bar.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = logits_bar.data() + r * cols;
        double mx = in[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < cols; ++j) lse += std::exp(in[j] - mx);
        lse = std::log(lse) + mx;
        for (std::size_t j = 0; j < cols; ++j)
            if (target[r * cols + j] != 0.0) total -= target[r * cols + j] * (in[j] - lse);
    }
    return total / static_cast<double>(rows);
}

// ---- shared plumbing ----

namespace {

std::vector<std::size_t> identity_perm(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    return p;
}

std::vector<std::size_t> draw_interleave(RngStream& rng) {
    auto p = identity_perm(48);
    for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[rng.uniform_int(i)]);
    return p;
}

SymbolGrid place_full_band(const SymbolGrid& payload_mapped, const phy::OfdmConfig& ofdm,
                           const std::vector<std::size_t>& perm) {
    SymbolGrid full(payload_mapped.rows(), ofdm.n_fft);
    for (std::size_t i = 0; i < payload_mapped.rows(); ++i) {
        for (std::size_t j = 0; j < 48; ++j)
            full.at(i, ofdm.data_subcarriers[perm[j]]) = payload_mapped.at(i, j);
        for (std::size_t k : ofdm.pilot_subcarriers) full.at(i, k) = cd{1.0, 0.0};
    }
    return full;
}

SymbolGrid extract_compact(const SymbolGrid& eq_full, const phy::OfdmConfig& ofdm,
                           const std::vector<std::size_t>& perm) {
    SymbolGrid compact(eq_full.rows(), 48);
    for (std::size_t i = 0; i < eq_full.rows(); ++i)
        for (std::size_t j = 0; j < 48; ++j)
            compact.at(i, j) = eq_full.at(i, ofdm.data_subcarriers[perm[j]]);
    return compact;
}

jscc::ChannelDraw draw_from_realization(const phy::ChannelRealization& ch,
                                        const phy::OfdmConfig& ofdm, std::size_t payload_rows,
                                        RngStream& noise_rng) {
    jscc::ChannelDraw draw;
    draw.ch = ch;
    const SymbolGrid rx_pre = apply_channel(ofdm.preamble, ch, noise_rng);
    draw.h_est = ls_estimate(rx_pre, ofdm);
    for (std::size_t k : ofdm.data_subcarriers)
        if (std::abs(draw.h_est[k]) <= 1e-8) draw.deep_fades.push_back(k);
    draw.noise_payload = phy::draw_noise(payload_rows, ofdm.n_fft, ch.noise_variance, noise_rng);
    return draw;
}

Tensor framed_input(const Tensor& wave) {
    jscc::FramingConfig fc;
    const Tensor m = jscc::speech_frame(wave, fc);
    return Tensor({1, fc.frame_count, fc.frame_len}, m.vec());
}

// per-transmission state shared by the plain and the in-tape receive paths
struct TxPlan {
    const JsccCodec* codec = nullptr;
    Tensor x;
    bool has_prev = false;
    double victim_power = 0.0;
    jscc::ChannelDraw draw;
    std::vector<std::size_t> att_cols;   // data subcarrier per payload slot
    SymbolGrid ratio;                    // H_a / H_est per slot (fades zeroed)
    SymbolGrid clean_eq_raw;             // equalized compact grid, no attack
    SymbolGrid clean_eq_mapped;
    TransformParams tau;
    double eps_overlap = 0.0;            // budget over the victim's own rows
    Tensor z, z2;
    SymbolGrid pert_eq_mapped;           // plain perturbed grid for the D step
};

TxPlan plan_transmission(const JsccCodec& codec, const Tensor& x, GopBuffer& txbuf,
                         const phy::ChannelRealization& ht, const phy::ChannelRealization& ha,
                         const phy::OfdmConfig& ofdm, RngStream& noise_rng) {
    TxPlan p;
    p.codec = &codec;
    p.x = x;
    p.has_prev = codec.spec().q == Modality::Video && !txbuf.empty();
    const SymbolGrid payload = codec.encode(x, txbuf);
    const SymbolGrid mapped = map_constellation(payload, codec.spec().c);
    p.victim_power = full_band_power(mapped, ofdm);
    const std::size_t rows = mapped.rows();
    p.draw = draw_from_realization(ht, ofdm, rows, noise_rng);

    p.att_cols.resize(48);
    p.ratio = SymbolGrid(rows, 48);
    p.clean_eq_raw = SymbolGrid(rows, 48);
    for (std::size_t j = 0; j < 48; ++j) {
        const std::size_t k = ofdm.data_subcarriers[j];
        p.att_cols[j] = k;
        const bool faded = std::abs(p.draw.h_est[k]) <= 1e-8;
        for (std::size_t i = 0; i < rows; ++i) {
            if (faded) continue;
            p.ratio.at(i, j) = ha.freq_response[k] / p.draw.h_est[k];
            p.clean_eq_raw.at(i, j) =
                (ht.freq_response[k] * mapped.at(i, j) + p.draw.noise_payload.at(i, k)) /
                p.draw.h_est[k];
        }
    }
    p.clean_eq_mapped = map_constellation(p.clean_eq_raw, codec.spec().c);
    return p;
}

// plain perturbed receive for the discriminator data
SymbolGrid plain_perturbed_grid(const TxPlan& p, const SymbolGrid& delta_transformed) {
    const SymbolGrid clamped =
        clamp_overlap_power(delta_transformed, p.clean_eq_raw.rows(), p.eps_overlap);
    SymbolGrid eq = p.clean_eq_raw;
    for (std::size_t i = 0; i < eq.rows(); ++i)
        for (std::size_t j = 0; j < 48; ++j)
            eq.at(i, j) += p.ratio.at(i, j) * clamped.at(i, p.att_cols[j]);
    return map_constellation(eq, p.codec->spec().c);
}

struct AttackedTx {
    Var eq_raw;
    Var eq_mapped;
    Var recon;
};

AttackedTx attacked_receive(Tape& t, const TxPlan& p, Var delta_transformed, const Var* prev_pert) {
    const std::size_t rows = p.clean_eq_raw.rows();
    Var trunc = slice_rows(delta_transformed, 0, static_cast<int>(rows));
    if (p.eps_overlap > 0.0) trunc = power_normalize_var(t, trunc, p.eps_overlap);
    Var picked = select_cols(trunc, p.att_cols);
    AttackedTx out;
    out.eq_raw = add(t.constant(p.clean_eq_raw.to_tensor()),
                     cmul(picked, t.constant(p.ratio.to_tensor())));
    out.eq_mapped = map_constellation_ste(out.eq_raw, static_cast<int>(p.codec->spec().c));
    out.recon = p.codec->build_decode(t, out.eq_raw, prev_pert);
    return out;
}

} // namespace

double full_band_power(const SymbolGrid& payload_mapped, const phy::OfdmConfig& ofdm) {
    return payload_mapped.power() +
           static_cast<double>(payload_mapped.rows() * ofdm.pilot_subcarriers.size());
}

// ---- Algorithm 1 ----

namespace {

struct ItemPlan {
    Modality q = Modality::Image;
    std::vector<TxPlan> transmissions;     // 1 (image/speech/text), 2 (image+speech), 8 (clip)
    std::vector<Tensor> originals;         // per transmission source
    std::vector<int> sentence;             // text reference
    int clean_class = 0;                   // downstream label under no attack
    bool with_vc = false, with_ave = false;
};

} // namespace

void train_pgm(Pgm& pgm, Discriminator& disc, const SurrogateEnsemble& ensemble,
               const AttackTrainData& data, const DownstreamSurrogates& surrogates,
               const AttackTrainConfig& cfg) {
    RngStream root(cfg.seed);
    nn::AdamState adam_g, adam_d;
    adam_g.lr = cfg.lr_g;
    adam_d.lr = cfg.lr_d;
    if (ensemble.attacker_channels.empty())
        throw std::invalid_argument("train_pgm: attacker channel set is empty");
    const std::size_t rows_total = cfg.mu * pgm.config().n_g;
    for (const auto& c : ensemble.codecs)
        if (c->payload_rows() > rows_total)
            throw std::invalid_argument("train_pgm: mu * n_g does not cover the longest signal (" +
                                        c->spec().tag() + ")");
    const std::size_t symbol_len = cfg.ofdm.symbol_len();
    (void)symbol_len;

    const Modality all_q[] = {Modality::Image, Modality::Video, Modality::Speech, Modality::Text};

    // per-modality clean reconstruction level, used to express the received
    // distortion as relative damage; without it the small image/speech MSE
    // scale is drowned out by the text cross-entropy
    std::map<Modality, double> rx_baseline;
    {
        RngStream brng = root.derive("baseline");
        RngStream noise_rng = brng.derive("noise");
        for (Modality q : all_q) {
            if (!ensemble.has_modality(q)) continue;
            const JsccCodec& codec = ensemble.pick(q, brng);
            const phy::ChannelRealization ht =
                sample_channel(brng, ensemble.channel, cfg.ofdm.n_fft);
            double acc = 0.0;
            std::size_t count = 0;
            for (int i = 0; i < 6; ++i) {
                switch (q) {
                    case Modality::Image: {
                        const Tensor& x = data.images[brng.uniform_int(data.images.size())];
                        GopBuffer txb, rxb;
                        TxPlan p = plan_transmission(codec, x, txb, ht, ht, cfg.ofdm, noise_rng);
                        acc += loss_rx_image(x, codec.decode(p.clean_eq_raw, rxb));
                        break;
                    }
                    case Modality::Speech: {
                        const Tensor x = framed_input(data.waves[brng.uniform_int(data.waves.size())]);
                        GopBuffer txb, rxb;
                        TxPlan p = plan_transmission(codec, x, txb, ht, ht, cfg.ofdm, noise_rng);
                        acc += loss_rx_speech(x, codec.decode(p.clean_eq_raw, rxb));
                        break;
                    }
                    case Modality::Text: {
                        const auto& s = data.sentences[brng.uniform_int(data.sentences.size())];
                        const Tensor x = jscc::text_onehot(s, codec.vocab());
                        GopBuffer txb, rxb;
                        TxPlan p = plan_transmission(codec, x, txb, ht, ht, cfg.ofdm, noise_rng);
                        acc += loss_rx_text(codec.decode(p.clean_eq_raw, rxb), s, codec.vocab());
                        break;
                    }
                    case Modality::Video: {
                        const auto& clip = data.clips[brng.uniform_int(data.clips.size())];
                        GopBuffer txb, rxb;
                        for (std::size_t f = 0; f < harness::kGopSize && f < clip.frames.size(); ++f) {
                            TxPlan p =
                                plan_transmission(codec, clip.frames[f], txb, ht, ht, cfg.ofdm, noise_rng);
                            acc += loss_rx_image(clip.frames[f], codec.decode(p.clean_eq_raw, rxb));
                        }
                        break;
                    }
                }
                ++count;
            }
            rx_baseline[q] = std::max(1e-6, acc / static_cast<double>(count));
        }
        if (cfg.verbose)
            for (const auto& [q, b] : rx_baseline)
                std::printf("  rx baseline %s = %.5f\n", jscc::modality_name(q), b);
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // the diversity weight anneals linearly to zero so late training
        // focuses on damage; early epochs keep the latent space spread out
        const double beta_dv_epoch =
            cfg.beta_dv * (1.0 - static_cast<double>(epoch) / static_cast<double>(cfg.epochs));
        double epoch_rx = 0.0;
        std::size_t epoch_items = 0;
        for (Modality q : all_q) {
            if (!ensemble.has_modality(q)) continue;
            for (std::size_t batch = 0; batch < cfg.batches_per_modality; ++batch) {
                RngStream brng = root.derive("epoch")
                                     .derive(static_cast<std::uint64_t>(epoch))
                                     .derive(jscc::modality_name(q))
                                     .derive(batch);
                const JsccCodec& codec = ensemble.pick(q, brng);
                RngStream chan_rng = brng.derive("ht");
                const phy::ChannelRealization ht =
                    sample_channel(chan_rng, ensemble.channel, cfg.ofdm.n_fft);
                const phy::ChannelRealization& ha =
                    ensemble.attacker_channels[brng.uniform_int(ensemble.attacker_channels.size())];
                RngStream noise_rng = brng.derive("noise");
                RngStream z_rng = brng.derive("z");
                RngStream tau_rng = brng.derive("tau");
                RngStream item_rng = brng.derive("item");

                // phase A: plan every transmission of the batch
                std::vector<ItemPlan> items;
                for (std::size_t bi = 0; bi < cfg.batch_size; ++bi) {
                    ItemPlan item;
                    item.q = q;
                    auto plan_one = [&](const JsccCodec& cdc, const Tensor& x, GopBuffer& txbuf) {
                        TxPlan p = plan_transmission(cdc, x, txbuf, ht, ha, cfg.ofdm, noise_rng);
                        const double psr = tau_rng.uniform(cfg.psr_min, cfg.psr_max);
                        const double per_row =
                            p.victim_power / static_cast<double>(p.clean_eq_raw.rows());
                        p.tau = draw_tau(
                            tau_rng, cfg.mu,
                            psr_to_epsilon_power(per_row * static_cast<double>(rows_total), psr),
                            symbol_len);
                        p.eps_overlap = psr_to_epsilon_power(p.victim_power, psr);
                        p.z = pgm.draw_latent(z_rng);
                        p.z2 = pgm.draw_latent(z_rng);
                        const SymbolGrid delta = pgm.generate(p.z);
                        p.pert_eq_mapped = plain_perturbed_grid(
                            p, apply_transform(delta, p.tau, &cfg.ofdm.data_subcarriers));
                        item.transmissions.push_back(std::move(p));
                    };
                    switch (q) {
                        case Modality::Image: {
                            GopBuffer txbuf;
                            if (cfg.downstream && surrogates.ave != nullptr && !data.ave_pairs.empty()) {
                                const auto& pair =
                                    data.ave_pairs[item_rng.uniform_int(data.ave_pairs.size())];
                                item.with_ave = true;
                                item.originals = {pair.image, framed_input(pair.speech)};
                                plan_one(codec, pair.image, txbuf);
                                const JsccCodec& sp = ensemble.pick(Modality::Speech, item_rng);
                                GopBuffer txbuf2;
                                plan_one(sp, item.originals[1], txbuf2);
                                // clean downstream class from the unattacked pair
                                GopBuffer rb1, rb2;
                                const Tensor img_hat =
                                    codec.decode(item.transmissions[0].clean_eq_raw, rb1);
                                const Tensor sp_hat =
                                    sp.decode(item.transmissions[1].clean_eq_raw, rb2);
                                item.clean_class = surrogates.ave->classify_pair(img_hat, sp_hat).cls;
                            } else {
                                const auto& img = data.images[item_rng.uniform_int(data.images.size())];
                                item.originals = {img};
                                plan_one(codec, img, txbuf);
                            }
                            break;
                        }
                        case Modality::Speech: {
                            const auto& wave = data.waves[item_rng.uniform_int(data.waves.size())];
                            item.originals = {framed_input(wave)};
                            GopBuffer txbuf;
                            plan_one(codec, item.originals[0], txbuf);
                            break;
                        }
                        case Modality::Text: {
                            item.sentence = data.sentences[item_rng.uniform_int(data.sentences.size())];
                            item.originals = {jscc::text_onehot(item.sentence, codec.vocab())};
                            GopBuffer txbuf;
                            plan_one(codec, item.originals[0], txbuf);
                            break;
                        }
                        case Modality::Video: {
                            const auto& clip = data.clips[item_rng.uniform_int(data.clips.size())];
                            item.with_vc = cfg.downstream && surrogates.vc != nullptr &&
                                           clip.frames.size() == harness::kClipFrames;
                            GopBuffer txbuf;
                            std::vector<Tensor> clean_frames;
                            GopBuffer rx_clean;
                            for (std::size_t f = 0; f < clip.frames.size(); ++f) {
                                if (f % harness::kGopSize == 0) {
                                    txbuf.clear();
                                    rx_clean.clear();
                                }
                                item.originals.push_back(clip.frames[f]);
                                plan_one(codec, clip.frames[f], txbuf);
                                clean_frames.push_back(
                                    codec.decode(item.transmissions.back().clean_eq_raw, rx_clean));
                            }
                            if (item.with_vc)
                                item.clean_class = surrogates.vc->classify_clip(clean_frames).cls;
                            break;
                        }
                    }
                    items.push_back(std::move(item));
                }

                // phase B: one discriminator step (skipped for the
                // no-stealth ablation, which trains without the
                // discrimination and diversity terms)
                if (cfg.stealth) {
                    std::size_t pairs = 0;
                    for (const auto& item : items) pairs += item.transmissions.size();
                    for (const auto& item : items)
                        for (const auto& p : item.transmissions) {
                            Tape t;
                            Var loss = neg(discrimination_loss_var(
                                t, disc, t.constant(p.clean_eq_mapped.to_tensor()),
                                t.constant(p.pert_eq_mapped.to_tensor())));
                            t.backward(scale(loss, 1.0 / static_cast<double>(pairs)));
                        }
                    adam_step(disc.params(), adam_d);
                }

                // phase C: one generator step on the full objective
                disc.set_trainable(false);
                for (const auto& item : items) {
                    Tape t;
                    Var objective{nullptr, -1};
                    bool have_obj = false;
                    auto add_term = [&](Var v) {
                        objective = have_obj ? add(objective, v) : v;
                        have_obj = true;
                    };
                    std::vector<Var> recons;
                    std::optional<Var> prev_pert;
                    Var dv{nullptr, -1};
                    bool have_dv = false;
                    for (std::size_t f = 0; f < item.transmissions.size(); ++f) {
                        const TxPlan& p = item.transmissions[f];
                        Var delta = pgm.build(t, t.constant(p.z));
                        Var deltaT = apply_transform_var(t, delta, p.tau, &cfg.ofdm.data_subcarriers);
                        const Var* prev = nullptr;
                        if (item.q == Modality::Video && f % harness::kGopSize != 0 && prev_pert)
                            prev = &*prev_pert;
                        AttackedTx rx = attacked_receive(t, p, deltaT, prev);
                        recons.push_back(rx.recon);
                        if (item.q == Modality::Video) prev_pert = rx.recon;
                        // reconstruction distortion, relative to the clean level
                        const double rx_scale = 1.0 / rx_baseline.at(item.q);
                        if (item.q == Modality::Text)
                            add_term(scale(softmax_xent(rx.recon, t.constant(item.originals[f])),
                                           rx_scale));
                        else if (!(item.with_ave && f == 1)) // speech half of a pair: rx loss stays image-scoped
                            add_term(scale(mse(rx.recon, t.constant(item.originals[f])), rx_scale));
                        if (cfg.stealth) {
                            Var lds = discrimination_loss_var(
                                t, disc, t.constant(p.clean_eq_mapped.to_tensor()), rx.eq_mapped);
                            add_term(scale(lds, -cfg.beta_ds /
                                                    static_cast<double>(item.transmissions.size())));
                            if (!have_dv) {
                                Var delta2 = pgm.build(t, t.constant(p.z2));
                                dv = diversity_loss_var(t, delta, delta2);
                                have_dv = true;
                            }
                        }
                    }
                    if (item.with_vc && recons.size() == harness::kClipFrames) {
                        Var probs = surrogates.vc->build_vc(t, recons);
                        add_term(nn::scale(task::margin_untargeted_var(t, probs, item.clean_class),
                                           cfg.beta_cls_vc));
                    }
                    if (item.with_ave && recons.size() >= 2) {
                        Var probs = surrogates.ave->build_ave(t, recons[0], recons[1]);
                        add_term(nn::scale(task::margin_untargeted_var(t, probs, item.clean_class),
                                           cfg.beta_cls_ave));
                    }
                    if (have_dv) add_term(scale(dv, beta_dv_epoch));
                    epoch_rx += objective.value()[0];
                    ++epoch_items;
                    // maximize the objective
                    t.backward(scale(neg(objective), 1.0 / static_cast<double>(items.size())));
                }
                adam_step(pgm.params(), adam_g);
                disc.set_trainable(true);
            }
        }
        if (cfg.verbose)
            std::printf("  pgm epoch %d: mean objective %.5f over %zu items\n", epoch,
                        epoch_rx / std::max<std::size_t>(1, epoch_items), epoch_items);
    }
}

// ---- vanilla UAP ----

SymbolGrid train_vanilla_uap(const JsccCodec& image_surrogate, const std::vector<Tensor>& images,
                             std::size_t rows_total, const phy::ChannelModel& channel,
                             const phy::OfdmConfig& ofdm, int iterations, double train_psr_db,
                             std::uint64_t seed) {
    // Entry-level baseline: one image surrogate, additive-noise channel
    // assumption, no fading, no estimation error, no transformation
    // modeling. Whatever structure it learns has to survive the real
    // multipath link untrained.
    if (images.empty()) throw std::invalid_argument("train_vanilla_uap: no images");
    RngStream root(seed);
    nn::ParamStore store;
    nn::Parameter& delta = store.create("delta", {rows_total, ofdm.n_fft, 2});
    {
        RngStream init = root.derive("init");
        for (auto& v : delta.value.vec()) v = init.gaussian(0.0, 0.05);
    }
    nn::AdamState adam;
    adam.lr = 2e-2;
    const double noise_var = std::pow(10.0, -channel.snr_db / 10.0);
    const std::size_t rows = image_surrogate.payload_rows();

    for (int it = 0; it < iterations; ++it) {
        RngStream irng = root.derive("iter").derive(static_cast<std::uint64_t>(it));
        const Tensor& x = images[irng.uniform_int(images.size())];
        // calibrated over the same power range the trained attack samples
        const double psr = irng.uniform(train_psr_db - 10.0, train_psr_db);
        RngStream noise = irng.derive("noise");
        GopBuffer txbuf;
        const SymbolGrid payload = image_surrogate.encode(x, txbuf);
        const SymbolGrid mapped = map_constellation(payload, image_surrogate.spec().c);
        const SymbolGrid w = phy::draw_noise(rows, 48, noise_var, noise);

        TxPlan p;
        p.codec = &image_surrogate;
        p.victim_power = full_band_power(mapped, ofdm);
        p.att_cols.resize(48);
        p.ratio = SymbolGrid(rows, 48);
        p.clean_eq_raw = SymbolGrid(rows, 48);
        for (std::size_t j = 0; j < 48; ++j) {
            p.att_cols[j] = ofdm.data_subcarriers[j];
            for (std::size_t i = 0; i < rows; ++i) {
                p.ratio.at(i, j) = cd{1.0, 0.0};
                p.clean_eq_raw.at(i, j) = mapped.at(i, j) + w.at(i, j);
            }
        }
        Tape t;
        Var dvar = t.param(delta);
        AttackedTx rx = attacked_receive(t, p, dvar, nullptr);
        t.backward(neg(mse(rx.recon, t.constant(x))));
        adam_step(store, adam);
        // project back onto the training power budget
        const double eps = psr_to_epsilon_power(p.victim_power, psr);
        double power = 0.0;
        for (double v : delta.value.vec()) power += v * v;
        if (power > eps) {
            const double s = std::sqrt(eps / power);
            for (auto& v : delta.value.vec()) v *= s;
        }
    }
    SymbolGrid out(rows_total, ofdm.n_fft);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = cd{delta.value[2 * i], delta.value[2 * i + 1]};
    return out;
}

// ---- evaluation ----

const char* arm_name(Arm a) {
    switch (a) {
        case Arm::None: return "none";
        case Arm::Random: return "random";
        case Arm::Vanilla: return "vanilla-uap";
        case Arm::TrainedPgm: return "trained-pgm";
    }
    return "?";
}

PertDraws draw_perturbation_inputs(RngStream& rng, const AttackArtifacts& art,
                                   const phy::OfdmConfig& ofdm) {
    PertDraws d;
    d.phi = rng.uniform(0.0, 2.0 * M_PI);
    d.delta_t = static_cast<int>(rng.uniform_int(ofdm.symbol_len()));
    d.zeta = rng.next_u64();
    d.band_shift = rng.uniform_int(ofdm.n_fft);
    if (art.pgm != nullptr) {
        d.z = art.pgm->draw_latent(rng);
        if (art.fixed_latent) d.z.fill(0.5); // diagnostic: single-pattern family
    }
    d.random_grid = SymbolGrid(art.rows_total, ofdm.n_fft);
    for (std::size_t i = 0; i < d.random_grid.size(); ++i)
        d.random_grid[i] = rng.complex_gaussian(1.0);
    return d;
}

SymbolGrid build_perturbation(Arm arm, const AttackArtifacts& art, const PertDraws& draws,
                              double epsilon) {
    switch (arm) {
        case Arm::None: {
            return SymbolGrid(art.rows_total, draws.random_grid.cols());
        }
        case Arm::Random: {
            SymbolGrid g = draws.random_grid;
            const double s = std::sqrt(epsilon / g.power());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
            return g;
        }
        case Arm::Vanilla: {
            if (art.vanilla == nullptr) throw std::invalid_argument("vanilla perturbation not loaded");
            SymbolGrid g = *art.vanilla;
            const double s = std::sqrt(epsilon / g.power());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
            return rotate(g, draws.phi, draws.delta_t);
        }
        case Arm::TrainedPgm: {
            if (art.pgm == nullptr) throw std::invalid_argument("pgm not loaded");
            TransformParams tau;
            tau.mu = art.mu;
            tau.zeta = draws.zeta;
            if (art.disable_shuffle) tau.zeta.reset();
            tau.epsilon = epsilon;
            tau.phi = draws.phi;
            tau.delta_t = draws.delta_t;
            return apply_transform(art.pgm->generate(draws.z), tau, art.shuffle_domain);
        }
    }
    throw std::logic_error("unreachable");
}

SymbolGrid budgeted_perturbation(Arm arm, const AttackArtifacts& art, const PertDraws& draws,
                                 double victim_power, std::size_t victim_rows, double psr_db) {
    const double per_row = victim_power / static_cast<double>(victim_rows);
    const double eps_grid =
        psr_to_epsilon_power(per_row * static_cast<double>(art.rows_total), psr_db);
    const double eps_overlap = psr_to_epsilon_power(victim_power, psr_db);
    return clamp_overlap_power(build_perturbation(arm, art, draws, eps_grid), victim_rows,
                               eps_overlap);
}

EvalTx run_transmission(const JsccCodec& codec, const Tensor& x, GopBuffer& txbuf, GopBuffer& rxbuf,
                        const phy::OfdmConfig& ofdm, const phy::ChannelRealization& ht,
                        const phy::ChannelRealization& ha, const SymbolGrid& preamble_noise,
                        const SymbolGrid& payload_noise, const std::vector<std::size_t>& interleave,
                        const SymbolGrid* perturbation) {
    const SymbolGrid payload = codec.encode(x, txbuf);
    const SymbolGrid mapped = map_constellation(payload, codec.spec().c);
    const SymbolGrid y_full = place_full_band(mapped, ofdm, interleave);

    EvalTx out;
    out.victim_power = y_full.power();

    const SymbolGrid rx_pre = apply_channel_with_noise(ofdm.preamble, ht, preamble_noise);
    const auto h_est = ls_estimate(rx_pre, ofdm);

    SymbolGrid rx(y_full.rows(), y_full.cols());
    if (perturbation != nullptr) {
        rx = inject(y_full, ht.freq_response, ha.freq_response, *perturbation, payload_noise);
        double injected = 0.0;
        for (std::size_t r = 0; r < y_full.rows(); ++r)
            for (std::size_t k = 0; k < y_full.cols(); ++k) injected += std::norm(perturbation->at(r, k));
        out.measured_psr_db =
            injected > 0.0 ? 10.0 * std::log10(injected / out.victim_power) : -999.0;
    } else {
        rx = apply_channel_with_noise(y_full, ht, payload_noise);
        out.measured_psr_db = -999.0;
    }
    const auto eq = equalize(rx, h_est, ofdm);
    out.eq_compact_raw = extract_compact(eq.grid, ofdm, interleave);
    out.eq_compact_mapped = map_constellation(out.eq_compact_raw, codec.spec().c);
    out.recon = codec.decode(out.eq_compact_raw, rxbuf);
    return out;
}

namespace {

double text_bleu(const Tensor& logits, const std::vector<int>& reference,
                 const jscc::TextVocab& vocab) {
    const std::vector<int> decoded = jscc::text_greedy_decode(logits, vocab);
    if (decoded.empty()) return 0.0;
    return metrics::bleu(decoded, reference);
}

} // namespace

ModalitySweep sweep_modality(const JsccCodec& target, const AttackTrainData& eval_data,
                             const AttackArtifacts& art, const SweepConfig& cfg,
                             const std::vector<Arm>& arms) {
    ModalitySweep sweep;
    RngStream root(cfg.seed);
    const Modality q = target.spec().q;
    for (std::size_t pi = 0; pi < cfg.psr_list.size(); ++pi) {
        const double psr = cfg.psr_list[pi];
        for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
            RngStream s = root.derive("sweep").derive(jscc::modality_name(q)).derive(pi).derive(trial);
            RngStream ht_rng = s.derive("ht");
            RngStream ha_rng = s.derive("ha");
            RngStream noise_rng = s.derive("noise");
            RngStream perm_rng = s.derive("perm");
            RngStream pert_rng = s.derive("pert");
            const phy::ChannelRealization ht = sample_channel(ht_rng, cfg.channel, cfg.ofdm.n_fft);
            const phy::ChannelRealization ha = sample_channel(ha_rng, cfg.channel, cfg.ofdm.n_fft);

            // sources cycle deterministically through the evaluation set
            std::vector<Tensor> frames;          // video
            Tensor x;                            // other modalities
            std::vector<int> sentence;
            switch (q) {
                case Modality::Image: x = eval_data.images[trial % eval_data.images.size()]; break;
                case Modality::Speech:
                    x = framed_input(eval_data.waves[trial % eval_data.waves.size()]);
                    break;
                case Modality::Text:
                    sentence = eval_data.sentences[trial % eval_data.sentences.size()];
                    x = jscc::text_onehot(sentence, target.vocab());
                    break;
                case Modality::Video: {
                    const auto& clip = eval_data.clips[trial % eval_data.clips.size()];
                    for (std::size_t f = 0; f < std::min<std::size_t>(harness::kGopSize,
                                                                      clip.frames.size());
                         ++f)
                        frames.push_back(clip.frames[f]);
                    break;
                }
            }

            const std::size_t n_tx = q == Modality::Video ? frames.size() : 1;
            std::vector<SymbolGrid> pre_noises, pay_noises;
            std::vector<std::vector<std::size_t>> perms;
            std::vector<PertDraws> draws;
            for (std::size_t f = 0; f < n_tx; ++f) {
                pre_noises.push_back(phy::draw_noise(1, cfg.ofdm.n_fft,
                                                     std::pow(10.0, -cfg.channel.snr_db / 10.0),
                                                     noise_rng));
                pay_noises.push_back(phy::draw_noise(target.payload_rows(), cfg.ofdm.n_fft,
                                                     std::pow(10.0, -cfg.channel.snr_db / 10.0),
                                                     noise_rng));
                perms.push_back(draw_interleave(perm_rng));
                draws.push_back(draw_perturbation_inputs(pert_rng, art, cfg.ofdm));
            }

            for (Arm arm : arms) {
                GopBuffer txbuf, rxbuf;
                double metric = 0.0;
                if (q == Modality::Video) {
                    std::vector<double> ref, got;
                    for (std::size_t f = 0; f < n_tx; ++f) {
                        // budget from this frame's own payload power
                        GopBuffer probe_buf = txbuf; // copy to probe without advancing
                        const SymbolGrid probe = target.encode(frames[f], probe_buf);
                        const double vp =
                            full_band_power(map_constellation(probe, target.spec().c), cfg.ofdm);
                        const SymbolGrid pert =
                            budgeted_perturbation(arm, art, draws[f], vp, probe.rows(), psr);
                        const EvalTx tx =
                            run_transmission(target, frames[f], txbuf, rxbuf, cfg.ofdm, ht, ha,
                                             pre_noises[f], pay_noises[f], perms[f], &pert);
                        ref.insert(ref.end(), frames[f].vec().begin(), frames[f].vec().end());
                        got.insert(got.end(), tx.recon.vec().begin(), tx.recon.vec().end());
                    }
                    metric = metrics::psnr(ref, got);
                } else {
                    GopBuffer probe_buf;
                    const SymbolGrid probe = target.encode(x, probe_buf);
                    const double vp =
                        full_band_power(map_constellation(probe, target.spec().c), cfg.ofdm);
                    const SymbolGrid pert =
                        budgeted_perturbation(arm, art, draws[0], vp, probe.rows(), psr);
                    const EvalTx tx = run_transmission(target, x, txbuf, rxbuf, cfg.ofdm, ht, ha,
                                                       pre_noises[0], pay_noises[0], perms[0], &pert);
                    switch (q) {
                        case Modality::Image: metric = metrics::psnr(x.vec(), tx.recon.vec()); break;
                        case Modality::Speech:
                            metric = metrics::mse_metric(x.vec(), tx.recon.vec());
                            break;
                        case Modality::Text: metric = text_bleu(tx.recon, sentence, target.vocab()); break;
                        case Modality::Video: break;
                    }
                }
                sweep.metric[psr][arm].push_back(metric);
            }
        }
    }
    return sweep;
}

std::vector<double> degradation(Modality q, const std::vector<double>& none,
                                const std::vector<double>& attacked) {
    if (none.size() != attacked.size())
        throw std::invalid_argument("degradation: trial count mismatch");
    std::vector<double> out(none.size());
    for (std::size_t i = 0; i < none.size(); ++i) {
        switch (q) {
            case Modality::Image:
            case Modality::Video: out[i] = none[i] - attacked[i]; break;  // psnr drop
            case Modality::Speech: out[i] = attacked[i] - none[i]; break; // mse growth
            case Modality::Text: out[i] = none[i] - attacked[i]; break;   // bleu drop
        }
    }
    return out;
}

// ---- downstream evaluation ----

namespace {

struct ArmClipResult {
    std::vector<Tensor> recons;
};

ArmClipResult transmit_clip(const JsccCodec& codec, const std::vector<Tensor>& frames,
                            const phy::OfdmConfig& ofdm, const phy::ChannelRealization& ht,
                            const phy::ChannelRealization& ha,
                            const std::vector<SymbolGrid>& pre_noises,
                            const std::vector<SymbolGrid>& pay_noises,
                            const std::vector<std::vector<std::size_t>>& perms,
                            const std::vector<PertDraws>& draws, const AttackArtifacts& art,
                            Arm arm, double psr) {
    ArmClipResult out;
    GopBuffer txbuf, rxbuf;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        if (f % harness::kGopSize == 0) {
            txbuf.clear();
            rxbuf.clear();
        }
        GopBuffer probe_buf = txbuf;
        const SymbolGrid probe = codec.encode(frames[f], probe_buf);
        const double vp = full_band_power(map_constellation(probe, codec.spec().c), ofdm);
        const SymbolGrid pert = budgeted_perturbation(arm, art, draws[f], vp, probe.rows(), psr);
        const EvalTx tx = run_transmission(codec, frames[f], txbuf, rxbuf, ofdm, ht, ha,
                                           pre_noises[f], pay_noises[f], perms[f], &pert);
        out.recons.push_back(tx.recon);
    }
    return out;
}

} // namespace

DownstreamEval eval_downstream_vc(const task::Classifier& target, const JsccCodec& video_codec,
                                  const std::vector<harness::LabeledClip>& clips,
                                  const AttackArtifacts& art, double psr_db, std::size_t trials,
                                  const SweepConfig& cfg, const std::vector<Arm>& arms) {
    DownstreamEval eval;
    RngStream root(cfg.seed);
    std::map<Arm, std::vector<task::SuccessRecord>> unt, tgt;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        RngStream s = root.derive("vc").derive(trial);
        const auto& clip = clips[trial % clips.size()].clip;
        RngStream ht_rng = s.derive("ht");
        RngStream ha_rng = s.derive("ha");
        RngStream noise_rng = s.derive("noise");
        RngStream perm_rng = s.derive("perm");
        RngStream pert_rng = s.derive("pert");
        const phy::ChannelRealization ht = sample_channel(ht_rng, cfg.channel, cfg.ofdm.n_fft);
        const phy::ChannelRealization ha = sample_channel(ha_rng, cfg.channel, cfg.ofdm.n_fft);
        const double nv = std::pow(10.0, -cfg.channel.snr_db / 10.0);
        std::vector<SymbolGrid> pre_noises, pay_noises;
        std::vector<std::vector<std::size_t>> perms;
        std::vector<PertDraws> draws;
        for (std::size_t f = 0; f < clip.frames.size(); ++f) {
            pre_noises.push_back(phy::draw_noise(1, cfg.ofdm.n_fft, nv, noise_rng));
            pay_noises.push_back(
                phy::draw_noise(video_codec.payload_rows(), cfg.ofdm.n_fft, nv, noise_rng));
            perms.push_back(draw_interleave(perm_rng));
            draws.push_back(draw_perturbation_inputs(pert_rng, art, cfg.ofdm));
        }
        const auto clean = transmit_clip(video_codec, clip.frames, cfg.ofdm, ht, ha, pre_noises,
                                         pay_noises, perms, draws, art, Arm::None, psr_db);
        const int clean_class = target.classify_clip(clean.recons).cls;
        const int target_class = (clean_class + 1) % target.n_classes();
        for (Arm arm : arms) {
            if (arm == Arm::None) continue;
            const auto attacked = transmit_clip(video_codec, clip.frames, cfg.ofdm, ht, ha,
                                                pre_noises, pay_noises, perms, draws, art, arm,
                                                psr_db);
            const auto res = target.classify_clip(attacked.recons);
            task::SuccessRecord u;
            u.loss = task::loss_cls_untargeted(res.probs, clean_class);
            unt[arm].push_back(u);
            task::SuccessRecord g;
            g.targeted = true;
            g.loss = task::loss_cls_targeted(res.probs, target_class);
            g.argmax_hit = res.cls == target_class;
            if ((g.loss > 0.0) != g.argmax_hit) eval.targeted_agreement = false;
            tgt[arm].push_back(g);
            ++eval.records;
        }
    }
    for (auto& [arm, recs] : unt) eval.untargeted_success[arm] = task::attack_success_rate(recs);
    for (auto& [arm, recs] : tgt) eval.targeted_success[arm] = task::attack_success_rate(recs);
    return eval;
}

DownstreamEval eval_downstream_ave(const task::Classifier& target, const JsccCodec& image_codec,
                                   const JsccCodec& speech_codec,
                                   const std::vector<harness::AvePair>& pairs,
                                   const AttackArtifacts& art, double psr_db, std::size_t trials,
                                   const SweepConfig& cfg, const std::vector<Arm>& arms) {
    DownstreamEval eval;
    RngStream root(cfg.seed);
    std::map<Arm, std::vector<task::SuccessRecord>> unt, tgt;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        RngStream s = root.derive("ave").derive(trial);
        const auto& pair = pairs[trial % pairs.size()];
        const Tensor speech_x = framed_input(pair.speech);
        RngStream ht_rng = s.derive("ht");
        RngStream ha_rng = s.derive("ha");
        RngStream noise_rng = s.derive("noise");
        RngStream perm_rng = s.derive("perm");
        RngStream pert_rng = s.derive("pert");
        const phy::ChannelRealization ht = sample_channel(ht_rng, cfg.channel, cfg.ofdm.n_fft);
        const phy::ChannelRealization ha = sample_channel(ha_rng, cfg.channel, cfg.ofdm.n_fft);
        const double nv = std::pow(10.0, -cfg.channel.snr_db / 10.0);

        struct TxDraws {
            SymbolGrid pre, pay;
            std::vector<std::size_t> perm;
            PertDraws pd;
        };
        std::vector<TxDraws> txd(2);
        const std::size_t rows[2] = {image_codec.payload_rows(), speech_codec.payload_rows()};
        for (int i = 0; i < 2; ++i) {
            txd[i].pre = phy::draw_noise(1, cfg.ofdm.n_fft, nv, noise_rng);
            txd[i].pay = phy::draw_noise(rows[i], cfg.ofdm.n_fft, nv, noise_rng);
            txd[i].perm = draw_interleave(perm_rng);
            txd[i].pd = draw_perturbation_inputs(pert_rng, art, cfg.ofdm);
        }

        auto transmit_pair = [&](Arm arm) {
            std::vector<Tensor> out;
            const JsccCodec* codecs[2] = {&image_codec, &speech_codec};
            const Tensor* inputs[2] = {&pair.image, &speech_x};
            for (int i = 0; i < 2; ++i) {
                GopBuffer txb, rxb;
                GopBuffer probe_buf;
                const SymbolGrid probe = codecs[i]->encode(*inputs[i], probe_buf);
                const double vp =
                    full_band_power(map_constellation(probe, codecs[i]->spec().c), cfg.ofdm);
                const SymbolGrid pert =
                    budgeted_perturbation(arm, art, txd[i].pd, vp, probe.rows(), psr_db);
                const EvalTx tx = run_transmission(*codecs[i], *inputs[i], txb, rxb, cfg.ofdm, ht,
                                                   ha, txd[i].pre, txd[i].pay, txd[i].perm, &pert);
                out.push_back(tx.recon);
            }
            return out;
        };

        const auto clean = transmit_pair(Arm::None);
        const int clean_class = target.classify_pair(clean[0], clean[1]).cls;
        const int target_class = (clean_class + 1) % target.n_classes();
        for (Arm arm : arms) {
            if (arm == Arm::None) continue;
            const auto attacked = transmit_pair(arm);
            const auto res = target.classify_pair(attacked[0], attacked[1]);
            task::SuccessRecord u;
            u.loss = task::loss_cls_untargeted(res.probs, clean_class);
            unt[arm].push_back(u);
            task::SuccessRecord g;
            g.targeted = true;
            g.loss = task::loss_cls_targeted(res.probs, target_class);
            g.argmax_hit = res.cls == target_class;
            if ((g.loss > 0.0) != g.argmax_hit) eval.targeted_agreement = false;
            tgt[arm].push_back(g);
            ++eval.records;
        }
    }
    for (auto& [arm, recs] : unt) eval.untargeted_success[arm] = task::attack_success_rate(recs);
    for (auto& [arm, recs] : tgt) eval.targeted_success[arm] = task::attack_success_rate(recs);
    return eval;
}

} // namespace wsim::attack
