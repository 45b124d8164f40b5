// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
// scratch calibration runs for training hyperparameters
#include <chrono>
#include <cstdio>
#include <string>

#include "wsim/attack.hpp"
#include "wsim/downstream.hpp"
#include "wsim/experiment.hpp"
#include "wsim/jscc.hpp"

using namespace wsim;

static double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

int main(int argc, char** argv) {
    const std::string what = argc > 1 ? argv[1] : "all";

    if (what == "inspect") {
        using namespace wsim::harness;
        using namespace wsim::attack;
        ExperimentConfig cfg = default_config();
        cfg.seed = 0;
        cfg.out_dir = "runs/dev";
        const auto pgm = load_pgm(cfg, "pgm_stealth");
        const phy::SymbolGrid vanilla = load_vanilla(cfg);
        auto stats = [&](const phy::SymbolGrid& g, const char* name) {
            double data_p = 0, pilot_p = 0, null_p = 0;
            std::vector<double> mags;
            for (std::size_t k = 0; k < 64; ++k) {
                double colp = 0;
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    colp += std::norm(g.at(r, k));
                    mags.push_back(std::abs(g.at(r, k)));
                }
                const auto& d = cfg.ofdm.data_subcarriers;
                const auto& pl = cfg.ofdm.pilot_subcarriers;
                if (std::find(d.begin(), d.end(), k) != d.end()) data_p += colp;
                else if (std::find(pl.begin(), pl.end(), k) != pl.end()) pilot_p += colp;
                else null_p += colp;
            }
            std::sort(mags.begin(), mags.end());
            const double tot = data_p + pilot_p + null_p;
            std::printf("%s: data %.1f%% pilot %.1f%% null %.1f%% | mag p50 %.3f p90 %.3f p99 %.3f max %.3f\n",
                        name, 100 * data_p / tot, 100 * pilot_p / tot, 100 * null_p / tot,
                        mags[mags.size() / 2], mags[mags.size() * 9 / 10],
                        mags[mags.size() * 99 / 100], mags.back());
        };
        stats(vanilla, "vanilla");
        RngStream rng(5);
        for (int i = 0; i < 3; ++i) stats(pgm->generate(pgm->draw_latent(rng)), "pgm    ");
        {
            const auto& env = pgm->params().at("env").value;
            double lo = 1e9, hi = -1e9, mean = 0;
            for (double v : env.vec()) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                mean += v;
            }
            std::printf("env: min %.3f mean %.3f max %.3f (init 0.55)\n", lo,
                        mean / env.size(), hi);
        }
        return 0;
    }

    if (what == "sweep") {
        using namespace wsim::harness;
        using namespace wsim::attack;
        ExperimentConfig cfg = default_config();
        cfg.seed = 0;
        cfg.out_dir = argc > 2 && std::string(argv[2]).rfind("runs/",0)==0 ? argv[2] : "runs/dev";
        const auto pgm = load_pgm(cfg, "pgm_stealth");
        const phy::SymbolGrid vanilla = load_vanilla(cfg);
        AttackArtifacts art;
        art.pgm = pgm.get();
        art.vanilla = &vanilla;
        art.mu = cfg.mu;
        art.rows_total = cfg.rows_total();
        art.shuffle_domain = &cfg.ofdm.data_subcarriers;
        art.disable_shuffle = argc > 4 && std::string(argv[4]) == "noshuffle";
        art.fixed_latent = argc > 4 && std::string(argv[4]) == "fixedz";
        SweepConfig sc;
        sc.psr_list = std::vector<double>{-20.0, -14.0, -10.0};
        sc.trials = argc > 3 ? static_cast<std::size_t>(std::stoul(argv[3])) : 60;
        sc.ofdm = cfg.ofdm;
        sc.channel = cfg.channel;
        sc.seed = 777;
        const auto eval_data = attack_data(cfg, "eval", 48);
        const std::vector<Arm> arms = {Arm::None, Arm::Random, Arm::Vanilla, Arm::TrainedPgm};
        for (jscc::Modality q : cfg.modalities) {
            const double t0 = now_s();
            jscc::CodecSpec spec{q, cfg.constellations.front(), cfg.rate_denoms.front(),
                                 jscc::ArchVariant::Target};
            auto target = load_codec(cfg, spec);
            freeze_codec(*target);
            const auto sweep = sweep_modality(*target, eval_data, art, sc, arms);
            for (const auto& [psr, by_arm] : sweep.metric) {
                auto mean = [&](Arm a) {
                    double s = 0;
                    for (double v : by_arm.at(a)) s += v;
                    return s / by_arm.at(a).size();
                };
                const auto dp = degradation(q, by_arm.at(Arm::None), by_arm.at(Arm::TrainedPgm));
                const auto dv = degradation(q, by_arm.at(Arm::None), by_arm.at(Arm::Vanilla));
                const auto dr = degradation(q, by_arm.at(Arm::None), by_arm.at(Arm::Random));
                auto m = [](const std::vector<double>& v) {
                    double s = 0;
                    for (double x : v) s += x;
                    return s / v.size();
                };
                auto pval = [](const std::vector<double>& a, const std::vector<double>& b) {
                    const std::size_t n = a.size();
                    double mean = 0;
                    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
                    mean /= n;
                    double var = 0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double d = a[i] - b[i] - mean;
                        var += d * d;
                    }
                    var /= (n - 1);
                    if (var <= 0) return mean > 0 ? 0.0 : 1.0;
                    return 0.5 * std::erfc(mean / std::sqrt(var / n) / std::sqrt(2.0));
                };
                const double p1 = pval(dp, dv), p2 = pval(dv, dr);
                std::printf("%-6s psr %+5.1f none %8.4f | deg pgm %8.4f van %8.4f rnd %8.4f | "
                            "p1 %.1e p2 %.1e %s\n",
                            jscc::modality_name(q), psr, mean(Arm::None), m(dp), m(dv), m(dr), p1,
                            p2,
                            (m(dp) > m(dv) && m(dv) > m(dr) && p1 < 0.01 && p2 < 0.01) ? "ordered"
                                                                                       : "NOT-ORDERED");
            }
            std::printf("  (%.1fs)\n", now_s() - t0);
        }
        return 0;
    }

    if (what == "vc" || what == "all") {
        const double t0 = now_s();
        const auto train = harness::synth_vc(320, 100);
        const auto test = harness::synth_vc(48, 101);
        task::Classifier clf(task::TaskKind::Vc, jscc::ArchVariant::Target, 7);
        task::ClassifierTrainConfig cfg;
        cfg.epochs = 20;
        cfg.lr = 3e-3;
        cfg.seed = 0;
        const double loss = train_vc(clf, train, cfg);
        std::printf("vc: loss=%.4f acc=%.3f time=%.1fs\n", loss, vc_accuracy(clf, test), now_s() - t0);
    }
    if (what == "ave" || what == "all") {
        const double t0 = now_s();
        const auto train = harness::synth_ave(640, 200);
        const auto test = harness::synth_ave(48, 201);
        task::Classifier clf(task::TaskKind::Ave, jscc::ArchVariant::Target, 9);
        task::ClassifierTrainConfig cfg;
        cfg.epochs = 20;
        cfg.lr = 3e-3;
        cfg.seed = 0;
        const double loss = train_ave(clf, train, cfg);
        std::printf("ave: loss=%.4f acc=%.3f time=%.1fs\n", loss, ave_accuracy(clf, test), now_s() - t0);
        {
            task::ClassifierTrainConfig ma = cfg; ma.mute_audio = true;
            task::Classifier io(task::TaskKind::Ave, jscc::ArchVariant::Target, 9);
            train_ave(io, train, ma);
            std::printf("  image-only acc=%.3f\n", ave_accuracy(io, test, true, false));
            task::ClassifierTrainConfig mi = cfg; mi.mute_image = true;
            task::Classifier ao(task::TaskKind::Ave, jscc::ArchVariant::Target, 9);
            train_ave(ao, train, mi);
            std::printf("  audio-only acc=%.3f\n", ave_accuracy(ao, test, false, true));
        }
    }
    if (what == "image-clean") {
        const double t0 = now_s();
        jscc::CodecSpec spec;
        spec.q = jscc::Modality::Image;
        spec.c = phy::Constellation::Qam16;
        jscc::JsccCodec codec(spec, 42);
        jscc::TrainConfig cfg;
        cfg.channel.snr_db = 40.0;
        cfg.epochs = 24;
        cfg.lr = 3e-3;
        cfg.seed = 0;
        cfg.ofdm = phy::default_ofdm_config();
        auto train = jscc::image_dataset(harness::synth_images(128, 300));
        auto val = jscc::image_dataset(harness::synth_images(24, 301));
        const auto rep = train_jscc(codec, train, val, cfg);
        std::printf("image-clean: init=%.5f final=%.5f ratio=%.3f time=%.1fs\n", rep.initial_val_loss,
                    rep.final_val_loss, rep.final_val_loss / rep.initial_val_loss, now_s() - t0);
    }
    if (what == "image" || what == "all") {
        const double t0 = now_s();
        jscc::CodecSpec spec;
        spec.q = jscc::Modality::Image;
        spec.c = phy::Constellation::Qam16;
        jscc::JsccCodec codec(spec, 42);
        jscc::TrainConfig cfg;
        cfg.epochs = 44;
        cfg.batch = 8;
        cfg.lr = 3e-3;
        cfg.seed = 0;
        cfg.ofdm = phy::default_ofdm_config();
        auto train = jscc::image_dataset(harness::synth_images(160, 300));
        auto val = jscc::image_dataset(harness::synth_images(24, 301));
        const auto rep = train_jscc(codec, train, val, cfg);
        std::printf("image: init=%.5f final=%.5f ratio=%.3f time=%.1fs\n", rep.initial_val_loss,
                    rep.final_val_loss, rep.final_val_loss / rep.initial_val_loss, now_s() - t0);
        for (double v : rep.epoch_val_losses) std::printf("  %.5f", v);
        std::printf("\n");
        jscc::TrainConfig clean = cfg;
        clean.channel.snr_db = 40.0;
        std::printf("  clean-channel val=%.5f\n", jscc::validation_loss(codec, val, clean));
    }
    if (what == "speech" || what == "all") {
        const double t0 = now_s();
        jscc::CodecSpec spec;
        spec.q = jscc::Modality::Speech;
        spec.c = phy::Constellation::Qam16;
        jscc::JsccCodec codec(spec, 42);
        jscc::TrainConfig cfg;
        cfg.epochs = 36;
        cfg.batch = 8;
        cfg.lr = 3e-3;
        cfg.seed = 0;
        cfg.ofdm = phy::default_ofdm_config();
        auto train = jscc::speech_dataset(harness::synth_speech(160, 300));
        auto val = jscc::speech_dataset(harness::synth_speech(24, 301));
        const auto rep = train_jscc(codec, train, val, cfg);
        std::printf("speech: init=%.5f final=%.5f ratio=%.3f time=%.1fs\n", rep.initial_val_loss,
                    rep.final_val_loss, rep.final_val_loss / rep.initial_val_loss, now_s() - t0);
    }
    if (what == "text" || what == "all") {
        const double t0 = now_s();
        jscc::CodecSpec spec;
        spec.q = jscc::Modality::Text;
        spec.c = phy::Constellation::Qam16;
        jscc::JsccCodec codec(spec, 42);
        jscc::TrainConfig cfg;
        cfg.epochs = 200;
        cfg.batch = 8;
        cfg.lr = 3e-3;
        cfg.soft_fraction = 0.5;
        cfg.seed = 0;
        cfg.ofdm = phy::default_ofdm_config();
        auto train = jscc::text_dataset(harness::synth_text(1024, 300));
        auto val = jscc::text_dataset(harness::synth_text(64, 301));
        const auto rep = train_jscc(codec, train, val, cfg);
        std::printf("text: init=%.5f final=%.5f ratio=%.3f time=%.1fs\n", rep.initial_val_loss,
                    rep.final_val_loss, rep.final_val_loss / rep.initial_val_loss, now_s() - t0);
        for (std::size_t e = 0; e < rep.epoch_val_losses.size(); e += 10)
            std::printf("  ep%zu=%.4f", e, rep.epoch_val_losses[e]);
        std::printf("\n");
        jscc::TrainConfig clean = cfg;
        clean.channel.snr_db = 40.0;
        std::printf("  clean-channel val=%.5f\n", jscc::validation_loss(codec, val, clean));
    }
    if (what == "video" || what == "all") {
        const double t0 = now_s();
        jscc::CodecSpec spec;
        spec.q = jscc::Modality::Video;
        spec.c = phy::Constellation::Qam16;
        jscc::JsccCodec codec(spec, 42);
        {
            jscc::CodecSpec ispec = spec;
            ispec.q = jscc::Modality::Image;
            jscc::JsccCodec img(ispec, 42);
            jscc::TrainConfig icfg;
            icfg.epochs = 44;
            icfg.batch = 8;
            icfg.lr = 3e-3;
            icfg.seed = 0;
            icfg.ofdm = phy::default_ofdm_config();
            auto itrain = jscc::image_dataset(harness::synth_images(160, 300));
            auto ival = jscc::image_dataset(harness::synth_images(24, 301));
            train_jscc(img, itrain, ival, icfg);
            std::printf("  warm start copied %zu tensors\n", jscc::warm_start_from(codec, img));
        }
        jscc::TrainConfig cfg;
        cfg.epochs = 36;
        cfg.batch = 4;
        cfg.lr = 3e-3;
        cfg.seed = 0;
        cfg.ofdm = phy::default_ofdm_config();
        auto train = jscc::video_dataset(harness::synth_video_gops(64, 300));
        auto val = jscc::video_dataset(harness::synth_video_gops(8, 301));
        const auto rep = train_jscc(codec, train, val, cfg);
        std::printf("video: init=%.5f final=%.5f ratio=%.3f time=%.1fs\n", rep.initial_val_loss,
                    rep.final_val_loss, rep.final_val_loss / rep.initial_val_loss, now_s() - t0);
    }
    return 0;
}
