// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "wsim/defense.hpp"
#include "wsim/metrics.hpp"

using namespace wsim;
using namespace wsim::defense;
using attack::Pgm;
using attack::PgmConfig;
using attack::TransformParams;
using nn::Tensor;
using phy::cd;
using phy::SymbolGrid;

namespace {

PgmConfig tiny_cfg() {
    PgmConfig cfg;
    cfg.latent_dim = 8;
    cfg.n_g = 2;
    cfg.n_fft = 16;
    cfg.base_channels = 3;
    cfg.res_blocks = 1;
    return cfg;
}

SymbolGrid random_grid(std::size_t rows, std::size_t cols, RngStream& rng) {
    SymbolGrid g(rows, cols);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return g;
}

} // namespace

TEST_CASE("synced oracle cancels the attack exactly") {
    RngStream rng(1);
    Pgm attacker(tiny_cfg(), 2);
    const Tensor z = attacker.draw_latent(rng);
    TransformParams tau;
    tau.mu = 2;
    tau.zeta = 7;
    tau.epsilon = 0.4;
    tau.phi = 1.1;
    tau.delta_t = 2;
    const SymbolGrid delta = attacker.generate(z);
    const SymbolGrid pert = attack::apply_transform(delta, tau);
    std::vector<cd> ha(16);
    for (auto& h : ha) h = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const SymbolGrid clean = random_grid(3, 16, rng);
    SymbolGrid received = clean;
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t k = 0; k < 16; ++k) received.at(r, k) += ha[k] * pert.at(r, k);

    RngStream guess(9);
    const SymbolGrid defended = oracle_defend(received, delta, tau, ha, true, guess, 20);
    double residual = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) residual += std::norm(defended[i] - clean[i]);
    CHECK(residual <= 1e-18);
}

TEST_CASE("a pi phase error doubles the perturbation instead of removing it") {
    RngStream rng(2);
    Pgm attacker(tiny_cfg(), 3);
    const Tensor z = attacker.draw_latent(rng);
    TransformParams tau;
    tau.mu = 2;
    tau.zeta = 11;
    tau.epsilon = 0.5;
    tau.phi = 0.3;
    tau.delta_t = 4;
    const SymbolGrid pert = attack::apply_transform(attacker.generate(z), tau);
    TransformParams wrong = tau;
    wrong.phi = tau.phi + M_PI;
    const SymbolGrid guess = attack::apply_transform(attacker.generate(z), wrong);
    std::vector<cd> ha(16, cd{1.0, 0.0});
    double pert_power = 0.0, residual = 0.0;
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t k = 0; k < 16; ++k) {
            const cd a = ha[k] * pert.at(r, k);
            const cd sub = ha[k] * guess.at(r, k);
            pert_power += std::norm(a);
            residual += std::norm(a - sub);
        }
    CHECK(residual == doctest::Approx(4.0 * pert_power).epsilon(1e-9));
}

TEST_CASE("unsynced oracle leaves strictly positive residual on average") {
    RngStream rng(3);
    Pgm attacker(tiny_cfg(), 4);
    std::vector<cd> ha(16, cd{1.0, 0.0});
    RngStream guess(10);
    double total_residual = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor z = attacker.draw_latent(rng);
        TransformParams tau = attack::draw_tau(rng, 2, 0.3, 20);
        const SymbolGrid pert = attack::apply_transform(attacker.generate(z), tau);
        const SymbolGrid clean = random_grid(3, 16, rng);
        SymbolGrid received = clean;
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t k = 0; k < 16; ++k) received.at(r, k) += ha[k] * pert.at(r, k);
        const SymbolGrid defended =
            oracle_defend(received, attacker.generate(z), tau, ha, false, guess, 20);
        for (std::size_t i = 0; i < clean.size(); ++i)
            total_residual += std::norm(defended[i] - clean[i]);
    }
    CHECK(total_residual > 0.0);
}

TEST_CASE("perturbation subtraction with the attacker's own draw cancels exactly") {
    RngStream rng(4);
    Pgm shared(tiny_cfg(), 5);
    const Tensor z = shared.draw_latent(rng);
    TransformParams tau = attack::draw_tau(rng, 2, 0.4, 20);
    std::vector<cd> ha(16);
    for (auto& h : ha) h = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const SymbolGrid pert = attack::apply_transform(shared.generate(z), tau);
    const SymbolGrid clean = random_grid(4, 16, rng);
    SymbolGrid received = clean;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t k = 0; k < 16; ++k) received.at(r, k) += ha[k] * pert.at(r, k);
    const SymbolGrid defended = perturbation_subtract(received, shared, z, tau, ha);
    for (std::size_t i = 0; i < clean.size(); ++i) CHECK(std::abs(defended[i] - clean[i]) < 1e-12);
}

TEST_CASE("a silent defender generator leaves the signal untouched") {
    Pgm mute(tiny_cfg(), 6);
    for (nn::Parameter* p : mute.params().all()) p->value.fill(0.0);
    RngStream rng(5);
    const Tensor z = mute.draw_latent(rng);
    TransformParams tau = attack::draw_tau(rng, 2, 0.4, 20);
    const SymbolGrid received = random_grid(2, 16, rng);
    const std::vector<cd> ha(16, cd{1.0, 0.0});
    const SymbolGrid defended = perturbation_subtract(received, mute, z, tau, ha);
    for (std::size_t i = 0; i < received.size(); ++i) CHECK(defended[i] == received[i]);
}

TEST_CASE("independent defender subtraction never reduces mean residual power") {
    RngStream rng(6);
    Pgm attacker(tiny_cfg(), 7);
    Pgm defender(tiny_cfg(), 8); // same architecture, different parameters
    CHECK(attacker.arch_descriptor() == defender.arch_descriptor());
    std::vector<cd> ha(16, cd{1.0, 0.0});
    double attack_power = 0.0, residual_power = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor z = attacker.draw_latent(rng);
        TransformParams tau = attack::draw_tau(rng, 2, 0.5, 20);
        const SymbolGrid pert = attack::apply_transform(attacker.generate(z), tau);
        const SymbolGrid clean = random_grid(2, 16, rng);
        SymbolGrid received = clean;
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t k = 0; k < 16; ++k) received.at(r, k) += ha[k] * pert.at(r, k);
        const Tensor z_def = defender.draw_latent(rng);
        TransformParams tau_def = attack::draw_tau(rng, 2, 0.5, 20);
        const SymbolGrid defended = perturbation_subtract(received, defender, z_def, tau_def, ha);
        for (std::size_t i = 0; i < clean.size(); ++i) {
            attack_power += std::norm(received[i] - clean[i]);
            residual_power += std::norm(defended[i] - clean[i]);
        }
    }
    CHECK(residual_power >= attack_power);
}

TEST_CASE("detector thresholds and training") {
    RngStream rng(7);
    // separable toy corpus: clean grids centered at zero, perturbed offset
    std::vector<SymbolGrid> clean, pert;
    for (int i = 0; i < 60; ++i) {
        SymbolGrid c(2, 48), p(2, 48);
        for (std::size_t k = 0; k < c.size(); ++k) {
            c[k] = {rng.gaussian(0.0, 0.3), rng.gaussian(0.0, 0.3)};
            p[k] = {rng.gaussian(0.5, 0.3), rng.gaussian(-0.4, 0.3)};
        }
        clean.push_back(c);
        pert.push_back(p);
    }
    Detector det(16, 8);
    CHECK_THROWS(train_detector(det, {}, pert, {}));
    DetectorTrainConfig cfg;
    cfg.epochs = 12;
    train_detector(det, clean, pert, cfg);
    CHECK(detector_accuracy(det, clean, pert) > 0.9);

    det.threshold = 0.0;
    CHECK(det.flagged(clean[0]));
    CHECK(det.flagged(pert[0]));
    det.threshold = 1.0 + 1e-9;
    CHECK(!det.flagged(clean[0]));
    CHECK(!det.flagged(pert[0]));
    det.threshold = 0.5;

    // fine-tuning on the combined corpus must not lose training accuracy
    const double before = detector_accuracy(det, clean, pert);
    fine_tune(det, clean, pert, cfg);
    CHECK(detector_accuracy(det, clean, pert) >= before - 1e-12);
}

TEST_CASE("detector scores reproduce the metrics module's auc") {
    RngStream rng(9);
    std::vector<SymbolGrid> clean, pert;
    for (int i = 0; i < 40; ++i) {
        SymbolGrid c(1, 48), p(1, 48);
        for (std::size_t k = 0; k < c.size(); ++k) {
            c[k] = {rng.gaussian(0.0, 0.4), rng.gaussian(0.0, 0.4)};
            p[k] = {rng.gaussian(0.3, 0.4), rng.gaussian(0.0, 0.4)};
        }
        clean.push_back(c);
        pert.push_back(p);
    }
    Detector det(8, 10);
    DetectorTrainConfig cfg;
    cfg.epochs = 8;
    train_detector(det, clean, pert, cfg);
    std::vector<double> pos, neg;
    for (const auto& g : pert) pos.push_back(det.score(g));
    for (const auto& g : clean) neg.push_back(det.score(g));
    const double auc = wsim::metrics::auc_roc(pos, neg);

    // independent oracle: trapezoidal integration over the empirical roc
    std::vector<double> thresholds = pos;
    thresholds.insert(thresholds.end(), neg.begin(), neg.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::vector<std::pair<double, double>> roc; // (fpr, tpr), threshold above each point
    roc.emplace_back(1.0, 1.0);
    for (double th : thresholds) {
        double tp = 0, fp = 0;
        for (double s : pos)
            if (s > th) ++tp;
        for (double s : neg)
            if (s > th) ++fp;
        roc.emplace_back(fp / neg.size(), tp / pos.size());
    }
    roc.emplace_back(0.0, 0.0);
    std::sort(roc.begin(), roc.end());
    double area = 0.0;
    for (std::size_t i = 1; i < roc.size(); ++i)
        area += (roc[i].first - roc[i - 1].first) * 0.5 * (roc[i].second + roc[i - 1].second);
    CHECK(auc == doctest::Approx(area).epsilon(1e-6));
}

TEST_CASE("adversarial training grows the dataset and trades clean accuracy") {
    // small image codec hardened for a few epochs
    jscc::CodecSpec spec;
    spec.q = jscc::Modality::Image;
    spec.c = phy::Constellation::Qam16;
    spec.arch = jscc::ArchVariant::Narrow;
    jscc::JsccCodec baseline(spec, 21);
    jscc::TrainConfig tc;
    tc.epochs = 24; // converged baseline, so hardening can only trade off
    tc.batch = 8;
    tc.lr = 3e-3;
    tc.seed = 2;
    tc.ofdm = phy::default_ofdm_config();
    auto train = jscc::image_dataset(harness::synth_images(48, 500));
    auto val = jscc::image_dataset(harness::synth_images(12, 501));
    jscc::train_jscc(baseline, train, val, tc);

    jscc::JsccCodec hardened(spec, 21);
    hardened.params().load_tensors(baseline.params().to_tensors());

    Pgm defender_pgm(attack::PgmConfig{}, 31);
    AdversarialTrainConfig ac;
    ac.epochs = 3;
    ac.batch = 8;
    ac.ofdm = tc.ofdm;
    ac.channel = tc.channel;
    ac.seed = 11;
    const auto report = adversarial_train(hardened, train, val, defender_pgm, ac);

    REQUIRE(report.dataset_sizes.size() == 3);
    CHECK(report.initial_dataset_size == 48);
    for (std::size_t e = 0; e < report.dataset_sizes.size(); ++e)
        CHECK(report.dataset_sizes[e] == 48 * (e + 2)); // one batch-set per epoch

    jscc::TrainConfig clean_cfg = tc;
    clean_cfg.channel.snr_db = 40.0;
    const double base_clean = jscc::validation_loss(baseline, val, clean_cfg);
    CHECK(report.clean_val_loss >= base_clean - 1e-9);

    // determinism
    jscc::JsccCodec hardened2(spec, 21);
    hardened2.params().load_tensors(baseline.params().to_tensors());
    adversarial_train(hardened2, train, val, defender_pgm, ac);
    const auto ta = hardened.params().to_tensors();
    const auto tb = hardened2.params().to_tensors();
    for (const auto& [name, t] : ta)
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == tb.at(name)[i]);
}
