// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wsim/downstream.hpp"

using namespace wsim;
using namespace wsim::task;
using nn::Tensor;

TEST_CASE("margin loss direct values") {
    CHECK(loss_cls_untargeted({0.1, 0.9}, 1) == doctest::Approx(-0.8));
    CHECK(loss_cls_untargeted({0.9, 0.1}, 1) == doctest::Approx(0.8));
    CHECK(loss_cls_targeted({0.2, 0.3, 0.5}, 0) == doctest::Approx(-0.3));
    CHECK(loss_cls_targeted({0.6, 0.3, 0.1}, 0) == doctest::Approx(0.3));
    CHECK_THROWS(loss_cls_targeted({0.5, 0.5}, 7));
}

TEST_CASE("margin sign agrees with argmax accounting on random inputs") {
    RngStream rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> logits(4);
        for (auto& v : logits) v = rng.uniform(-3, 3);
        double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        std::vector<double> probs(4);
        for (int i = 0; i < 4; ++i) z += std::exp(logits[i] - mx);
        for (int i = 0; i < 4; ++i) probs[i] = std::exp(logits[i] - mx) / z;
        int arg = 0;
        for (int i = 1; i < 4; ++i)
            if (probs[i] > probs[arg]) arg = i;
        const int clean = static_cast<int>(rng.uniform_int(4));
        CHECK((loss_cls_untargeted(probs, clean) > 0.0) == (arg != clean));
        const int target = static_cast<int>(rng.uniform_int(4));
        CHECK((loss_cls_targeted(probs, target) > 0.0) == (arg == target));
    }
}

TEST_CASE("scaling all logits by a positive constant keeps the argmax") {
    RngStream rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor logits({1, 4});
        for (auto& v : logits.vec()) v = rng.uniform(-2, 2);
        nn::Tape t;
        auto probs1 = softmax_rows(t.constant(logits));
        auto probs2 = softmax_rows(scale(t.constant(logits), 3.7));
        int a1 = 0, a2 = 0;
        for (int i = 1; i < 4; ++i) {
            if (probs1.value()[i] > probs1.value()[a1]) a1 = i;
            if (probs2.value()[i] > probs2.value()[a2]) a2 = i;
        }
        CHECK(a1 == a2);
    }
}

TEST_CASE("attack success rate counts records") {
    std::vector<SuccessRecord> all_flip(4), none_flip(4), mixed(4);
    for (auto& r : all_flip) r.loss = 0.5;
    for (auto& r : none_flip) r.loss = -0.5;
    for (int i = 0; i < 4; ++i) mixed[i].loss = i < 3 ? 0.1 : -0.1;
    CHECK(attack_success_rate(all_flip) == 1.0);
    CHECK(attack_success_rate(none_flip) == 0.0);
    CHECK(attack_success_rate(mixed) == doctest::Approx(0.75));
    CHECK_THROWS(attack_success_rate({}));
}

TEST_CASE("classifier probabilities sum to one and ties pick the lowest class") {
    Classifier clf(TaskKind::Vc, jscc::ArchVariant::Target, 5);
    RngStream rng(3);
    std::vector<Tensor> frames;
    for (std::size_t f = 0; f < harness::kClipFrames; ++f) {
        Tensor fr({3, 32, 32});
        for (auto& v : fr.vec()) v = rng.uniform();
        frames.push_back(std::move(fr));
    }
    const auto res = clf.classify_clip(frames);
    double s = 0.0;
    for (double p : res.probs) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    // identical frames have zero motion, so the head sees zeros and all
    // classes tie; the tie rule picks class 0
    std::vector<Tensor> still(harness::kClipFrames, frames[0]);
    CHECK(clf.classify_clip(still).cls == 0);
}

TEST_CASE("vc training reaches high accuracy on the synthetic motion task") {
    const auto train = harness::synth_vc(320, 100);
    const auto test = harness::synth_vc(48, 101);
    Classifier clf(TaskKind::Vc, jscc::ArchVariant::Target, 7);
    ClassifierTrainConfig cfg;
    cfg.epochs = 20;
    cfg.lr = 3e-3;
    cfg.seed = 0;
    train_vc(clf, train, cfg);
    CHECK(vc_accuracy(clf, test) >= 0.9);
}

TEST_CASE("ave fusion beats both single-modality ablations") {
    const auto train = harness::synth_ave(640, 200);
    const auto test = harness::synth_ave(48, 201);
    ClassifierTrainConfig cfg;
    cfg.epochs = 20;
    cfg.lr = 3e-3;
    cfg.seed = 0;

    Classifier fused(TaskKind::Ave, jscc::ArchVariant::Target, 9);
    train_ave(fused, train, cfg);
    const double acc_fused = ave_accuracy(fused, test);

    ClassifierTrainConfig mute_a = cfg;
    mute_a.mute_audio = true;
    Classifier img_only(TaskKind::Ave, jscc::ArchVariant::Target, 9);
    train_ave(img_only, train, mute_a);
    const double acc_img = ave_accuracy(img_only, test, true, false);

    ClassifierTrainConfig mute_i = cfg;
    mute_i.mute_image = true;
    Classifier aud_only(TaskKind::Ave, jscc::ArchVariant::Target, 9);
    train_ave(aud_only, train, mute_i);
    const double acc_aud = ave_accuracy(aud_only, test, false, true);

    CHECK(acc_fused >= 0.9);
    CHECK(acc_fused > std::max(acc_img, acc_aud));
}

TEST_CASE("classifier training is deterministic in the seed") {
    const auto train = harness::synth_vc(24, 300);
    ClassifierTrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 4;
    Classifier a(TaskKind::Vc, jscc::ArchVariant::Target, 11);
    Classifier b(TaskKind::Vc, jscc::ArchVariant::Target, 11);
    train_vc(a, train, cfg);
    train_vc(b, train, cfg);
    const auto ta = a.params().to_tensors();
    const auto tb = b.params().to_tensors();
    for (const auto& [name, t] : ta)
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == tb.at(name)[i]);
}

TEST_CASE("surrogate classifier variants differ from the target") {
    Classifier t(TaskKind::Vc, jscc::ArchVariant::Target, 1);
    Classifier n(TaskKind::Vc, jscc::ArchVariant::Narrow, 1);
    Classifier w(TaskKind::Vc, jscc::ArchVariant::Wide, 1);
    CHECK(t.arch_descriptor() != n.arch_descriptor());
    CHECK(t.arch_descriptor() != w.arch_descriptor());
}
