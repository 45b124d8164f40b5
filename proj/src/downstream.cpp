// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wsim::task {

using nn::Tape;
using nn::Tensor;
using nn::Var;

const char* task_name(TaskKind k) { return k == TaskKind::Vc ? "vc" : "ave"; }

Classifier::Classifier(TaskKind task, jscc::ArchVariant variant, std::uint64_t init_seed)
    : task_(task), variant_(variant) {
    RngStream init(init_seed);
    switch (variant) {
        case jscc::ArchVariant::Target: width_ = 8; depth_ = 3; break;
        case jscc::ArchVariant::Narrow: width_ = 6; depth_ = 2; break;
        case jscc::ArchVariant::Wide: width_ = 10; depth_ = 4; break;
    }
    const std::size_t w = width_;
    if (task == TaskKind::Vc) {
        const std::size_t in_ch = 3 * (harness::kClipFrames - 1);
        std::size_t side = harness::kImageSide;
        std::size_t ch = in_ch;
        for (int d = 0; d < depth_; ++d) {
            const int stride = d < 3 ? 2 : 1;
            convs_.push_back(nn::Conv2dLayer::make(params_, "c" + std::to_string(d), ch, w, 3,
                                                   stride, nn::PadMode::Same, init));
            ch = w;
            if (stride == 2) side /= 2;
        }
        head_ = nn::LinearLayer::make(params_, "head", w * side * side, 4, init);
    } else {
        std::size_t ch = 3;
        for (int d = 0; d < std::min(depth_, 3); ++d) {
            const int stride = d < 2 ? 2 : 1;
            convs_.push_back(nn::Conv2dLayer::make(params_, "img.c" + std::to_string(d), ch, w, 3,
                                                   stride, nn::PadMode::Same, init));
            ch = w;
        }
        img_fc_ = nn::LinearLayer::make(params_, "img.fc", w * 8 * 8, 16, init);
        ch = 1;
        for (int d = 0; d < std::min(depth_, 3); ++d) {
            const int stride = d < 2 ? 2 : 1;
            audio_convs_.push_back(nn::Conv2dLayer::make(params_, "aud.c" + std::to_string(d), ch, w,
                                                         3, stride, nn::PadMode::Same, init));
            ch = w;
        }
        aud_fc_ = nn::LinearLayer::make(params_, "aud.fc", w * 4 * 16, 16, init);
        head_ = nn::LinearLayer::make(params_, "head", 32, 4, init);
    }
    arch_descriptor_ = std::string(task_name(task)) + ":" + jscc::variant_name(variant) + ":w" +
                       std::to_string(width_) + ":d" + std::to_string(depth_) + "|" +
                       std::to_string(params_.scalar_count());
}

nn::Var Classifier::build_vc(Tape& t, const std::vector<Var>& frames) const {
    if (task_ != TaskKind::Vc) throw std::logic_error("classifier: not a vc model");
    if (frames.size() != harness::kClipFrames)
        throw std::invalid_argument("vc classifier: clip must have " +
                                    std::to_string(harness::kClipFrames) + " frames");
    // motion stack: signed frame differences keep the direction information
    Var motion{nullptr, -1};
    for (std::size_t f = 0; f + 1 < frames.size(); ++f) {
        Var d = sub(frames[f + 1], frames[f]);
        motion = f == 0 ? d : concat0(motion, d);
    }
    Var x = motion;
    for (const auto& c : convs_) x = relu(c(t, x));
    const auto& s = x.shape();
    Var flat = reshape(x, {1, s[0] * s[1] * s[2]});
    return softmax_rows(head_(t, flat)); // [1,4]
}

nn::Var Classifier::build_ave(Tape& t, Var image, Var speech_framed) const {
    if (task_ != TaskKind::Ave) throw std::logic_error("classifier: not an ave model");
    Var x = image;
    for (const auto& c : convs_) x = relu(c(t, x));
    Var iv = relu(img_fc_(t, reshape(x, {1, x.value().size()})));
    Var a = speech_framed;
    for (const auto& c : audio_convs_) a = relu(c(t, a));
    Var av = relu(aud_fc_(t, reshape(a, {1, a.value().size()})));
    Var fused = reshape(concat0(reshape(iv, {16}), reshape(av, {16})), {1, 32});
    return softmax_rows(head_(t, fused)); // [1,4]
}

static ClassifyResult to_result(const Tensor& probs) {
    ClassifyResult r;
    r.probs.assign(probs.vec().begin(), probs.vec().end());
    r.cls = 0;
    for (std::size_t i = 1; i < r.probs.size(); ++i)
        if (r.probs[i] > r.probs[r.cls]) r.cls = static_cast<int>(i);
    return r;
}

ClassifyResult Classifier::classify_clip(const std::vector<Tensor>& frames) const {
    Tape t;
    std::vector<Var> vars;
    vars.reserve(frames.size());
    for (const auto& f : frames) vars.push_back(t.constant(f));
    return to_result(build_vc(t, vars).value());
}

ClassifyResult Classifier::classify_pair(const Tensor& image, const Tensor& speech_framed) const {
    Tape t;
    return to_result(build_ave(t, t.constant(image), t.constant(speech_framed)).value());
}

void Classifier::freeze() {
    for (nn::Parameter* p : params_.all()) p->trainable = false;
}

// ---- training ----

namespace {

Tensor onehot4(int label) {
    Tensor t({1, 4});
    t[label] = 1.0;
    return t;
}

Tensor framed_speech(const Tensor& wave) {
    jscc::FramingConfig fc;
    const Tensor m = jscc::speech_frame(wave, fc);
    return Tensor({1, fc.frame_count, fc.frame_len}, m.vec());
}

} // namespace

double train_vc(Classifier& clf, const std::vector<harness::LabeledClip>& train,
                const ClassifierTrainConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_vc: empty dataset");
    RngStream root(cfg.seed);
    nn::AdamState adam;
    adam.lr = cfg.lr;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    double last_epoch_loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream erng = root.derive("epoch").derive(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[erng.uniform_int(i)]);
        double acc_loss = 0.0;
        std::size_t in_batch = 0;
        for (std::size_t bi = 0; bi < order.size(); ++bi) {
            const auto& rec = train[order[bi]];
            Tape t;
            std::vector<Var> frames;
            for (const auto& f : rec.clip.frames) frames.push_back(t.constant(f));
            Var probs = clf.build_vc(t, frames);
            Var loss = neg(sum(mul(log_(add_scalar(probs, 1e-12)), t.constant(onehot4(rec.label)))));
            acc_loss += loss.value()[0];
            t.backward(scale(loss, 1.0 / static_cast<double>(cfg.batch)));
            if (++in_batch == cfg.batch || bi + 1 == order.size()) {
                adam_step(clf.params(), adam);
                in_batch = 0;
            }
        }
        last_epoch_loss = acc_loss / static_cast<double>(order.size());
    }
    return last_epoch_loss;
}

double train_ave(Classifier& clf, const std::vector<harness::AvePair>& train,
                 const ClassifierTrainConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_ave: empty dataset");
    RngStream root(cfg.seed);
    nn::AdamState adam;
    adam.lr = cfg.lr;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const Tensor zero_img({3, 32, 32});
    const Tensor zero_aud({1, 16, 64});
    double last_epoch_loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream erng = root.derive("epoch").derive(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[erng.uniform_int(i)]);
        double acc_loss = 0.0;
        std::size_t in_batch = 0;
        for (std::size_t bi = 0; bi < order.size(); ++bi) {
            const auto& rec = train[order[bi]];
            Tape t;
            Var img = t.constant(cfg.mute_image ? zero_img : rec.image);
            Var aud = t.constant(cfg.mute_audio ? zero_aud : framed_speech(rec.speech));
            Var probs = clf.build_ave(t, img, aud);
            Var loss = neg(sum(mul(log_(add_scalar(probs, 1e-12)), t.constant(onehot4(rec.label)))));
            acc_loss += loss.value()[0];
            t.backward(scale(loss, 1.0 / static_cast<double>(cfg.batch)));
            if (++in_batch == cfg.batch || bi + 1 == order.size()) {
                adam_step(clf.params(), adam);
                in_batch = 0;
            }
        }
        last_epoch_loss = acc_loss / static_cast<double>(order.size());
    }
    return last_epoch_loss;
}

double vc_accuracy(const Classifier& clf, const std::vector<harness::LabeledClip>& data) {
    std::vector<int> preds, labels;
    for (const auto& rec : data) {
        preds.push_back(clf.classify_clip(rec.clip.frames).cls);
        labels.push_back(rec.label);
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double ave_accuracy(const Classifier& clf, const std::vector<harness::AvePair>& data,
                    bool mute_audio, bool mute_image) {
    const Tensor zero_img({3, 32, 32});
    const Tensor zero_aud({1, 16, 64});
    std::size_t hits = 0;
    for (const auto& rec : data) {
        const auto res = clf.classify_pair(mute_image ? zero_img : rec.image,
                                           mute_audio ? zero_aud : framed_speech(rec.speech));
        if (res.cls == rec.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

// ---- margin losses ----

double loss_cls_untargeted(const std::vector<double>& probs, int clean_class) {
    if (clean_class < 0 || clean_class >= static_cast<int>(probs.size()))
        throw std::invalid_argument("loss_cls_untargeted: class out of range");
    double best = -1e308;
    for (std::size_t c = 0; c < probs.size(); ++c)
        if (static_cast<int>(c) != clean_class) best = std::max(best, probs[c]);
    return best - probs[clean_class];
}

double loss_cls_targeted(const std::vector<double>& probs, int target_class) {
    if (target_class < 0 || target_class >= static_cast<int>(probs.size()))
        throw std::invalid_argument("loss_cls_targeted: unknown class");
    double best = -1e308;
    for (std::size_t c = 0; c < probs.size(); ++c)
        if (static_cast<int>(c) != target_class) best = std::max(best, probs[c]);
    return probs[target_class] - best;
}

nn::Var margin_untargeted_var(Tape& t, Var probs, int clean_class) {
    (void)t;
    Var flat = reshape(probs, {probs.value().size()});
    return sub(max_except(flat, clean_class), at(flat, clean_class));
}

nn::Var margin_targeted_var(Tape& t, Var probs, int target_class) {
    (void)t;
    Var flat = reshape(probs, {probs.value().size()});
    return sub(at(flat, target_class), max_except(flat, target_class));
}

double attack_success_rate(const std::vector<SuccessRecord>& records) {
    if (records.empty()) throw std::invalid_argument("attack_success_rate: no records");
    std::size_t wins = 0;
    for (const auto& r : records) {
        if (r.targeted ? r.argmax_hit : (r.loss > 0.0)) ++wins;
    }
    return static_cast<double>(wins) / static_cast<double>(records.size());
}

} // namespace wsim::task
