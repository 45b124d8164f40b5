// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_DOWNSTREAM_HPP
#define WSIM_DOWNSTREAM_HPP

#include <string>
#include <vector>

#include "wsim/dataset.hpp"
#include "wsim/jscc.hpp"
#include "wsim/layers.hpp"

namespace wsim::task {

enum class TaskKind : int { Vc = 0, Ave = 1 };
const char* task_name(TaskKind k);

struct ClassifyResult {
    std::vector<double> probs;
    int cls = 0; // argmax, lowest index on ties
};

// Toy classifiers for the two downstream tasks: motion-direction video
// classification over 8-frame clips and joint shape/tone audio-visual event
// recognition. Target and surrogate variants differ in width and depth.
class Classifier {
public:
    Classifier(TaskKind task, jscc::ArchVariant variant, std::uint64_t init_seed);

    TaskKind task() const { return task_; }
    jscc::ArchVariant variant() const { return variant_; }
    int n_classes() const { return 4; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    std::string arch_descriptor() const { return arch_descriptor_; }

    // VC: frames as vars [3,32,32] each (kClipFrames of them)
    nn::Var build_vc(nn::Tape& t, const std::vector<nn::Var>& frames) const;
    // AVE: image [3,32,32] and framed speech [1,16,64]
    nn::Var build_ave(nn::Tape& t, nn::Var image, nn::Var speech_framed) const;

    ClassifyResult classify_clip(const std::vector<nn::Tensor>& frames) const;
    ClassifyResult classify_pair(const nn::Tensor& image, const nn::Tensor& speech_framed) const;

    void freeze();

private:
    TaskKind task_;
    jscc::ArchVariant variant_;
    nn::ParamStore params_;
    std::string arch_descriptor_;
    std::size_t width_ = 8;
    int depth_ = 3;

    std::vector<nn::Conv2dLayer> convs_;        // vc trunk / ave image branch
    std::vector<nn::Conv2dLayer> audio_convs_;  // ave audio branch
    nn::LinearLayer img_fc_, aud_fc_, head_;
};

struct ClassifierTrainConfig {
    int epochs = 8;
    std::size_t batch = 8;
    double lr = 2e-3;
    std::uint64_t seed = 0;
    // AVE ablations: zero out one branch during training and inference
    bool mute_audio = false;
    bool mute_image = false;
};

double train_vc(Classifier& clf, const std::vector<harness::LabeledClip>& train,
                const ClassifierTrainConfig& cfg);
double train_ave(Classifier& clf, const std::vector<harness::AvePair>& train,
                 const ClassifierTrainConfig& cfg);

double vc_accuracy(const Classifier& clf, const std::vector<harness::LabeledClip>& data);
double ave_accuracy(const Classifier& clf, const std::vector<harness::AvePair>& data,
                    bool mute_audio = false, bool mute_image = false);

// Eq.-style margin losses on post-softmax probabilities. The untargeted loss
// is positive exactly when the prediction moved away from the no-attack
// class; the targeted one is positive exactly when the target class wins.
double loss_cls_untargeted(const std::vector<double>& probs_attacked, int clean_class);
double loss_cls_targeted(const std::vector<double>& probs_attacked, int target_class);

nn::Var margin_untargeted_var(nn::Tape& t, nn::Var probs, int clean_class);
nn::Var margin_targeted_var(nn::Tape& t, nn::Var probs, int target_class);

struct SuccessRecord {
    double loss = 0.0;   // margin value
    bool targeted = false;
    bool argmax_hit = false; // targeted: argmax == target
};

double attack_success_rate(const std::vector<SuccessRecord>& records);

} // namespace wsim::task

#endif
