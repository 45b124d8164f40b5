// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_DATASET_HPP
#define WSIM_DATASET_HPP

#include <vector>

#include "wsim/rng.hpp"
#include "wsim/tensor.hpp"

namespace wsim::harness {

// Procedural desk-scale stand-ins for the full datasets. Everything is
// deterministic in the seed; sizes and shapes are fixed project-wide:
// images 3x32x32 in [0,1], speech 1024 samples in [-1,1], text sentences of
// 4..12 content tokens over a 64-token vocabulary, video GOPs of 4 frames,
// classification clips of 8 frames over 4 motion classes.

inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kSpeechSamples = 1024;
inline constexpr std::size_t kGopSize = 4;
inline constexpr std::size_t kClipFrames = 8;
inline constexpr int kMotionClasses = 4;
inline constexpr int kAveClasses = 4;

struct VideoClip {
    std::vector<nn::Tensor> frames; // each [3,32,32]
};

struct LabeledClip {
    VideoClip clip;
    int label = 0; // motion direction: 0 right, 1 left, 2 down, 3 up
};

struct AvePair {
    nn::Tensor image;  // [3,32,32], shape cue
    nn::Tensor speech; // [1024], tone cue
    int label = 0;     // shape * 2 + tone
};

std::vector<nn::Tensor> synth_images(std::size_t size, std::uint64_t seed);
std::vector<VideoClip> synth_video_gops(std::size_t size, std::uint64_t seed);
std::vector<nn::Tensor> synth_speech(std::size_t size, std::uint64_t seed);
std::vector<std::vector<int>> synth_text(std::size_t size, std::uint64_t seed);
std::vector<LabeledClip> synth_vc(std::size_t size, std::uint64_t seed);
std::vector<AvePair> synth_ave(std::size_t size, std::uint64_t seed);

// moving-square frames shared by the video and clip generators
VideoClip render_motion_clip(std::size_t n_frames, int direction, RngStream& rng);

} // namespace wsim::harness

#endif
