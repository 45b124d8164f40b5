// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/dataset.hpp"

#include <algorithm>
#include <cmath>

namespace wsim::harness {

using nn::Tensor;

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// smooth low-frequency background: a few random cosine gratings per channel
Tensor render_background(RngStream& rng, double amplitude, double base_lo = 0.2,
                         double base_hi = 0.8) {
    Tensor img({3, kImageSide, kImageSide});
    for (std::size_t c = 0; c < 3; ++c) {
        const double base = rng.uniform(base_lo, base_hi);
        double fx[2], fy[2], ph[2], am[2];
        for (int g = 0; g < 2; ++g) {
            fx[g] = rng.uniform(-2.0, 2.0) / kImageSide;
            fy[g] = rng.uniform(-2.0, 2.0) / kImageSide;
            ph[g] = rng.uniform(0.0, 2.0 * M_PI);
            am[g] = rng.uniform(0.2, 1.0) * amplitude;
        }
        for (std::size_t y = 0; y < kImageSide; ++y)
            for (std::size_t x = 0; x < kImageSide; ++x) {
                double v = base;
                for (int g = 0; g < 2; ++g)
                    v += am[g] * std::cos(2.0 * M_PI * (fx[g] * x + fy[g] * y) + ph[g]);
                img[(c * kImageSide + y) * kImageSide + x] = clamp01(v);
            }
    }
    return img;
}

void paint_rect(Tensor& img, int cx, int cy, int half, const double rgb[3]) {
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
            const int x = ((cx + dx) % static_cast<int>(kImageSide) + kImageSide) % kImageSide;
            const int y = ((cy + dy) % static_cast<int>(kImageSide) + kImageSide) % kImageSide;
            for (std::size_t c = 0; c < 3; ++c)
                img[(c * kImageSide + y) * kImageSide + x] = clamp01(rgb[c]);
        }
}

void paint_disk(Tensor& img, int cx, int cy, int radius, const double rgb[3]) {
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy > radius * radius) continue;
            const int x = ((cx + dx) % static_cast<int>(kImageSide) + kImageSide) % kImageSide;
            const int y = ((cy + dy) % static_cast<int>(kImageSide) + kImageSide) % kImageSide;
            for (std::size_t c = 0; c < 3; ++c)
                img[(c * kImageSide + y) * kImageSide + x] = clamp01(rgb[c]);
        }
}

Tensor render_tone(RngStream& rng, bool high_band) {
    Tensor s({kSpeechSamples});
    const int n_comp = 1 + static_cast<int>(rng.uniform_int(2));
    for (int c = 0; c < n_comp; ++c) {
        // cycles over the whole window; the two bands do not overlap
        const double cycles = high_band ? rng.uniform(24.0, 48.0) : rng.uniform(6.0, 14.0);
        const double amp = rng.uniform(0.25, 0.55);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        for (std::size_t n = 0; n < kSpeechSamples; ++n)
            s[n] += amp * std::sin(2.0 * M_PI * cycles * n / kSpeechSamples + phase);
    }
    double peak = 0.0;
    for (std::size_t n = 0; n < kSpeechSamples; ++n) {
        s[n] += rng.gaussian(0.0, 0.02);
        peak = std::max(peak, std::fabs(s[n]));
    }
    // rescale instead of clipping so the tanh output head never saturates
    if (peak > 0.9)
        for (std::size_t n = 0; n < kSpeechSamples; ++n) s[n] *= 0.9 / peak;
    return s;
}

} // namespace

VideoClip render_motion_clip(std::size_t n_frames, int direction, RngStream& rng) {
    VideoClip clip;
    const Tensor bg = render_background(rng, 0.18, 0.15, 0.5);
    int cx = 4 + static_cast<int>(rng.uniform_int(kImageSide - 8));
    int cy = 4 + static_cast<int>(rng.uniform_int(kImageSide - 8));
    const int speed = 2 + static_cast<int>(rng.uniform_int(2));
    const int half = 3 + static_cast<int>(rng.uniform_int(2));
    double rgb[3];
    for (double& v : rgb) v = rng.uniform(0.8, 1.0);
    const int dx = direction == 0 ? speed : direction == 1 ? -speed : 0;
    const int dy = direction == 2 ? speed : direction == 3 ? -speed : 0;
    for (std::size_t f = 0; f < n_frames; ++f) {
        Tensor frame = bg;
        paint_rect(frame, cx, cy, half, rgb);
        clip.frames.push_back(std::move(frame));
        cx += dx;
        cy += dy;
    }
    return clip;
}

std::vector<Tensor> synth_images(std::size_t size, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<Tensor> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        RngStream item = rng.derive(i);
        Tensor img = render_background(item, 0.4);
        double rgb[3];
        for (double& v : rgb) v = item.uniform(0.0, 1.0);
        paint_rect(img, static_cast<int>(item.uniform_int(kImageSide)),
                   static_cast<int>(item.uniform_int(kImageSide)),
                   2 + static_cast<int>(item.uniform_int(4)), rgb);
        out.push_back(std::move(img));
    }
    return out;
}

std::vector<VideoClip> synth_video_gops(std::size_t size, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<VideoClip> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        RngStream item = rng.derive(i);
        const int dir = static_cast<int>(i % kMotionClasses);
        out.push_back(render_motion_clip(kGopSize, dir, item));
    }
    return out;
}

std::vector<Tensor> synth_speech(std::size_t size, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<Tensor> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        RngStream item = rng.derive(i);
        out.push_back(render_tone(item, i % 2 == 1));
    }
    return out;
}

std::vector<std::vector<int>> synth_text(std::size_t size, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<std::vector<int>> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        RngStream item = rng.derive(i);
        const std::size_t len = 4 + item.uniform_int(9); // 4..12
        std::vector<int> sentence(len);
        for (auto& tok : sentence) {
            // zipf-ish skew so the codec has priors to learn
            const double u = item.uniform();
            const int content = static_cast<int>(60.0 * u * u);
            tok = 3 + std::min(60, content);
        }
        out.push_back(std::move(sentence));
    }
    return out;
}

std::vector<LabeledClip> synth_vc(std::size_t size, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<LabeledClip> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        RngStream item = rng.derive(i);
        LabeledClip rec;
        rec.label = static_cast<int>(i % kMotionClasses); // balanced within +-1
        rec.clip = render_motion_clip(kClipFrames, rec.label, item);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<AvePair> synth_ave(std::size_t size, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<AvePair> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        RngStream item = rng.derive(i);
        AvePair rec;
        rec.label = static_cast<int>(i % kAveClasses);
        const int shape = rec.label / 2; // 0 square, 1 disk
        const int tone = rec.label % 2;  // 0 low, 1 high
        rec.image = render_background(item, 0.10, 0.15, 0.45);
        double rgb[3];
        for (double& v : rgb) v = item.uniform(0.75, 1.0);
        const int cx = 8 + static_cast<int>(item.uniform_int(kImageSide - 16));
        const int cy = 8 + static_cast<int>(item.uniform_int(kImageSide - 16));
        if (shape == 0)
            paint_rect(rec.image, cx, cy, 4, rgb);
        else
            paint_disk(rec.image, cx, cy, 7, rgb);
        rec.speech = render_tone(item, tone == 1);
        out.push_back(std::move(rec));
    }
    return out;
}

} // namespace wsim::harness
