// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/pgm.hpp"

#include <cmath>
#include <stdexcept>

namespace wsim::attack {

using nn::Tape;
using nn::Var;

Pgm::Pgm(const PgmConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    RngStream init(init_seed);
    const std::size_t c = cfg_.base_channels;
    fc_ = nn::LinearLayer::make(params_, "fc", cfg_.latent_dim, c * cfg_.n_g * cfg_.n_fft, init);
    for (int b = 0; b < cfg_.res_blocks; ++b) {
        res_.push_back(nn::Conv2dLayer::make(params_, "res" + std::to_string(b) + ".a", c, c, 3, 1,
                                             nn::PadMode::Same, init));
        res_.push_back(nn::Conv2dLayer::make(params_, "res" + std::to_string(b) + ".b", c, c, 3, 1,
                                             nn::PadMode::Same, init));
    }
    out_ = nn::Conv2dLayer::make(params_, "out", c, 2, 3, 1, nn::PadMode::Same, init);
    // static positive gain map over the grid; the latent-conditioned pattern
    // modulates it, and it trains as directly as a bare perturbation grid
    envelope_ = &params_.create("env", {cfg_.n_g, cfg_.n_fft, 2});
    envelope_->value.fill(0.55); // softplus(0.55) is about 1
}

std::string Pgm::arch_descriptor() const {
    return "pgm:z" + std::to_string(cfg_.latent_dim) + ":c" + std::to_string(cfg_.base_channels) +
           ":r" + std::to_string(cfg_.res_blocks) + ":n" + std::to_string(cfg_.n_g) + "|" +
           std::to_string(params_.scalar_count());
}

nn::Var Pgm::build(Tape& t, Var z) const {
    if (z.shape() != std::vector<std::size_t>{cfg_.latent_dim})
        throw std::invalid_argument("pgm: latent shape mismatch");
    const std::size_t c = cfg_.base_channels;
    Var x = fc_(t, reshape(z, {1, cfg_.latent_dim}));
    x = relu(reshape(x, {c, cfg_.n_g, cfg_.n_fft}));
    for (std::size_t b = 0; b + 1 < res_.size(); b += 2) {
        Var h = res_[b + 1](t, relu(res_[b](t, x)));
        x = add(x, h);
    }
    // rms-normalized output: the downstream power remapping makes the
    // absolute scale meaningless, and a fixed scale keeps the direction
    // trainable everywhere
    Var out = out_(t, x);
    Var inv_rms = recip(sqrt_(add_scalar(mean(mul(out, out)), 1e-8)));
    Var normed = channels_last(reshape(scale_by(reshape(out, {2 * cfg_.n_g * cfg_.n_fft}), inv_rms),
                                       {2, cfg_.n_g, cfg_.n_fft})); // [n_g, n_fft, 2]
    // softplus keeps the envelope positive
    Var gain = log_(add_scalar(exp_(t.param(*envelope_)), 1.0));
    return mul(normed, gain);
}

nn::Tensor Pgm::draw_latent(RngStream& rng) const {
    nn::Tensor z({cfg_.latent_dim});
    for (auto& v : z.vec()) v = rng.uniform();
    return z;
}

phy::SymbolGrid Pgm::generate(const nn::Tensor& z) const {
    Tape t;
    Var out = build(t, t.constant(z));
    return phy::SymbolGrid::from_tensor(out.value());
}

Discriminator::Discriminator(std::size_t hidden, std::uint64_t init_seed) {
    RngStream init(init_seed);
    l1_ = nn::LinearLayer::make(params_, "l1", 96, hidden, init);
    l2_ = nn::LinearLayer::make(params_, "l2", hidden, 1, init);
}

nn::Var Discriminator::score(Tape& t, Var grid) const {
    const auto& s = grid.shape();
    if (s.size() != 3 || s[1] != 48 || s[2] != 2)
        throw std::invalid_argument("discriminator: input must be [rows,48,2]");
    Var rows = reshape(grid, {s[0], 96});
    Var logits = l2_(t, relu(l1_(t, rows)));
    return sigmoid(mean(logits));
}

double Discriminator::score(const phy::SymbolGrid& grid) const {
    Tape t;
    return score(t, t.constant(grid.to_tensor())).value()[0];
}

void Discriminator::set_trainable(bool trainable) {
    for (nn::Parameter* p : params_.all()) p->trainable = trainable;
}

static Var clamp_prob(Var p) {
    // keep log() away from 0 and 1
    return add_scalar(scale(p, 1.0 - 2e-7), 1e-7);
}

nn::Var discrimination_loss_var(Tape& t, const Discriminator& d, Var clean, Var perturbed) {
    Var pc = clamp_prob(d.score(t, clean));
    Var pp = clamp_prob(d.score(t, perturbed));
    return add(log_(pc), log_(sub(t.constant_scalar(1.0), pp)));
}

double discrimination_loss(const Discriminator& d, const phy::SymbolGrid& clean,
                           const phy::SymbolGrid& perturbed) {
    Tape t;
    return discrimination_loss_var(t, d, t.constant(clean.to_tensor()),
                                   t.constant(perturbed.to_tensor()))
        .value()[0];
}

nn::Var diversity_loss_var(Tape& t, Var delta_a, Var delta_b) {
    (void)t;
    return mean_abs(sub(delta_a, delta_b));
}

double diversity_loss(const phy::SymbolGrid& a, const phy::SymbolGrid& b) {
    Tape t;
    return diversity_loss_var(t, t.constant(a.to_tensor()), t.constant(b.to_tensor())).value()[0];
}

} // namespace wsim::attack
