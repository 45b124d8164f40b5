// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_PGM_HPP
#define WSIM_PGM_HPP

#include <vector>

#include "wsim/grid.hpp"
#include "wsim/layers.hpp"
#include "wsim/optim.hpp"
#include "wsim/rng.hpp"

namespace wsim::attack {

struct PgmConfig {
    std::size_t latent_dim = 128;
    std::size_t n_g = 6;          // generated OFDM symbols per draw
    std::size_t n_fft = 64;
    std::size_t base_channels = 6;
    int res_blocks = 3;
};

// Residual convolutional generator mapping a uniform latent code to a
// complex perturbation grid of n_g OFDM symbols.
class Pgm {
public:
    Pgm(const PgmConfig& cfg, std::uint64_t init_seed);

    const PgmConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    std::string arch_descriptor() const;

    nn::Var build(nn::Tape& t, nn::Var z) const; // z [latent] -> [n_g, n_fft, 2]

    nn::Tensor draw_latent(RngStream& rng) const; // Uniform(0,1)^latent_dim
    phy::SymbolGrid generate(const nn::Tensor& z) const;

private:
    PgmConfig cfg_;
    nn::ParamStore params_;
    nn::LinearLayer fc_;
    std::vector<nn::Conv2dLayer> res_;
    nn::Conv2dLayer out_;
    nn::Parameter* envelope_ = nullptr; // static per-cell gain map
};

// Per-OFDM-symbol MLP scorer over constellation-mapped equalized grids,
// averaged into one probability that the grid is clean.
class Discriminator {
public:
    Discriminator(std::size_t hidden, std::uint64_t init_seed);

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    // mapped compact payload [rows,48,2] -> probability [1]
    nn::Var score(nn::Tape& t, nn::Var grid) const;
    double score(const phy::SymbolGrid& grid) const;

    void set_trainable(bool trainable);

private:
    nn::ParamStore params_;
    nn::LinearLayer l1_, l2_;
};

// log D(clean) + log(1 - D(perturbed)), probabilities clamped to 1e-7
nn::Var discrimination_loss_var(nn::Tape& t, const Discriminator& d, nn::Var clean, nn::Var perturbed);
double discrimination_loss(const Discriminator& d, const phy::SymbolGrid& clean,
                           const phy::SymbolGrid& perturbed);

// mean absolute difference between two generator outputs
nn::Var diversity_loss_var(nn::Tape& t, nn::Var delta_a, nn::Var delta_b);
double diversity_loss(const phy::SymbolGrid& a, const phy::SymbolGrid& b);

} // namespace wsim::attack

#endif
