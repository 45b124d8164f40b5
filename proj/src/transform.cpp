// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/transform.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wsim::attack {

using nn::Tape;
using nn::Var;
using phy::cd;
using phy::SymbolGrid;

double psr_to_epsilon_power(double victim_power, double psr_db) {
    if (victim_power <= 0.0) throw std::invalid_argument("psr_to_epsilon: victim power must be > 0");
    return victim_power * std::pow(10.0, psr_db / 10.0);
}

double psr_to_epsilon(const phy::TimeSignal& victim, double psr_db) {
    return psr_to_epsilon_power(phy::signal_power(victim), psr_db);
}

std::vector<std::size_t> shuffle_permutation(std::uint64_t zeta, std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream rng(zeta);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
    return perm;
}

std::vector<std::size_t> shuffle_permutation(std::uint64_t zeta, std::size_t n,
                                             const std::vector<std::size_t>& domain) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream rng(zeta);
    for (std::size_t i = domain.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_int(i);
        std::swap(perm[domain[i - 1]], perm[domain[j]]);
    }
    return perm;
}

std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm) {
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    return inv;
}

SymbolGrid symbol_extend(const SymbolGrid& delta, std::size_t mu) {
    if (mu < 1) throw std::invalid_argument("symbol_extend: mu must be >= 1");
    SymbolGrid out(delta.rows() * mu, delta.cols());
    for (std::size_t m = 0; m < mu; ++m)
        for (std::size_t r = 0; r < delta.rows(); ++r)
            for (std::size_t c = 0; c < delta.cols(); ++c)
                out.at(m * delta.rows() + r, c) = delta.at(r, c);
    return out;
}

SymbolGrid symbol_shuffle(const SymbolGrid& grid, const std::vector<std::size_t>& perm) {
    if (perm.size() != grid.cols()) throw std::invalid_argument("symbol_shuffle: permutation size mismatch");
    SymbolGrid out(grid.rows(), grid.cols());
    for (std::size_t r = 0; r < grid.rows(); ++r)
        for (std::size_t c = 0; c < grid.cols(); ++c) out.at(r, c) = grid.at(r, perm[c]);
    return out;
}

SymbolGrid rotate(const SymbolGrid& grid, double phi, int delta_t) {
    SymbolGrid out(grid.rows(), grid.cols());
    const double n = static_cast<double>(grid.cols());
    for (std::size_t k = 0; k < grid.cols(); ++k) {
        const cd factor = std::polar(1.0, phi - 2.0 * M_PI * static_cast<double>(k) * delta_t / n);
        for (std::size_t r = 0; r < grid.rows(); ++r) out.at(r, k) = grid.at(r, k) * factor;
    }
    return out;
}

SymbolGrid power_normalize(const SymbolGrid& grid, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("power_normalize: epsilon must be > 0");
    const double p = grid.power();
    if (p <= epsilon) return grid;
    const double s = std::sqrt(epsilon / p);
    SymbolGrid out = grid;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

SymbolGrid apply_transform(const SymbolGrid& delta, const TransformParams& tau,
                           const std::vector<std::size_t>* shuffle_domain) {
    SymbolGrid g = symbol_extend(delta, tau.mu);
    if (tau.zeta)
        g = symbol_shuffle(g, shuffle_domain == nullptr
                                  ? shuffle_permutation(*tau.zeta, g.cols())
                                  : shuffle_permutation(*tau.zeta, g.cols(), *shuffle_domain));
    g = power_normalize(g, tau.epsilon);
    return rotate(g, tau.phi, tau.delta_t);
}

SymbolGrid clamp_overlap_power(const SymbolGrid& grid, std::size_t rows, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("clamp_overlap_power: epsilon must be > 0");
    rows = std::min(rows, grid.rows());
    double p = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < grid.cols(); ++k) p += std::norm(grid.at(r, k));
    if (p <= epsilon) return grid;
    const double s = std::sqrt(epsilon / p);
    SymbolGrid out = grid;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

SymbolGrid inject(const SymbolGrid& y, const std::vector<cd>& h_t, const std::vector<cd>& h_a,
                  const SymbolGrid& transformed, const SymbolGrid& noise) {
    if (h_t.size() != y.cols() || h_a.size() != y.cols())
        throw std::invalid_argument("inject: channel response width mismatch");
    if (!noise.same_shape(y)) throw std::invalid_argument("inject: noise shape mismatch");
    if (transformed.rows() < y.rows() || transformed.cols() != y.cols())
        throw std::invalid_argument("inject: perturbation too small after truncation");
    SymbolGrid out(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t k = 0; k < y.cols(); ++k)
            out.at(r, k) = h_t[k] * y.at(r, k) + h_a[k] * transformed.at(r, k) + noise.at(r, k);
    return out;
}

// ---- tape versions ----

Var symbol_extend_var(Tape& t, Var delta, std::size_t mu) {
    if (mu < 1) throw std::invalid_argument("symbol_extend: mu must be >= 1");
    (void)t;
    Var out = delta;
    for (std::size_t m = 1; m < mu; ++m) out = concat0(out, delta);
    return out;
}

Var symbol_shuffle_var(Tape& t, Var grid, const std::vector<std::size_t>& perm) {
    (void)t;
    return select_cols(grid, perm);
}

Var rotate_var(Tape& t, Var grid, double phi, int delta_t) {
    const auto& s = grid.shape();
    nn::Tensor phasor(s);
    const double n = static_cast<double>(s[1]);
    for (std::size_t k = 0; k < s[1]; ++k) {
        const cd f = std::polar(1.0, phi - 2.0 * M_PI * static_cast<double>(k) * delta_t / n);
        for (std::size_t r = 0; r < s[0]; ++r) {
            phasor[(r * s[1] + k) * 2] = f.real();
            phasor[(r * s[1] + k) * 2 + 1] = f.imag();
        }
    }
    return cmul(grid, t.constant(phasor));
}

Var power_normalize_var(Tape& t, Var grid, double epsilon) {
    (void)t;
    if (epsilon <= 0.0) throw std::invalid_argument("power_normalize: epsilon must be > 0");
    Var n2 = sum(mul(grid, grid));
    if (n2.value()[0] <= epsilon) return grid;
    Var s = sqrt_(scale(recip(n2), epsilon));
    return scale_by(grid, s);
}

Var apply_transform_var(Tape& t, Var delta, const TransformParams& tau,
                        const std::vector<std::size_t>* shuffle_domain) {
    Var g = symbol_extend_var(t, delta, tau.mu);
    if (tau.zeta)
        g = symbol_shuffle_var(t, g, shuffle_domain == nullptr
                                         ? shuffle_permutation(*tau.zeta, g.shape()[1])
                                         : shuffle_permutation(*tau.zeta, g.shape()[1],
                                                               *shuffle_domain));
    g = power_normalize_var(t, g, tau.epsilon);
    return rotate_var(t, g, tau.phi, tau.delta_t);
}

TransformParams draw_tau(RngStream& rng, std::size_t mu, double epsilon, std::size_t symbol_len) {
    TransformParams tau;
    tau.mu = mu;
    tau.zeta = rng.next_u64();
    tau.epsilon = epsilon;
    tau.phi = rng.uniform(0.0, 2.0 * M_PI);
    tau.delta_t = static_cast<int>(rng.uniform_int(symbol_len));
    return tau;
}

} // namespace wsim::attack
