// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_TRANSFORM_HPP
#define WSIM_TRANSFORM_HPP

#include <optional>

#include "wsim/channel.hpp"
#include "wsim/grid.hpp"
#include "wsim/rng.hpp"
#include "wsim/tape.hpp"

namespace wsim::attack {

// Parameters of the perturbation transformation: symbol extension factor,
// subcarrier shuffle seed (empty = identity permutation), power budget,
// phase offset, and time offset in samples.
struct TransformParams {
    std::size_t mu = 1;
    std::optional<std::uint64_t> zeta;
    double epsilon = 1.0;
    double phi = 0.0;
    int delta_t = 0;
};

// epsilon = ||victim||^2 * 10^(psr/10); victim is the cyclic-prefix-free
// payload signal, so the budget is identical in time and frequency domain.
double psr_to_epsilon(const phy::TimeSignal& victim, double psr_db);
double psr_to_epsilon_power(double victim_power, double psr_db);

// seeded Fisher-Yates permutation of n subcarriers; same seed, same result
std::vector<std::size_t> shuffle_permutation(std::uint64_t zeta, std::size_t n);
// permutation of n subcarriers that only moves the listed columns; the
// attacker knows the public channel plan, so the shuffle models the unknown
// symbol allocation across the data subcarriers
std::vector<std::size_t> shuffle_permutation(std::uint64_t zeta, std::size_t n,
                                             const std::vector<std::size_t>& domain);
std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm);

phy::SymbolGrid symbol_extend(const phy::SymbolGrid& delta, std::size_t mu);
// out[r][j] = in[r][perm[j]], the same permutation applied to every row
phy::SymbolGrid symbol_shuffle(const phy::SymbolGrid& grid, const std::vector<std::size_t>& perm);
phy::SymbolGrid rotate(const phy::SymbolGrid& grid, double phi, int delta_t);
phy::SymbolGrid power_normalize(const phy::SymbolGrid& grid, double epsilon);

// extension, shuffle, power remap, then phase/time rotation; when a shuffle
// domain is given the permutation stays within it
phy::SymbolGrid apply_transform(const phy::SymbolGrid& delta, const TransformParams& tau,
                                const std::vector<std::size_t>* shuffle_domain = nullptr);

// rescales the whole grid so the first `rows` carry at most `epsilon`; the
// overlap with the victim's signal is what the receiver actually measures
phy::SymbolGrid clamp_overlap_power(const phy::SymbolGrid& grid, std::size_t rows, double epsilon);

// Y'[i,k] = H_t[k] Y[i,k] + H_a[k] P[i,k] + W[i,k]; the transformed
// perturbation is truncated to the payload row count.
phy::SymbolGrid inject(const phy::SymbolGrid& y, const std::vector<phy::cd>& h_t,
                       const std::vector<phy::cd>& h_a, const phy::SymbolGrid& transformed,
                       const phy::SymbolGrid& noise);

// ---- tape versions (used when optimizing through the transformation) ----
nn::Var symbol_extend_var(nn::Tape& t, nn::Var delta, std::size_t mu);
nn::Var symbol_shuffle_var(nn::Tape& t, nn::Var grid, const std::vector<std::size_t>& perm);
nn::Var rotate_var(nn::Tape& t, nn::Var grid, double phi, int delta_t);
nn::Var power_normalize_var(nn::Tape& t, nn::Var grid, double epsilon);
nn::Var apply_transform_var(nn::Tape& t, nn::Var delta, const TransformParams& tau,
                            const std::vector<std::size_t>* shuffle_domain = nullptr);

// uniform draw of tau for a given budget: random shuffle seed, phase in
// [0, 2pi), integer time offset in [0, symbol_len)
TransformParams draw_tau(RngStream& rng, std::size_t mu, double epsilon, std::size_t symbol_len);

} // namespace wsim::attack

#endif
