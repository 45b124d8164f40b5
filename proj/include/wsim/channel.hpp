// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_CHANNEL_HPP
#define WSIM_CHANNEL_HPP

#include <vector>

#include "wsim/grid.hpp"
#include "wsim/ofdm.hpp"
#include "wsim/rng.hpp"

namespace wsim::phy {

// Multipath fading realization: time-domain taps plus the diagonal
// frequency response (plain n_fft-point DFT of the zero-padded taps).
struct ChannelRealization {
    std::vector<cd> taps;
    std::vector<cd> freq_response;
    double noise_variance = 0.0;
};

// Tap power profile: p_l proportional to decay^l, scaled so the profile sums
// to one; taps are independent circularly-symmetric complex gaussians.
// decay 0.5 is the line-of-sight-like preset, 1.0 the flat (NLoS-like) one.
struct ChannelModel {
    std::size_t n_taps = 8;
    double decay = 0.5;
    double snr_db = 15.0; // noise_variance = 10^(-snr/10) per subcarrier
};

ChannelRealization sample_channel(RngStream& rng, const ChannelModel& model, std::size_t n_fft);

// Elementwise per-subcarrier response plus fresh AWGN of the realization's
// noise variance.
SymbolGrid apply_channel(const SymbolGrid& y, const ChannelRealization& ch, RngStream& noise_rng);

// AWGN grid drawn separately so that attacked and clean paths can share a
// noise realization.
SymbolGrid draw_noise(std::size_t rows, std::size_t cols, double variance, RngStream& rng);

SymbolGrid apply_channel_with_noise(const SymbolGrid& y, const ChannelRealization& ch,
                                    const SymbolGrid& noise);

// Least-squares estimate from a received preamble row: H[k] = rx[k]/pre[k]
// on data and pilot subcarriers, zero elsewhere.
std::vector<cd> ls_estimate(const SymbolGrid& rx_preamble, const OfdmConfig& cfg);

struct EqualizeResult {
    SymbolGrid grid;
    std::vector<std::size_t> deep_fade_subcarriers; // |H| <= floor, entries zeroed
};

// Zero-forcing division on the data subcarriers; other columns pass through
// untouched. Estimates below `floor` are flagged and their column zeroed.
EqualizeResult equalize(const SymbolGrid& y, const std::vector<cd>& h_est, const OfdmConfig& cfg,
                        double floor = 1e-8);

// 10 log10(||perturbation||^2 / ||victim||^2)
double measure_psr(const TimeSignal& victim, const TimeSignal& perturbation);

} // namespace wsim::phy

#endif
