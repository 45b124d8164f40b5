// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace wsim::phy {

ChannelRealization sample_channel(RngStream& rng, const ChannelModel& model, std::size_t n_fft) {
    if (model.n_taps < 1) throw std::invalid_argument("sample_channel: need at least one tap");
    ChannelRealization ch;
    double norm = 0.0;
    for (std::size_t l = 0; l < model.n_taps; ++l) norm += std::pow(model.decay, static_cast<double>(l));
    ch.taps.resize(model.n_taps);
    for (std::size_t l = 0; l < model.n_taps; ++l) {
        const double p = std::pow(model.decay, static_cast<double>(l)) / norm;
        ch.taps[l] = rng.complex_gaussian(p);
    }
    // frequency response: plain DFT of the zero-padded taps (the unitary
    // modem pair absorbs the 1/sqrt(n) factors)
    std::vector<cd> padded(n_fft, cd{0.0, 0.0});
    for (std::size_t l = 0; l < model.n_taps && l < n_fft; ++l) padded[l] = ch.taps[l];
    fft_inplace(padded, false);
    const double unscale = std::sqrt(static_cast<double>(n_fft));
    ch.freq_response.resize(n_fft);
    for (std::size_t k = 0; k < n_fft; ++k) ch.freq_response[k] = padded[k] * unscale;
    ch.noise_variance = std::pow(10.0, -model.snr_db / 10.0);
    return ch;
}

SymbolGrid draw_noise(std::size_t rows, std::size_t cols, double variance, RngStream& rng) {
    SymbolGrid w(rows, cols);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.complex_gaussian(variance);
    return w;
}

SymbolGrid apply_channel_with_noise(const SymbolGrid& y, const ChannelRealization& ch,
                                    const SymbolGrid& noise) {
    if (!y.same_shape(noise)) throw std::invalid_argument("apply_channel: noise shape mismatch");
    if (y.cols() != ch.freq_response.size())
        throw std::invalid_argument("apply_channel: grid width must match channel response");
    SymbolGrid out(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t k = 0; k < y.cols(); ++k)
            out.at(r, k) = ch.freq_response[k] * y.at(r, k) + noise.at(r, k);
    return out;
}

SymbolGrid apply_channel(const SymbolGrid& y, const ChannelRealization& ch, RngStream& noise_rng) {
    return apply_channel_with_noise(y, ch, draw_noise(y.rows(), y.cols(), ch.noise_variance, noise_rng));
}

std::vector<cd> ls_estimate(const SymbolGrid& rx_preamble, const OfdmConfig& cfg) {
    if (rx_preamble.cols() != cfg.n_fft)
        throw std::invalid_argument("ls_estimate: preamble width must equal n_fft");
    std::vector<cd> h(cfg.n_fft, cd{0.0, 0.0});
    for (const auto* set : {&cfg.data_subcarriers, &cfg.pilot_subcarriers})
        for (std::size_t k : *set) {
            const cd p = cfg.preamble.at(0, k);
            if (p == cd{0.0, 0.0}) throw std::invalid_argument("ls_estimate: zero preamble entry");
            h[k] = rx_preamble.at(0, k) / p;
        }
    return h;
}

EqualizeResult equalize(const SymbolGrid& y, const std::vector<cd>& h_est, const OfdmConfig& cfg,
                        double floor) {
    if (y.cols() != cfg.n_fft) throw std::invalid_argument("equalize: grid width must equal n_fft");
    if (h_est.size() != cfg.n_fft) throw std::invalid_argument("equalize: estimate width mismatch");
    EqualizeResult res;
    res.grid = y;
    for (std::size_t k : cfg.data_subcarriers) {
        if (std::abs(h_est[k]) <= floor) {
            res.deep_fade_subcarriers.push_back(k);
            for (std::size_t r = 0; r < y.rows(); ++r) res.grid.at(r, k) = 0.0;
            continue;
        }
        for (std::size_t r = 0; r < y.rows(); ++r) res.grid.at(r, k) = y.at(r, k) / h_est[k];
    }
    return res;
}

double measure_psr(const TimeSignal& victim, const TimeSignal& perturbation) {
    const double pv = signal_power(victim);
    if (pv <= 0.0) throw std::invalid_argument("measure_psr: victim power must be > 0");
    return 10.0 * std::log10(signal_power(perturbation) / pv);
}

} // namespace wsim::phy
