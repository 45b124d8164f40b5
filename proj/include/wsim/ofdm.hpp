// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_OFDM_HPP
#define WSIM_OFDM_HPP

#include <vector>

#include "wsim/constellation.hpp"
#include "wsim/grid.hpp"

namespace wsim::phy {

// 802.11a-like subcarrier plan: 64 subcarriers, 48 data, 4 pilots
// (at +/-7 and +/-21), DC and band edges null. Indices are FFT bins,
// negative frequencies stored as n_fft + k.
struct OfdmConfig {
    std::size_t n_fft = 64;
    std::size_t cp_len = 16;
    std::vector<std::size_t> data_subcarriers;
    std::vector<std::size_t> pilot_subcarriers;
    std::vector<std::size_t> null_subcarriers;
    SymbolGrid preamble; // one known full-band symbol, zero on null bins

    std::size_t symbol_len() const { return n_fft + cp_len; }
    void validate() const;
};

OfdmConfig default_ofdm_config();

// unitary transforms (1/sqrt(n) both ways); n must be a power of two
void fft_inplace(std::vector<cd>& x, bool inverse);

// Per row: unitary IFFT, then the last cp_len samples are prepended.
TimeSignal ofdm_modulate(const SymbolGrid& grid, const OfdmConfig& cfg);

// Inverse of ofdm_modulate; signal length must divide into whole symbols.
SymbolGrid ofdm_demodulate(const TimeSignal& sig, const OfdmConfig& cfg);

// Every entry replaced by the nearest unit-average-power constellation
// point. Idempotent; ties resolve to the lowest point index.
SymbolGrid map_constellation(const SymbolGrid& grid, Constellation scheme);

} // namespace wsim::phy

#endif
