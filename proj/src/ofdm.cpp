// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/ofdm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "wsim/rng.hpp"

namespace wsim::phy {

void OfdmConfig::validate() const {
    if (n_fft == 0 || (n_fft & (n_fft - 1)) != 0)
        throw std::invalid_argument("ofdm: n_fft must be a power of two");
    std::set<std::size_t> seen;
    for (const auto* set : {&data_subcarriers, &pilot_subcarriers, &null_subcarriers})
        for (std::size_t k : *set) {
            if (k >= n_fft) throw std::invalid_argument("ofdm: subcarrier index out of range");
            if (!seen.insert(k).second) throw std::invalid_argument("ofdm: subcarrier sets overlap");
        }
    if (seen.size() != n_fft)
        throw std::invalid_argument("ofdm: data+pilot+null must cover all subcarriers");
    if (preamble.rows() != 1 || preamble.cols() != n_fft)
        throw std::invalid_argument("ofdm: preamble must be one full-band symbol");
}

OfdmConfig default_ofdm_config() {
    OfdmConfig cfg;
    cfg.n_fft = 64;
    cfg.cp_len = 16;
    const int pilots[] = {7, 21, -7, -21};
    std::set<std::size_t> pilot_set;
    for (int p : pilots) pilot_set.insert(static_cast<std::size_t>((p + 64) % 64));
    std::set<std::size_t> used;
    for (int k = -26; k <= 26; ++k) {
        if (k == 0) continue;
        used.insert(static_cast<std::size_t>((k + 64) % 64));
    }
    for (std::size_t k = 0; k < 64; ++k) {
        if (pilot_set.count(k))
            cfg.pilot_subcarriers.push_back(k);
        else if (used.count(k))
            cfg.data_subcarriers.push_back(k);
        else
            cfg.null_subcarriers.push_back(k);
    }
    // Fixed +/-1 preamble on the used bins, published to both ends of the
    // link; the constant seed makes it a protocol constant, not a secret.
    cfg.preamble = SymbolGrid(1, 64);
    RngStream pre(0x0f0fdeadbeef1234ULL);
    for (std::size_t k : cfg.data_subcarriers) cfg.preamble.at(0, k) = pre.uniform() < 0.5 ? 1.0 : -1.0;
    for (std::size_t k : cfg.pilot_subcarriers) cfg.preamble.at(0, k) = pre.uniform() < 0.5 ? 1.0 : -1.0;
    cfg.validate();
    return cfg;
}

void fft_inplace(std::vector<cd>& x, bool inverse) {
    const std::size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const cd wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cd u = x[i + k];
                const cd v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (cd& v : x) v *= scale;
}

TimeSignal ofdm_modulate(const SymbolGrid& grid, const OfdmConfig& cfg) {
    if (grid.cols() != cfg.n_fft)
        throw std::invalid_argument("ofdm_modulate: grid width must equal n_fft");
    TimeSignal out;
    out.reserve(grid.rows() * cfg.symbol_len());
    std::vector<cd> sym(cfg.n_fft);
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        for (std::size_t k = 0; k < cfg.n_fft; ++k) sym[k] = grid.at(r, k);
        fft_inplace(sym, true);
        for (std::size_t i = cfg.n_fft - cfg.cp_len; i < cfg.n_fft; ++i) out.push_back(sym[i]);
        for (std::size_t i = 0; i < cfg.n_fft; ++i) out.push_back(sym[i]);
    }
    return out;
}

SymbolGrid ofdm_demodulate(const TimeSignal& sig, const OfdmConfig& cfg) {
    if (sig.size() % cfg.symbol_len() != 0)
        throw std::invalid_argument("ofdm_demodulate: signal length not a whole number of symbols");
    const std::size_t rows = sig.size() / cfg.symbol_len();
    SymbolGrid grid(rows, cfg.n_fft);
    std::vector<cd> sym(cfg.n_fft);
    for (std::size_t r = 0; r < rows; ++r) {
        const cd* base = sig.data() + r * cfg.symbol_len() + cfg.cp_len;
        for (std::size_t i = 0; i < cfg.n_fft; ++i) sym[i] = base[i];
        fft_inplace(sym, false);
        for (std::size_t k = 0; k < cfg.n_fft; ++k) grid.at(r, k) = sym[k];
    }
    return grid;
}

SymbolGrid map_constellation(const SymbolGrid& grid, Constellation scheme) {
    SymbolGrid out(grid.rows(), grid.cols());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = nearest_point(grid[i], scheme);
    return out;
}

} // namespace wsim::phy
