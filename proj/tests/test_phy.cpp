// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "wsim/channel.hpp"
#include "wsim/ofdm.hpp"
#include "wsim/rng.hpp"

using namespace wsim::phy;
using wsim::RngStream;

namespace {

SymbolGrid random_grid(std::size_t rows, std::size_t cols, RngStream& rng) {
    SymbolGrid g(rows, cols);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return g;
}

// brute-force nearest point, scanning the published enumeration order
cd oracle_nearest(cd v, Constellation c) {
    const auto& pts = constellation_points(c);
    cd best = pts[0];
    double bd = std::norm(v - pts[0]);
    for (const cd& p : pts) {
        const double d = std::norm(v - p);
        if (d < bd) {
            bd = d;
            best = p;
        }
    }
    return best;
}

} // namespace

TEST_CASE("constellations have unit average power") {
    for (auto c : {Constellation::Qpsk, Constellation::Qam16, Constellation::Qam64}) {
        const auto& pts = constellation_points(c);
        double p = 0.0;
        for (const cd& v : pts) p += std::norm(v);
        CHECK(p / pts.size() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("qpsk nearest point of 0.9+0.8j") {
    const cd got = nearest_point({0.9, 0.8}, Constellation::Qpsk);
    CHECK(got.real() == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(got.imag() == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(got == oracle_nearest({0.9, 0.8}, Constellation::Qpsk));
}

TEST_CASE("map_constellation is idempotent on exact points") {
    for (auto c : {Constellation::Qpsk, Constellation::Qam16, Constellation::Qam64})
        for (const cd& p : constellation_points(c)) CHECK(nearest_point(p, c) == p);
}

TEST_CASE("16qam tie at the origin resolves to the lowest point index") {
    const auto& pts = constellation_points(Constellation::Qam16);
    const std::size_t idx = nearest_point_index({0.0, 0.0}, Constellation::Qam16);
    // oracle: first point among the minimum-distance set
    std::size_t expect = 0;
    double bd = std::norm(pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (std::norm(pts[i]) < bd) {
            bd = std::norm(pts[i]);
            expect = i;
        }
    CHECK(idx == expect);
    CHECK(pts[idx].real() == doctest::Approx(-1.0 / std::sqrt(10.0)));
    CHECK(pts[idx].imag() == doctest::Approx(-1.0 / std::sqrt(10.0)));
}

TEST_CASE("mapping never increases distance to the constellation set") {
    RngStream rng(4);
    for (int i = 0; i < 200; ++i) {
        const cd v{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        for (auto c : {Constellation::Qpsk, Constellation::Qam16, Constellation::Qam64}) {
            const cd m = nearest_point(v, c);
            CHECK(std::norm(m - nearest_point(m, c)) <= 1e-24);
            CHECK(nearest_point(v, c) == oracle_nearest(v, c));
        }
    }
}

TEST_CASE("default ofdm config satisfies the subcarrier plan") {
    const OfdmConfig cfg = default_ofdm_config();
    CHECK(cfg.n_fft == 64);
    CHECK(cfg.cp_len == 16);
    CHECK(cfg.data_subcarriers.size() == 48);
    CHECK(cfg.pilot_subcarriers.size() == 4);
    CHECK(cfg.null_subcarriers.size() == 12);
    cfg.validate();
}

TEST_CASE("all-zero grid modulates to an all-zero signal of the right length") {
    const OfdmConfig cfg = default_ofdm_config();
    const SymbolGrid g(3, 64);
    const TimeSignal sig = ofdm_modulate(g, cfg);
    CHECK(sig.size() == 3 * 80);
    for (const cd& v : sig) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("demodulate(modulate(g)) recovers g within 1e-9") {
    const OfdmConfig cfg = default_ofdm_config();
    RngStream rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const SymbolGrid g = random_grid(1 + trial % 4, 64, rng);
        const SymbolGrid back = ofdm_demodulate(ofdm_modulate(g, cfg), cfg);
        REQUIRE(back.rows() == g.rows());
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(back[i] - g[i]) < 1e-9);
    }
}

TEST_CASE("a unit entry at subcarrier k is a complex exponential in the payload") {
    const OfdmConfig cfg = default_ofdm_config();
    for (std::size_t k : {std::size_t{0}, std::size_t{5}, std::size_t{33}, std::size_t{63}}) {
        SymbolGrid g(1, 64);
        g.at(0, k) = 1.0;
        const TimeSignal sig = ofdm_modulate(g, cfg);
        for (std::size_t n = 0; n < 64; ++n) {
            const cd expect = std::polar(1.0 / 8.0, 2.0 * M_PI * k * n / 64.0);
            CHECK(std::abs(sig[16 + n] - expect) < 1e-12);
        }
        // the prefix replays the tail
        for (std::size_t n = 0; n < 16; ++n) CHECK(std::abs(sig[n] - sig[64 + n]) < 1e-12);
    }
}

TEST_CASE("demodulate rejects ragged signal lengths") {
    const OfdmConfig cfg = default_ofdm_config();
    TimeSignal sig(81);
    CHECK_THROWS(ofdm_demodulate(sig, cfg));
}

TEST_CASE("parseval: payload energy equals frequency-domain energy") {
    const OfdmConfig cfg = default_ofdm_config();
    RngStream rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const SymbolGrid g = random_grid(2, 64, rng);
        const TimeSignal sig = ofdm_modulate(g, cfg);
        double payload = 0.0;
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t n = 0; n < 64; ++n) payload += std::norm(sig[r * 80 + 16 + n]);
        CHECK(payload == doctest::Approx(g.power()).epsilon(1e-12));
    }
}

TEST_CASE("single tap gives a flat frequency response") {
    RngStream rng(10);
    ChannelModel model;
    model.n_taps = 1;
    const ChannelRealization ch = sample_channel(rng, model, 64);
    const double mag = std::abs(ch.freq_response[0]);
    for (const cd& h : ch.freq_response) CHECK(std::abs(h) == doctest::Approx(mag).epsilon(1e-12));
}

TEST_CASE("channel sampling is deterministic per stream") {
    ChannelModel model;
    RngStream a(77), b(77);
    const auto ca = sample_channel(a, model, 64);
    const auto cb = sample_channel(b, model, 64);
    for (std::size_t i = 0; i < ca.taps.size(); ++i) CHECK(ca.taps[i] == cb.taps[i]);
}

TEST_CASE("sample_channel rejects zero taps") {
    RngStream rng(1);
    ChannelModel model;
    model.n_taps = 0;
    CHECK_THROWS(sample_channel(rng, model, 64));
}

TEST_CASE("tap power profile sums to one in expectation") {
    RngStream rng(12);
    ChannelModel model;
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto ch = sample_channel(rng, model, 64);
        for (const cd& t : ch.taps) acc += std::norm(t);
    }
    CHECK(acc / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("frequency response matches the dft of the taps") {
    RngStream rng(13);
    ChannelModel model;
    const auto ch = sample_channel(rng, model, 64);
    for (std::size_t k = 0; k < 64; ++k) {
        cd acc{0.0, 0.0};
        for (std::size_t l = 0; l < ch.taps.size(); ++l)
            acc += ch.taps[l] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * l) / 64.0);
        CHECK(std::abs(acc - ch.freq_response[k]) < 1e-9);
    }
}

TEST_CASE("identity channel with zero noise returns the input") {
    ChannelRealization ch;
    ch.freq_response.assign(64, cd{1.0, 0.0});
    ch.noise_variance = 0.0;
    RngStream rng(14);
    const SymbolGrid y = random_grid(2, 64, rng);
    const SymbolGrid out = apply_channel(y, ch, rng);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(out[i] - y[i]) == 0.0);
}

TEST_CASE("scalar channel case: H=2, Y=1, W=0 gives 2") {
    ChannelRealization ch;
    ch.freq_response.assign(64, cd{2.0, 0.0});
    SymbolGrid y(1, 64);
    for (std::size_t k = 0; k < 64; ++k) y.at(0, k) = 1.0;
    RngStream rng(15);
    const SymbolGrid out = apply_channel(y, ch, rng);
    for (std::size_t k = 0; k < 64; ++k) CHECK(std::abs(out.at(0, k) - cd{2.0, 0.0}) == 0.0);
}

TEST_CASE("apply_channel matches an independent elementwise recomputation") {
    RngStream rng(16);
    ChannelModel model;
    const auto ch = sample_channel(rng, model, 64);
    const SymbolGrid y = random_grid(3, 64, rng);
    RngStream noise_a = rng.derive("w");
    RngStream noise_b = rng.derive("w");
    const SymbolGrid w = draw_noise(3, 64, ch.noise_variance, noise_a);
    const SymbolGrid out = apply_channel_with_noise(y, ch, w);
    const SymbolGrid w2 = draw_noise(3, 64, ch.noise_variance, noise_b);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t k = 0; k < 64; ++k) {
            const cd expect = ch.freq_response[k] * y.at(r, k) + w2.at(r, k);
            CHECK(std::abs(out.at(r, k) - expect) == 0.0);
        }
}

TEST_CASE("the modeled channel equals time-domain convolution with cp handling") {
    // oracle: linearly convolve the modulated signal with the taps, then
    // demodulate; must match the per-subcarrier frequency response product
    const OfdmConfig cfg = default_ofdm_config();
    RngStream rng(17);
    ChannelModel model;
    const auto ch = sample_channel(rng, model, 64);
    const SymbolGrid y = random_grid(3, 64, rng);
    const TimeSignal tx = ofdm_modulate(y, cfg);
    TimeSignal rx(tx.size(), cd{0.0, 0.0});
    for (std::size_t n = 0; n < tx.size(); ++n)
        for (std::size_t l = 0; l < ch.taps.size(); ++l)
            if (n >= l) rx[n] += ch.taps[l] * tx[n - l];
    const SymbolGrid got = ofdm_demodulate(rx, cfg);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t k = 0; k < 64; ++k)
            CHECK(std::abs(got.at(r, k) - ch.freq_response[k] * y.at(r, k)) < 1e-9);
}

TEST_CASE("ls estimate: noiseless channel is recovered exactly") {
    const OfdmConfig cfg = default_ofdm_config();
    RngStream rng(18);
    ChannelModel model;
    model.snr_db = 300.0; // effectively noiseless
    const auto ch = sample_channel(rng, model, 64);
    const SymbolGrid rx = apply_channel(cfg.preamble, ch, rng);
    const auto h = ls_estimate(rx, cfg);
    for (std::size_t k : cfg.data_subcarriers) CHECK(std::abs(h[k] - ch.freq_response[k]) < 1e-9);
}

TEST_CASE("ls estimate: direct division example") {
    OfdmConfig cfg = default_ofdm_config();
    for (std::size_t k : cfg.data_subcarriers) cfg.preamble.at(0, k) = 1.0;
    SymbolGrid rx(1, 64);
    for (std::size_t k = 0; k < 64; ++k) rx.at(0, k) = {0.5, -0.5};
    const auto h = ls_estimate(rx, cfg);
    for (std::size_t k : cfg.data_subcarriers) {
        CHECK(h[k].real() == doctest::Approx(0.5));
        CHECK(h[k].imag() == doctest::Approx(-0.5));
    }
}

TEST_CASE("ls estimate rejects a zero preamble entry") {
    OfdmConfig cfg = default_ofdm_config();
    cfg.preamble.at(0, cfg.data_subcarriers[0]) = 0.0;
    SymbolGrid rx(1, 64);
    CHECK_THROWS(ls_estimate(rx, cfg));
}

TEST_CASE("ls estimation error scales with the noise variance") {
    const OfdmConfig cfg = default_ofdm_config();
    RngStream rng(19);
    ChannelModel model;
    model.snr_db = 10.0;
    const double sigma2 = std::pow(10.0, -1.0);
    double err = 0.0;
    std::size_t count = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const auto ch = sample_channel(rng, model, 64);
        const SymbolGrid rx = apply_channel(cfg.preamble, ch, rng);
        const auto h = ls_estimate(rx, cfg);
        for (std::size_t k : cfg.data_subcarriers) {
            err += std::norm(h[k] - ch.freq_response[k]);
            ++count;
        }
    }
    // preamble entries are unit magnitude, so E|H_est - H|^2 = sigma^2
    CHECK(err / count == doctest::Approx(sigma2).epsilon(0.05));
}

TEST_CASE("equalize inverts the channel on data subcarriers") {
    const OfdmConfig cfg = default_ofdm_config();
    RngStream rng(20);
    ChannelModel model;
    model.snr_db = 300.0;
    const auto ch = sample_channel(rng, model, 64);
    const SymbolGrid y = random_grid(2, 64, rng);
    const SymbolGrid rx = apply_channel(y, ch, rng);
    const SymbolGrid rx_pre = apply_channel(cfg.preamble, ch, rng);
    const auto est = ls_estimate(rx_pre, cfg);
    const auto eq = equalize(rx, est, cfg);
    CHECK(eq.deep_fade_subcarriers.empty());
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t k : cfg.data_subcarriers) CHECK(std::abs(eq.grid.at(r, k) - y.at(r, k)) < 1e-9);
}

TEST_CASE("equalize with a unit estimate is the identity") {
    const OfdmConfig cfg = default_ofdm_config();
    RngStream rng(21);
    const SymbolGrid y = random_grid(2, 64, rng);
    const std::vector<cd> ones(64, cd{1.0, 0.0});
    const auto eq = equalize(y, ones, cfg);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(eq.grid[i] - y[i]) == 0.0);
}

TEST_CASE("deep fades are flagged and zeroed") {
    const OfdmConfig cfg = default_ofdm_config();
    RngStream rng(22);
    const SymbolGrid y = random_grid(1, 64, rng);
    std::vector<cd> h(64, cd{1.0, 0.0});
    const std::size_t faded = cfg.data_subcarriers[5];
    h[faded] = {1e-12, 0.0};
    const auto eq = equalize(y, h, cfg);
    REQUIRE(eq.deep_fade_subcarriers.size() == 1);
    CHECK(eq.deep_fade_subcarriers[0] == faded);
    CHECK(std::abs(eq.grid.at(0, faded)) == 0.0);
}

TEST_CASE("psr formula and scaling") {
    TimeSignal victim(10, cd{0.0, 0.0});
    victim[0] = {1.0, 0.0}; // power 1
    TimeSignal pert(10, cd{0.0, 0.0});
    pert[0] = {std::sqrt(0.1), 0.0}; // power 0.1
    CHECK(measure_psr(victim, pert) == doctest::Approx(-10.0));
    CHECK(measure_psr(victim, victim) == doctest::Approx(0.0));
    TimeSignal scaled = pert;
    for (cd& v : scaled) v *= std::sqrt(10.0);
    CHECK(measure_psr(victim, scaled) == doctest::Approx(-10.0 + 10.0));
    TimeSignal zero(10, cd{0.0, 0.0});
    CHECK_THROWS(measure_psr(zero, pert));
}
