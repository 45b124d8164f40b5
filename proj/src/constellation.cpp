// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/constellation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wsim::phy {

const char* constellation_name(Constellation c) {
    switch (c) {
        case Constellation::Qpsk: return "qpsk";
        case Constellation::Qam16: return "16qam";
        case Constellation::Qam64: return "64qam";
    }
    return "?";
}

Constellation constellation_from_name(const std::string& name) {
    if (name == "qpsk") return Constellation::Qpsk;
    if (name == "16qam") return Constellation::Qam16;
    if (name == "64qam") return Constellation::Qam64;
    throw std::invalid_argument("unknown constellation: " + name);
}

static std::vector<std::complex<double>> make_square_qam(int levels_per_axis) {
    // levels -m, ..., -1, 1, ..., m scaled to unit average power
    std::vector<double> levels;
    for (int l = -(levels_per_axis - 1); l <= levels_per_axis - 1; l += 2)
        levels.push_back(static_cast<double>(l));
    double power = 0.0;
    for (double re : levels)
        for (double im : levels) power += re * re + im * im;
    const double scale = std::sqrt(power / (levels.size() * levels.size()));
    std::vector<std::complex<double>> pts;
    pts.reserve(levels.size() * levels.size());
    for (double re : levels)
        for (double im : levels) pts.emplace_back(re / scale, im / scale);
    return pts;
}

const std::vector<std::complex<double>>& constellation_points(Constellation c) {
    static const std::vector<std::complex<double>> qpsk = make_square_qam(2);
    static const std::vector<std::complex<double>> qam16 = make_square_qam(4);
    static const std::vector<std::complex<double>> qam64 = make_square_qam(8);
    switch (c) {
        case Constellation::Qpsk: return qpsk;
        case Constellation::Qam16: return qam16;
        case Constellation::Qam64: return qam64;
    }
    throw std::invalid_argument("unknown constellation");
}

std::size_t nearest_point_index(std::complex<double> v, Constellation c) {
    const auto& pts = constellation_points(c);
    std::size_t best = 0;
    double best_d = std::norm(v - pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double d = std::norm(v - pts[i]);
        if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::complex<double> nearest_point(std::complex<double> v, Constellation c) {
    return constellation_points(c)[nearest_point_index(v, c)];
}

} // namespace wsim::phy
