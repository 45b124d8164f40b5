// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_CONSTELLATION_HPP
#define WSIM_CONSTELLATION_HPP

#include <complex>
#include <vector>

namespace wsim::phy {

enum class Constellation : int { Qpsk = 0, Qam16 = 1, Qam64 = 2 };

const char* constellation_name(Constellation c);
Constellation constellation_from_name(const std::string& name);

// Unit-average-power constellation points in a fixed enumeration order:
// amplitude levels ascending, real index major, imaginary index minor.
// The enumeration order is the tie-break rule: nearest_point returns the
// lowest-index point among equidistant candidates.
const std::vector<std::complex<double>>& constellation_points(Constellation c);

std::size_t nearest_point_index(std::complex<double> v, Constellation c);
std::complex<double> nearest_point(std::complex<double> v, Constellation c);

} // namespace wsim::phy

#endif
