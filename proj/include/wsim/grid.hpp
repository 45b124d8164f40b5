// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_GRID_HPP
#define WSIM_GRID_HPP

#include <complex>
#include <stdexcept>
#include <vector>

#include "wsim/tensor.hpp"

namespace wsim::phy {

using cd = std::complex<double>;

// Complex-valued symbol grid: rows of OFDM symbols by columns of subcarriers
// (or payload slots). This is the currency the whole pipeline trades in.
class SymbolGrid {
public:
    SymbolGrid() = default;
    SymbolGrid(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    cd& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    cd at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    cd& operator[](std::size_t i) { return data_[i]; }
    cd operator[](std::size_t i) const { return data_[i]; }

    std::vector<cd>& vec() { return data_; }
    const std::vector<cd>& vec() const { return data_; }

    double power() const {
        double p = 0.0;
        for (const cd& v : data_) p += std::norm(v);
        return p;
    }

    bool same_shape(const SymbolGrid& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    SymbolGrid& operator+=(const SymbolGrid& o) {
        if (!same_shape(o)) throw std::invalid_argument("symbol grid: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    SymbolGrid& operator-=(const SymbolGrid& o) {
        if (!same_shape(o)) throw std::invalid_argument("symbol grid: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    // bridge to the trailing-2-channel tensor representation
    nn::Tensor to_tensor() const {
        nn::Tensor t({rows_, cols_, 2});
        for (std::size_t i = 0; i < data_.size(); ++i) {
            t[2 * i] = data_[i].real();
            t[2 * i + 1] = data_[i].imag();
        }
        return t;
    }

    static SymbolGrid from_tensor(const nn::Tensor& t) {
        if (t.rank() != 3 || t.dim(2) != 2)
            throw std::invalid_argument("symbol grid: tensor must be [rows,cols,2]");
        SymbolGrid g(t.dim(0), t.dim(1));
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = {t[2 * i], t[2 * i + 1]};
        return g;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<cd> data_;
};

// Complex baseband samples, unit sample period.
using TimeSignal = std::vector<cd>;

inline double signal_power(const TimeSignal& s) {
    double p = 0.0;
    for (const cd& v : s) p += std::norm(v);
    return p;
}

} // namespace wsim::phy

#endif
