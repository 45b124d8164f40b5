// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_LAYERS_HPP
#define WSIM_LAYERS_HPP

#include <cmath>
#include <string>

#include "wsim/optim.hpp"
#include "wsim/tape.hpp"

namespace wsim::nn {

struct Conv2dLayer {
    Parameter* w = nullptr;
    Parameter* b = nullptr;
    int stride = 1;
    PadMode pad = PadMode::Same;

    static Conv2dLayer make(ParamStore& store, const std::string& name, std::size_t in_ch,
                            std::size_t out_ch, std::size_t k, int stride, PadMode pad,
                            RngStream& init) {
        Conv2dLayer l;
        l.w = &store.create_glorot(name + ".w", {out_ch, in_ch, k, k}, in_ch * k * k, out_ch * k * k, init);
        l.b = &store.create(name + ".b", {out_ch});
        l.stride = stride;
        l.pad = pad;
        return l;
    }

    Var operator()(Tape& t, Var x) const { return conv2d(x, t.param(*w), t.param(*b), stride, pad); }
};

struct LinearLayer {
    Parameter* w = nullptr;
    Parameter* b = nullptr;

    static LinearLayer make(ParamStore& store, const std::string& name, std::size_t in,
                            std::size_t out, RngStream& init) {
        LinearLayer l;
        l.w = &store.create_glorot(name + ".w", {in, out}, in, out, init);
        l.b = &store.create(name + ".b", {out});
        return l;
    }

    // x: [rows, in] -> [rows, out]
    Var operator()(Tape& t, Var x) const { return add_row(matmul(x, t.param(*w)), t.param(*b)); }
};

// Single-head self-attention with a residual connection; x is [L, d].
struct AttentionLayer {
    Parameter* wq = nullptr;
    Parameter* wk = nullptr;
    Parameter* wv = nullptr;
    Parameter* wo = nullptr;
    std::size_t dim = 0;

    static AttentionLayer make(ParamStore& store, const std::string& name, std::size_t d,
                               RngStream& init) {
        AttentionLayer l;
        l.wq = &store.create_glorot(name + ".wq", {d, d}, d, d, init);
        l.wk = &store.create_glorot(name + ".wk", {d, d}, d, d, init);
        l.wv = &store.create_glorot(name + ".wv", {d, d}, d, d, init);
        l.wo = &store.create_glorot(name + ".wo", {d, d}, d, d, init);
        l.dim = d;
        return l;
    }

    Var operator()(Tape& t, Var x) const {
        Var q = matmul(x, t.param(*wq));
        Var k = matmul(x, t.param(*wk));
        Var v = matmul(x, t.param(*wv));
        // k^T: view [L,d] as [L,1,d], channels_last gives [1,d,L]
        const std::size_t L = x.shape()[0];
        Var kt = reshape(channels_last(reshape(k, {L, 1, dim})), {dim, L});
        Var scores = softmax_rows(scale(matmul(q, kt), 1.0 / std::sqrt(static_cast<double>(dim))));
        return add(x, matmul(matmul(scores, v), t.param(*wo)));
    }
};

} // namespace wsim::nn

#endif
