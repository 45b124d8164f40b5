// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wsim/constellation.hpp"

namespace wsim::nn {

const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Param: return "param";
        case Op::Const: return "const";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Neg: return "neg";
        case Op::Scale: return "scale";
        case Op::AddScalarC: return "add_scalar";
        case Op::AddRow: return "add_row";
        case Op::Relu: return "relu";
        case Op::Tanh: return "tanh";
        case Op::Sigmoid: return "sigmoid";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Recip: return "recip";
        case Op::Abs: return "abs";
        case Op::Matmul: return "matmul";
        case Op::Conv2d: return "conv2d";
        case Op::Upsample2x: return "upsample2x";
        case Op::Reshape: return "reshape";
        case Op::ConcatAxis0: return "concat0";
        case Op::SliceRows: return "slice_rows";
        case Op::SelectCols: return "select_cols";
        case Op::ChannelsLast: return "channels_last";
        case Op::Swap01: return "swap01";
        case Op::SoftmaxRows: return "softmax";
        case Op::SoftmaxXent: return "softmax_xent";
        case Op::Mse: return "mse";
        case Op::MeanAbs: return "mean_abs";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::ScaleBy: return "scale_by";
        case Op::At: return "at";
        case Op::MaxExcept: return "max_except";
        case Op::CMul: return "cmul";
        case Op::Conj: return "conj";
        case Op::MapConst: return "map_constellation";
        case Op::Argmax: return "argmax";
    }
    return "?";
}

const Tensor& Var::value() const { return tape->node(id).value; }
const std::vector<std::size_t>& Var::shape() const { return tape->node(id).value.shape(); }

// ---- construction ----

Var make_node(Tape& t, Node n) { return Var{&t, t.add_node(std::move(n))}; }

int Tape::add_node(Node n) {
    const int id = static_cast<int>(nodes_.size());
    bool needs = false;
    for (int p : n.parents) {
        if (p < 0) continue;
        if (p >= id) throw std::logic_error("tape: parent does not precede child");
        needs = needs || nodes_[p].needs_grad;
    }
    if (n.op == Op::Param) needs = n.param->trainable;
    n.needs_grad = needs;
    nodes_.push_back(std::move(n));
    eval_node(id);
    if (!nodes_[id].value.all_finite())
        throw std::runtime_error(std::string("tape: non-finite value at node ") + std::to_string(id) +
                                 " (" + op_name(nodes_[id].op) + ")");
    return id;
}

Var Tape::input(const std::string& name, Tensor value) {
    if (inputs_.count(name)) throw std::invalid_argument("tape: duplicate input name: " + name);
    Node n;
    n.op = Op::Input;
    n.name = name;
    n.value = std::move(value);
    Var v = make_node(*this, std::move(n));
    inputs_[name] = v.id;
    return v;
}

Var Tape::param(Parameter& p) {
    Node n;
    n.op = Op::Param;
    n.name = p.name;
    n.param = &p;
    return make_node(*this, std::move(n));
}

Var Tape::constant(Tensor value) {
    Node n;
    n.op = Op::Const;
    n.value = std::move(value);
    return make_node(*this, std::move(n));
}

void Tape::set_input(const std::string& name, Tensor value) {
    auto it = inputs_.find(name);
    if (it == inputs_.end()) throw std::invalid_argument("tape: unknown input name: " + name);
    Node& n = nodes_[it->second];
    if (!n.value.same_shape(value))
        throw std::invalid_argument("tape: input shape mismatch for " + name);
    n.value = std::move(value);
    values_current_ = false;
}

void Tape::forward() {
    for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
        eval_node(id);
        if (!nodes_[id].value.all_finite())
            throw std::runtime_error(std::string("tape: non-finite value at node ") + std::to_string(id) +
                                     " (" + op_name(nodes_[id].op) + ")");
    }
    values_current_ = true;
}

// ---- shape helpers ----

static void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument("tape: " + msg);
}

static std::vector<std::size_t> conv_out_shape(const std::vector<std::size_t>& x,
                                               const std::vector<std::size_t>& w, int stride_h,
                                               int stride_w, PadMode pad, int& pad_top,
                                               int& pad_left) {
    require(x.size() == 3, "conv2d input must be [C,H,W]");
    require(w.size() == 4, "conv2d kernel must be [K,C,kh,kw]");
    require(w[1] == x[0], "conv2d kernel channels do not match input");
    require((stride_h == 1 || stride_h == 2) && (stride_w == 1 || stride_w == 2),
            "conv2d strides must be 1 or 2");
    const long H = static_cast<long>(x[1]), W = static_cast<long>(x[2]);
    const long kh = static_cast<long>(w[2]), kw = static_cast<long>(w[3]);
    long Ho, Wo;
    if (pad == PadMode::Same) {
        Ho = (H + stride_h - 1) / stride_h;
        Wo = (W + stride_w - 1) / stride_w;
        const long ph = std::max((Ho - 1) * stride_h + kh - H, 0L);
        const long pw = std::max((Wo - 1) * stride_w + kw - W, 0L);
        pad_top = static_cast<int>(ph / 2);
        pad_left = static_cast<int>(pw / 2);
    } else {
        require(H >= kh && W >= kw, "conv2d valid padding: kernel larger than input");
        Ho = (H - kh) / stride_h + 1;
        Wo = (W - kw) / stride_w + 1;
        pad_top = pad_left = 0;
    }
    return {w[0], static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)};
}

// ---- forward evaluation ----

void Tape::eval_node(int id) {
    Node& n = nodes_[id];
    const auto P = [&](int k) -> const Tensor& { return nodes_[n.parents[k]].value; };

    switch (n.op) {
        case Op::Input:
        case Op::Const:
            break;
        case Op::Param:
            n.value = n.param->value;
            break;
        case Op::Add: {
            const Tensor &a = P(0), &b = P(1);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] + b[i];
            break;
        }
        case Op::Sub: {
            const Tensor &a = P(0), &b = P(1);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] - b[i];
            break;
        }
        case Op::Mul: {
            const Tensor &a = P(0), &b = P(1);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] * b[i];
            break;
        }
        case Op::Neg: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = -a[i];
            break;
        }
        case Op::Scale: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] * n.attr_a;
            break;
        }
        case Op::AddScalarC: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] + n.attr_a;
            break;
        }
        case Op::AddRow: {
            const Tensor &a = P(0), &r = P(1);
            const std::size_t rows = a.dim(0), cols = a.dim(1);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) n.value[i * cols + j] = a[i * cols + j] + r[j];
            break;
        }
        case Op::Relu: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] > 0.0 ? a[i] : 0.0;
            break;
        }
        case Op::Tanh: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::tanh(a[i]);
            break;
        }
        case Op::Sigmoid: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = 1.0 / (1.0 + std::exp(-a[i]));
            break;
        }
        case Op::Exp: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::exp(a[i]);
            break;
        }
        case Op::Log: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::log(a[i]);
            break;
        }
        case Op::Sqrt: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::sqrt(a[i]);
            break;
        }
        case Op::Recip: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = 1.0 / a[i];
            break;
        }
        case Op::Abs: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::fabs(a[i]);
            break;
        }
        case Op::Matmul: {
            const Tensor &a = P(0), &b = P(1);
            const std::size_t m = a.dim(0), k = a.dim(1), c = b.dim(1);
            n.value = Tensor({m, c});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double av = a[i * k + kk];
                    if (av == 0.0) continue;
                    const double* brow = b.data() + kk * c;
                    double* orow = n.value.data() + i * c;
                    for (std::size_t j = 0; j < c; ++j) orow[j] += av * brow[j];
                }
            break;
        }
        case Op::Conv2d: {
            const Tensor &x = P(0), &w = P(1), &b = P(2);
            int pt = 0, pl = 0;
            const auto os = conv_out_shape(x.shape(), w.shape(), n.attr_i, n.attr_j, n.pad, pt, pl);
            const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
            const std::size_t K = w.dim(0), kh = w.dim(2), kw = w.dim(3);
            const std::size_t Ho = os[1], Wo = os[2];
            n.value = Tensor(os);
            for (std::size_t ko = 0; ko < K; ++ko)
                for (std::size_t io = 0; io < Ho; ++io)
                    for (std::size_t jo = 0; jo < Wo; ++jo) {
                        double acc = b[ko];
                        const long i0 = static_cast<long>(io) * n.attr_i - pt;
                        const long j0 = static_cast<long>(jo) * n.attr_j - pl;
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t ki = 0; ki < kh; ++ki) {
                                const long ii = i0 + static_cast<long>(ki);
                                if (ii < 0 || ii >= static_cast<long>(H)) continue;
                                const double* xrow = x.data() + (c * H + ii) * W;
                                const double* wrow = w.data() + ((ko * C + c) * kh + ki) * kw;
                                for (std::size_t kj = 0; kj < kw; ++kj) {
                                    const long jj = j0 + static_cast<long>(kj);
                                    if (jj < 0 || jj >= static_cast<long>(W)) continue;
                                    acc += xrow[jj] * wrow[kj];
                                }
                            }
                        n.value[(ko * Ho + io) * Wo + jo] = acc;
                    }
            break;
        }
        case Op::Upsample2x: {
            const Tensor& x = P(0);
            const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
            n.value = Tensor({C, 2 * H, 2 * W});
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t i = 0; i < H; ++i)
                    for (std::size_t j = 0; j < W; ++j) {
                        const double v = x[(c * H + i) * W + j];
                        double* base = n.value.data() + (c * 2 * H + 2 * i) * 2 * W + 2 * j;
                        base[0] = v;
                        base[1] = v;
                        base[2 * W] = v;
                        base[2 * W + 1] = v;
                    }
            break;
        }
        case Op::Reshape: {
            n.value = Tensor(n.idx, P(0).vec());
            break;
        }
        case Op::ConcatAxis0: {
            const Tensor &a = P(0), &b = P(1);
            auto shape = a.shape();
            shape[0] += b.dim(0);
            n.value = Tensor(shape);
            std::copy(a.vec().begin(), a.vec().end(), n.value.vec().begin());
            std::copy(b.vec().begin(), b.vec().end(), n.value.vec().begin() + a.size());
            break;
        }
        case Op::SliceRows: {
            const Tensor& a = P(0);
            const std::size_t row_elems = a.size() / a.dim(0);
            auto shape = a.shape();
            shape[0] = static_cast<std::size_t>(n.attr_j - n.attr_i);
            n.value = Tensor(shape);
            std::copy(a.vec().begin() + n.attr_i * row_elems, a.vec().begin() + n.attr_j * row_elems,
                      n.value.vec().begin());
            break;
        }
        case Op::SelectCols: {
            const Tensor& a = P(0);
            const std::size_t rows = a.dim(0), cols = a.dim(1);
            const std::size_t inner = a.size() / (rows * cols);
            auto shape = a.shape();
            shape[1] = n.idx.size();
            n.value = Tensor(shape);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t k = 0; k < n.idx.size(); ++k)
                    for (std::size_t q = 0; q < inner; ++q)
                        n.value[(r * n.idx.size() + k) * inner + q] = a[(r * cols + n.idx[k]) * inner + q];
            break;
        }
        case Op::SoftmaxRows: {
            const Tensor& a = P(0);
            const std::size_t rows = a.rank() == 1 ? 1 : a.dim(0);
            const std::size_t cols = a.size() / rows;
            n.value = Tensor(a.shape());
            for (std::size_t r = 0; r < rows; ++r) {
                const double* in = a.data() + r * cols;
                double* out = n.value.data() + r * cols;
                double mx = in[0];
                for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
                double sum = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                    out[j] = std::exp(in[j] - mx);
                    sum += out[j];
                }
                for (std::size_t j = 0; j < cols; ++j) out[j] /= sum;
            }
            break;
        }
        case Op::SoftmaxXent: {
            const Tensor &x = P(0), &t = P(1);
            const std::size_t rows = x.dim(0), cols = x.dim(1);
            double total = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                const double* in = x.data() + r * cols;
                const double* tr = t.data() + r * cols;
                double mx = in[0];
                for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
                double lse = 0.0;
                for (std::size_t j = 0; j < cols; ++j) lse += std::exp(in[j] - mx);
                lse = std::log(lse) + mx;
                for (std::size_t j = 0; j < cols; ++j)
                    if (tr[j] != 0.0) total -= tr[j] * (in[j] - lse);
            }
            n.value = Tensor::scalar(total / static_cast<double>(rows));
            break;
        }
        case Op::Mse: {
            const Tensor &a = P(0), &b = P(1);
            double acc = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = a[i] - b[i];
                acc += d * d;
            }
            n.value = Tensor::scalar(acc / static_cast<double>(a.size()));
            break;
        }
        case Op::MeanAbs: {
            const Tensor& a = P(0);
            double acc = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i]);
            n.value = Tensor::scalar(acc / static_cast<double>(a.size()));
            break;
        }
        case Op::Sum: {
            const Tensor& a = P(0);
            double acc = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
            n.value = Tensor::scalar(acc);
            break;
        }
        case Op::Mean: {
            const Tensor& a = P(0);
            double acc = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
            n.value = Tensor::scalar(acc / static_cast<double>(a.size()));
            break;
        }
        case Op::ScaleBy: {
            const Tensor& a = P(0);
            const double s = P(1)[0];
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] * s;
            break;
        }
        case Op::At: {
            n.value = Tensor::scalar(P(0)[static_cast<std::size_t>(n.attr_i)]);
            break;
        }
        case Op::MaxExcept: {
            const Tensor& a = P(0);
            double best = -1e308;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (static_cast<int>(i) == n.attr_i) continue;
                best = std::max(best, a[i]);
            }
            n.value = Tensor::scalar(best);
            break;
        }
        case Op::ChannelsLast: {
            const Tensor& a = P(0);
            const std::size_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
            n.value = Tensor({H, W, C});
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t i = 0; i < H; ++i)
                    for (std::size_t j = 0; j < W; ++j)
                        n.value[(i * W + j) * C + c] = a[(c * H + i) * W + j];
            break;
        }
        case Op::Swap01: {
            const Tensor& a = P(0);
            const std::size_t A = a.dim(0), B = a.dim(1);
            const std::size_t inner = a.size() / (A * B);
            auto shape = a.shape();
            std::swap(shape[0], shape[1]);
            n.value = Tensor(shape);
            for (std::size_t i = 0; i < A; ++i)
                for (std::size_t j = 0; j < B; ++j)
                    for (std::size_t q = 0; q < inner; ++q)
                        n.value[(j * A + i) * inner + q] = a[(i * B + j) * inner + q];
            break;
        }
        case Op::CMul: {
            const Tensor &a = P(0), &b = P(1);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); i += 2) {
                const double ar = a[i], ai = a[i + 1], br = b[i], bi = b[i + 1];
                n.value[i] = ar * br - ai * bi;
                n.value[i + 1] = ar * bi + ai * br;
            }
            break;
        }
        case Op::Conj: {
            const Tensor& a = P(0);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); i += 2) {
                n.value[i] = a[i];
                n.value[i + 1] = -a[i + 1];
            }
            break;
        }
        case Op::MapConst: {
            const Tensor& a = P(0);
            const auto scheme = static_cast<phy::Constellation>(n.constellation);
            n.value = Tensor(a.shape());
            for (std::size_t i = 0; i < a.size(); i += 2) {
                const auto p = phy::nearest_point({a[i], a[i + 1]}, scheme);
                n.value[i] = p.real();
                n.value[i + 1] = p.imag();
            }
            break;
        }
        case Op::Argmax: {
            const Tensor& a = P(0);
            std::size_t best = 0;
            for (std::size_t i = 1; i < a.size(); ++i)
                if (a[i] > a[best]) best = i;
            n.value = Tensor::scalar(static_cast<double>(best));
            break;
        }
    }
}

// ---- backward ----

Tensor& Tape::grad_of(int id) {
    Node& n = nodes_[id];
    if (!n.grad_alloc) {
        n.grad = Tensor::zeros_like(n.value);
        n.grad_alloc = true;
    }
    return n.grad;
}

void Tape::backward(Var output, const Tensor& upstream) {
    if (!values_current_ && !nodes_.empty())
        throw std::runtime_error("tape: backward before forward (inputs changed without forward())");
    require(output.tape == this, "backward: output from another tape");
    Node& out = nodes_[output.id];
    require(upstream.same_shape(out.value), "backward: upstream shape does not match output");
    for (auto& n : nodes_) n.grad_alloc = false;
    grad_of(output.id) = upstream;
    for (int id = output.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.grad_alloc || !n.needs_grad) continue;
        backprop_node(id);
    }
    // scatter leaf gradients into their parameters
    for (auto& n : nodes_) {
        if (n.op == Op::Param && n.grad_alloc && n.param->trainable) {
            for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
        }
    }
}

void Tape::backprop_node(int id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    const auto P = [&](int k) -> const Tensor& { return nodes_[n.parents[k]].value; };
    const auto needs = [&](int k) { return nodes_[n.parents[k]].needs_grad; };
    const auto G = [&](int k) -> Tensor& { return grad_of(n.parents[k]); };

    switch (n.op) {
        case Op::Input:
        case Op::Param:
        case Op::Const:
            break;
        case Op::Add: {
            for (int k : {0, 1})
                if (needs(k)) {
                    Tensor& d = G(k);
                    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                }
            break;
        }
        case Op::Sub: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
            }
            if (needs(1)) {
                Tensor& d = G(1);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
            }
            break;
        }
        case Op::Mul: {
            if (needs(0)) {
                Tensor& d = G(0);
                const Tensor& b = P(1);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * b[i];
            }
            if (needs(1)) {
                Tensor& d = G(1);
                const Tensor& a = P(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * a[i];
            }
            break;
        }
        case Op::Neg: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
            }
            break;
        }
        case Op::Scale: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.attr_a;
            }
            break;
        }
        case Op::AddScalarC: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
            }
            break;
        }
        case Op::AddRow: {
            const std::size_t rows = n.value.dim(0), cols = n.value.dim(1);
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
            }
            if (needs(1)) {
                Tensor& d = G(1);
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j) d[j] += g[i * cols + j];
            }
            break;
        }
        case Op::Relu: {
            if (needs(0)) {
                Tensor& d = G(0);
                const Tensor& a = P(0);
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (a[i] > 0.0) d[i] += g[i];
            }
            break;
        }
        case Op::Tanh: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
            }
            break;
        }
        case Op::Sigmoid: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
            }
            break;
        }
        case Op::Exp: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.value[i];
            }
            break;
        }
        case Op::Log: {
            if (needs(0)) {
                Tensor& d = G(0);
                const Tensor& a = P(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] / a[i];
            }
            break;
        }
        case Op::Sqrt: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * 0.5 / n.value[i];
            }
            break;
        }
        case Op::Recip: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i] * n.value[i] * n.value[i];
            }
            break;
        }
        case Op::Abs: {
            if (needs(0)) {
                Tensor& d = G(0);
                const Tensor& a = P(0);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (a[i] > 0.0)
                        d[i] += g[i];
                    else if (a[i] < 0.0)
                        d[i] -= g[i];
                }
            }
            break;
        }
        case Op::Matmul: {
            const Tensor &a = P(0), &b = P(1);
            const std::size_t m = a.dim(0), k = a.dim(1), c = b.dim(1);
            if (needs(0)) {
                Tensor& d = G(0); // dA = g . B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* grow = g.data() + i * c;
                        const double* brow = b.data() + kk * c;
                        for (std::size_t j = 0; j < c; ++j) acc += grow[j] * brow[j];
                        d[i * k + kk] += acc;
                    }
            }
            if (needs(1)) {
                Tensor& d = G(1); // dB = A^T . g
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double av = a[i * k + kk];
                        if (av == 0.0) continue;
                        const double* grow = g.data() + i * c;
                        double* drow = d.data() + kk * c;
                        for (std::size_t j = 0; j < c; ++j) drow[j] += av * grow[j];
                    }
            }
            break;
        }
        case Op::Conv2d: {
            const Tensor &x = P(0), &w = P(1);
            int pt = 0, pl = 0;
            conv_out_shape(x.shape(), w.shape(), n.attr_i, n.attr_j, n.pad, pt, pl);
            const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
            const std::size_t K = w.dim(0), kh = w.dim(2), kw = w.dim(3);
            const std::size_t Ho = n.value.dim(1), Wo = n.value.dim(2);
            const bool nx = needs(0), nw = needs(1), nb = needs(2);
            Tensor* dx = nx ? &G(0) : nullptr;
            Tensor* dw = nw ? &G(1) : nullptr;
            Tensor* db = nb ? &G(2) : nullptr;
            for (std::size_t ko = 0; ko < K; ++ko)
                for (std::size_t io = 0; io < Ho; ++io)
                    for (std::size_t jo = 0; jo < Wo; ++jo) {
                        const double gv = g[(ko * Ho + io) * Wo + jo];
                        if (gv == 0.0) continue;
                        if (nb) (*db)[ko] += gv;
                        if (!nx && !nw) continue;
                        const long i0 = static_cast<long>(io) * n.attr_i - pt;
                        const long j0 = static_cast<long>(jo) * n.attr_j - pl;
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t ki = 0; ki < kh; ++ki) {
                                const long ii = i0 + static_cast<long>(ki);
                                if (ii < 0 || ii >= static_cast<long>(H)) continue;
                                for (std::size_t kj = 0; kj < kw; ++kj) {
                                    const long jj = j0 + static_cast<long>(kj);
                                    if (jj < 0 || jj >= static_cast<long>(W)) continue;
                                    const std::size_t xi = (c * H + ii) * W + jj;
                                    const std::size_t wi = ((ko * C + c) * kh + ki) * kw + kj;
                                    if (nx) (*dx)[xi] += gv * w[wi];
                                    if (nw) (*dw)[wi] += gv * x[xi];
                                }
                            }
                    }
            break;
        }
        case Op::Upsample2x: {
            if (needs(0)) {
                Tensor& d = G(0);
                const std::size_t C = d.dim(0), H = d.dim(1), W = d.dim(2);
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t i = 0; i < H; ++i)
                        for (std::size_t j = 0; j < W; ++j) {
                            const double* base = g.data() + (c * 2 * H + 2 * i) * 2 * W + 2 * j;
                            d[(c * H + i) * W + j] += base[0] + base[1] + base[2 * W] + base[2 * W + 1];
                        }
            }
            break;
        }
        case Op::Reshape: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
            }
            break;
        }
        case Op::ConcatAxis0: {
            const std::size_t an = P(0).size();
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < an; ++i) d[i] += g[i];
            }
            if (needs(1)) {
                Tensor& d = G(1);
                for (std::size_t i = 0; i < g.size() - an; ++i) d[i] += g[an + i];
            }
            break;
        }
        case Op::SliceRows: {
            if (needs(0)) {
                Tensor& d = G(0);
                const std::size_t row_elems = P(0).size() / P(0).dim(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[n.attr_i * row_elems + i] += g[i];
            }
            break;
        }
        case Op::SelectCols: {
            if (needs(0)) {
                Tensor& d = G(0);
                const Tensor& a = P(0);
                const std::size_t rows = a.dim(0), cols = a.dim(1);
                const std::size_t inner = a.size() / (rows * cols);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t k = 0; k < n.idx.size(); ++k)
                        for (std::size_t q = 0; q < inner; ++q)
                            d[(r * cols + n.idx[k]) * inner + q] += g[(r * n.idx.size() + k) * inner + q];
            }
            break;
        }
        case Op::SoftmaxRows: {
            if (needs(0)) {
                Tensor& d = G(0);
                const std::size_t rows = n.value.rank() == 1 ? 1 : n.value.dim(0);
                const std::size_t cols = n.value.size() / rows;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* y = n.value.data() + r * cols;
                    const double* gr = g.data() + r * cols;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
                    for (std::size_t j = 0; j < cols; ++j) d[r * cols + j] += y[j] * (gr[j] - dot);
                }
            }
            break;
        }
        case Op::SoftmaxXent: {
            require(!needs(1), "softmax_xent: targets must not require gradients");
            if (needs(0)) {
                Tensor& d = G(0);
                const Tensor &x = P(0), &t = P(1);
                const std::size_t rows = x.dim(0), cols = x.dim(1);
                const double gv = g[0] / static_cast<double>(rows);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* in = x.data() + r * cols;
                    double mx = in[0];
                    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
                    double sum = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) sum += std::exp(in[j] - mx);
                    for (std::size_t j = 0; j < cols; ++j) {
                        const double p = std::exp(in[j] - mx) / sum;
                        d[r * cols + j] += gv * (p - t[r * cols + j]);
                    }
                }
            }
            break;
        }
        case Op::Mse: {
            const Tensor &a = P(0), &b = P(1);
            const double gv = 2.0 * g[0] / static_cast<double>(a.size());
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < a.size(); ++i) d[i] += gv * (a[i] - b[i]);
            }
            if (needs(1)) {
                Tensor& d = G(1);
                for (std::size_t i = 0; i < a.size(); ++i) d[i] -= gv * (a[i] - b[i]);
            }
            break;
        }
        case Op::MeanAbs: {
            if (needs(0)) {
                Tensor& d = G(0);
                const Tensor& a = P(0);
                const double gv = g[0] / static_cast<double>(a.size());
                for (std::size_t i = 0; i < a.size(); ++i) {
                    if (a[i] > 0.0)
                        d[i] += gv;
                    else if (a[i] < 0.0)
                        d[i] -= gv;
                }
            }
            break;
        }
        case Op::Sum: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
            }
            break;
        }
        case Op::Mean: {
            if (needs(0)) {
                Tensor& d = G(0);
                const double gv = g[0] / static_cast<double>(d.size());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv;
            }
            break;
        }
        case Op::ScaleBy: {
            const double s = P(1)[0];
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * s;
            }
            if (needs(1)) {
                Tensor& d = G(1);
                const Tensor& a = P(0);
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * a[i];
                d[0] += acc;
            }
            break;
        }
        case Op::At: {
            if (needs(0)) G(0)[static_cast<std::size_t>(n.attr_i)] += g[0];
            break;
        }
        case Op::MaxExcept: {
            if (needs(0)) {
                const Tensor& a = P(0);
                std::size_t best = n.attr_i == 0 ? 1 : 0;
                for (std::size_t i = 0; i < a.size(); ++i) {
                    if (static_cast<int>(i) == n.attr_i) continue;
                    if (a[i] > a[best]) best = i;
                }
                G(0)[best] += g[0];
            }
            break;
        }
        case Op::ChannelsLast: {
            if (needs(0)) {
                Tensor& d = G(0);
                const std::size_t C = d.dim(0), H = d.dim(1), W = d.dim(2);
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t i = 0; i < H; ++i)
                        for (std::size_t j = 0; j < W; ++j)
                            d[(c * H + i) * W + j] += g[(i * W + j) * C + c];
            }
            break;
        }
        case Op::Swap01: {
            if (needs(0)) {
                Tensor& d = G(0);
                const std::size_t A = d.dim(0), B = d.dim(1);
                const std::size_t inner = d.size() / (A * B);
                for (std::size_t i = 0; i < A; ++i)
                    for (std::size_t j = 0; j < B; ++j)
                        for (std::size_t q = 0; q < inner; ++q)
                            d[(i * B + j) * inner + q] += g[(j * A + i) * inner + q];
            }
            break;
        }
        case Op::CMul: {
            const Tensor &a = P(0), &b = P(1);
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); i += 2) {
                    d[i] += g[i] * b[i] + g[i + 1] * b[i + 1];
                    d[i + 1] += -g[i] * b[i + 1] + g[i + 1] * b[i];
                }
            }
            if (needs(1)) {
                Tensor& d = G(1);
                for (std::size_t i = 0; i < g.size(); i += 2) {
                    d[i] += g[i] * a[i] + g[i + 1] * a[i + 1];
                    d[i + 1] += -g[i] * a[i + 1] + g[i + 1] * a[i];
                }
            }
            break;
        }
        case Op::Conj: {
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); i += 2) {
                    d[i] += g[i];
                    d[i + 1] -= g[i + 1];
                }
            }
            break;
        }
        case Op::MapConst: {
            // straight-through: gradient passes unchanged through the quantizer
            if (needs(0)) {
                Tensor& d = G(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
            }
            break;
        }
        case Op::Argmax: {
            if (needs(0))
                throw std::runtime_error("tape: non-differentiable node (argmax) on backward path, node " +
                                         std::to_string(id));
            break;
        }
    }
}

double Tape::finite_diff_check(Var output, double step) {
    if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be > 0");
    require(output.tape == this, "finite_diff_check: output from another tape");
    require(nodes_[output.id].value.size() == 1, "finite_diff_check: output must be scalar");

    // collect distinct trainable parameters bound on this tape
    std::vector<Parameter*> params;
    for (const auto& n : nodes_)
        if (n.op == Op::Param && n.param->trainable &&
            std::find(params.begin(), params.end(), n.param) == params.end())
            params.push_back(n.param);

    for (Parameter* p : params) p->grad.fill(0.0);
    if (!values_current_) forward();
    backward(output, Tensor::scalar(1.0));

    double max_rel = 0.0;
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + step;
            forward();
            const double fp = nodes_[output.id].value[0];
            p->value[i] = saved - step;
            forward();
            const double fm = nodes_[output.id].value[0];
            p->value[i] = saved;
            const double fd = (fp - fm) / (2.0 * step);
            const double ad = p->grad[i];
            const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-3});
            max_rel = std::max(max_rel, std::fabs(fd - ad) / denom);
        }
    }
    forward();
    for (Parameter* p : params) p->grad.fill(0.0);
    return max_rel;
}

// ---- builder functions ----

static Node binary(Op op, Var a, Var b) {
    require(a.tape == b.tape, "operands from different tapes");
    Node n;
    n.op = op;
    n.parents[0] = a.id;
    n.parents[1] = b.id;
    return n;
}

static Node unary(Op op, Var a) {
    Node n;
    n.op = op;
    n.parents[0] = a.id;
    return n;
}

static void require_same_shape(Var a, Var b, const char* what) {
    require(a.shape() == b.shape(), std::string(what) + ": shape mismatch " +
                                        Tensor::shape_str(a.shape()) + " vs " + Tensor::shape_str(b.shape()));
}

Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    return make_node(*a.tape, binary(Op::Add, a, b));
}
Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    return make_node(*a.tape, binary(Op::Sub, a, b));
}
Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    return make_node(*a.tape, binary(Op::Mul, a, b));
}
Var neg(Var a) { return make_node(*a.tape, unary(Op::Neg, a)); }
Var scale(Var a, double c) {
    Node n = unary(Op::Scale, a);
    n.attr_a = c;
    return make_node(*a.tape, std::move(n));
}
Var add_scalar(Var a, double c) {
    Node n = unary(Op::AddScalarC, a);
    n.attr_a = c;
    return make_node(*a.tape, std::move(n));
}
Var add_row(Var a, Var row) {
    require(a.shape().size() == 2, "add_row: lhs must be rank 2");
    require(row.shape().size() == 1 && row.shape()[0] == a.shape()[1], "add_row: row width mismatch");
    return make_node(*a.tape, binary(Op::AddRow, a, row));
}
Var relu(Var a) { return make_node(*a.tape, unary(Op::Relu, a)); }
Var tanh_(Var a) { return make_node(*a.tape, unary(Op::Tanh, a)); }
Var sigmoid(Var a) { return make_node(*a.tape, unary(Op::Sigmoid, a)); }
Var exp_(Var a) { return make_node(*a.tape, unary(Op::Exp, a)); }
Var log_(Var a) { return make_node(*a.tape, unary(Op::Log, a)); }
Var sqrt_(Var a) { return make_node(*a.tape, unary(Op::Sqrt, a)); }
Var recip(Var a) { return make_node(*a.tape, unary(Op::Recip, a)); }
Var abs_(Var a) { return make_node(*a.tape, unary(Op::Abs, a)); }

Var matmul(Var a, Var b) {
    require(a.shape().size() == 2 && b.shape().size() == 2, "matmul: operands must be rank 2");
    require(a.shape()[1] == b.shape()[0], "matmul: inner dimensions differ");
    return make_node(*a.tape, binary(Op::Matmul, a, b));
}

Var conv2d(Var x, Var kernel, Var bias, int stride_h, int stride_w, PadMode pad) {
    require(bias.shape().size() == 1 && bias.shape()[0] == kernel.shape()[0],
            "conv2d: bias length must equal kernel count");
    Node n = binary(Op::Conv2d, x, kernel);
    n.parents[2] = bias.id;
    n.attr_i = stride_h;
    n.attr_j = stride_w;
    n.pad = pad;
    return make_node(*x.tape, std::move(n));
}

Var conv2d(Var x, Var kernel, Var bias, int stride, PadMode pad) {
    return conv2d(x, kernel, bias, stride, stride, pad);
}

Var upsample2x(Var x) {
    require(x.shape().size() == 3, "upsample2x: input must be [C,H,W]");
    return make_node(*x.tape, unary(Op::Upsample2x, x));
}

Var reshape(Var a, std::vector<std::size_t> shape) {
    require(Tensor::count_of(shape) == a.value().size(), "reshape: element count mismatch");
    Node n = unary(Op::Reshape, a);
    n.idx = std::move(shape);
    return make_node(*a.tape, std::move(n));
}

Var concat0(Var a, Var b) {
    require(a.shape().size() == b.shape().size() && !a.shape().empty(), "concat0: rank mismatch");
    for (std::size_t i = 1; i < a.shape().size(); ++i)
        require(a.shape()[i] == b.shape()[i], "concat0: trailing dims differ");
    return make_node(*a.tape, binary(Op::ConcatAxis0, a, b));
}

Var slice_rows(Var a, int row_begin, int row_end) {
    require(!a.shape().empty(), "slice_rows: rank 0");
    require(row_begin >= 0 && row_end > row_begin && row_end <= static_cast<int>(a.shape()[0]),
            "slice_rows: range out of bounds");
    Node n = unary(Op::SliceRows, a);
    n.attr_i = row_begin;
    n.attr_j = row_end;
    return make_node(*a.tape, std::move(n));
}

Var select_cols(Var a, std::vector<std::size_t> cols) {
    require(a.shape().size() >= 2, "select_cols: input must be rank >= 2");
    require(!cols.empty(), "select_cols: empty index list");
    for (std::size_t c : cols) require(c < a.shape()[1], "select_cols: index out of range");
    Node n = unary(Op::SelectCols, a);
    n.idx = std::move(cols);
    return make_node(*a.tape, std::move(n));
}

Var softmax_rows(Var a) {
    require(a.shape().size() <= 2, "softmax: input must be rank 1 or 2");
    return make_node(*a.tape, unary(Op::SoftmaxRows, a));
}

Var softmax_xent(Var logits, Var onehot) {
    require(logits.shape().size() == 2, "softmax_xent: logits must be rank 2");
    require_same_shape(logits, onehot, "softmax_xent");
    return make_node(*logits.tape, binary(Op::SoftmaxXent, logits, onehot));
}

Var mse(Var a, Var b) {
    require_same_shape(a, b, "mse");
    return make_node(*a.tape, binary(Op::Mse, a, b));
}
Var mean_abs(Var a) { return make_node(*a.tape, unary(Op::MeanAbs, a)); }
Var sum(Var a) { return make_node(*a.tape, unary(Op::Sum, a)); }
Var mean(Var a) { return make_node(*a.tape, unary(Op::Mean, a)); }

Var scale_by(Var a, Var s) {
    require(s.value().size() == 1, "scale_by: scale must be a single element");
    return make_node(*a.tape, binary(Op::ScaleBy, a, s));
}

Var at(Var a, int index) {
    require(index >= 0 && index < static_cast<int>(a.value().size()), "at: index out of range");
    Node n = unary(Op::At, a);
    n.attr_i = index;
    return make_node(*a.tape, std::move(n));
}

Var max_except(Var a, int banned_index) {
    require(a.value().size() >= 2, "max_except: need at least two elements");
    require(banned_index >= 0 && banned_index < static_cast<int>(a.value().size()),
            "max_except: index out of range");
    Node n = unary(Op::MaxExcept, a);
    n.attr_i = banned_index;
    return make_node(*a.tape, std::move(n));
}

Var channels_last(Var a) {
    require(a.shape().size() == 3, "channels_last: input must be [C,H,W]");
    return make_node(*a.tape, unary(Op::ChannelsLast, a));
}

Var swap01(Var a) {
    require(a.shape().size() >= 2, "swap01: input must be rank >= 2");
    return make_node(*a.tape, unary(Op::Swap01, a));
}

static void require_complex(Var a, const char* what) {
    require(!a.shape().empty() && a.shape().back() == 2,
            std::string(what) + ": tensor must end in a 2-wide complex channel");
}

Var cmul(Var a, Var b) {
    require_same_shape(a, b, "cmul");
    require_complex(a, "cmul");
    return make_node(*a.tape, binary(Op::CMul, a, b));
}

Var conj_(Var a) {
    require_complex(a, "conj");
    return make_node(*a.tape, unary(Op::Conj, a));
}

Var map_constellation_ste(Var a, int scheme) {
    require_complex(a, "map_constellation");
    Node n = unary(Op::MapConst, a);
    n.constellation = scheme;
    return make_node(*a.tape, std::move(n));
}

Var argmax(Var a) { return make_node(*a.tape, unary(Op::Argmax, a)); }

} // namespace wsim::nn
