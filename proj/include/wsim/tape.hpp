// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_TAPE_HPP
#define WSIM_TAPE_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "wsim/tensor.hpp"

namespace wsim::nn {

// A trainable tensor living outside any tape. Gradients accumulate into
// `grad` across backward passes until zero_grad().
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter(std::string n, Tensor v, bool train = true)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)), trainable(train) {}
};

enum class Op : std::uint8_t {
    Input, Param, Const,
    Add, Sub, Mul, Neg,
    Scale,        // x * attr_a
    AddScalarC,   // x + attr_a
    AddRow,       // [r,c] + broadcast row [c]
    Relu, Tanh, Sigmoid, Exp, Log, Sqrt, Recip, Abs,
    Matmul,       // [m,k] x [k,n]
    Conv2d,       // ([C,H,W], kernel [K,C,kh,kw], bias [K]); stride/pad in attrs
    Upsample2x,   // [C,H,W] -> [C,2H,2W] nearest neighbour
    Reshape,
    ConcatAxis0,
    SliceRows,    // rows [attr_i, attr_j) of axis 0
    SelectCols,   // gather along axis 1 of [R,C,...] by index list
    SoftmaxRows,  // softmax over last axis of [r,c] (or over a 1-d vector)
    SoftmaxXent,  // (logits [r,c], onehot [r,c]) -> mean CE over rows
    Mse,          // mean squared difference, scalar
    MeanAbs,      // mean |x|, scalar
    Sum, Mean,
    ScaleBy,      // x * s where s is a [1] node
    At,           // flat element attr_i -> [1]
    MaxExcept,    // max over flat vector excluding attr_i -> [1]
    ChannelsLast, // [C,H,W] -> [H,W,C]
    Swap01,       // [A,B,rest] -> [B,A,rest]
    CMul,         // complex multiply on trailing-2-channel tensors
    Conj,         // complex conjugate on trailing-2-channel tensors
    MapConst,     // nearest constellation point; straight-through backward
    Argmax,       // flat argmax index as value; not differentiable
};

const char* op_name(Op op);

enum class PadMode : std::uint8_t { Same, Valid };

struct Node {
    Op op = Op::Const;
    int parents[3] = {-1, -1, -1};
    Tensor value;
    Tensor grad;           // allocated during backward
    bool needs_grad = false;
    bool grad_alloc = false;

    // op attributes
    double attr_a = 0.0;
    int attr_i = 0;
    int attr_j = 0;
    PadMode pad = PadMode::Valid;
    int constellation = 0;              // for MapConst
    std::vector<std::size_t> idx;       // for SelectCols
    std::string name;                   // for Input/Param
    Parameter* param = nullptr;         // for Param
};

class Tape;

// Lightweight node handle. All graph-building functions are free functions
// taking and returning Var.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& value() const;
    const std::vector<std::size_t>& shape() const;
};

// Reverse-mode tape. Nodes are appended in topological order and evaluated
// eagerly at build time; forward() replays the recorded program against the
// current input/parameter values, backward() accumulates gradients for every
// trainable parameter reached from the seeded output.
class Tape {
public:
    Var input(const std::string& name, Tensor value);
    Var param(Parameter& p);
    Var constant(Tensor value);
    Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    void set_input(const std::string& name, Tensor value);

    // Recomputes every node value in topological order. Throws on non-finite
    // intermediates (reporting the node id and op).
    void forward();

    // Seeds `output` with `upstream` and accumulates gradients into every
    // trainable Parameter on the path. May be called directly after eager
    // construction (construction is itself a forward pass).
    void backward(Var output, const Tensor& upstream);
    void backward(Var output) { backward(output, Tensor::scalar(1.0)); }

    const Node& node(int id) const { return nodes_[id]; }
    Node& node(int id) { return nodes_[id]; }
    std::size_t node_count() const { return nodes_.size(); }

    // Max relative error between recorded parameter gradients and central
    // finite differences of the scalar `output`, over every trainable
    // parameter scalar on the tape. Replays forward() per probe.
    double finite_diff_check(Var output, double step);

    friend struct Var;
    friend Var make_node(Tape& t, Node n);

private:
    int add_node(Node n);
    void eval_node(int id);
    void backprop_node(int id);
    Tensor& grad_of(int id);

    std::vector<Node> nodes_;
    std::map<std::string, int> inputs_;
    bool values_current_ = true; // nodes evaluate eagerly; set_input invalidates until forward()
};

// ---- graph builders ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var add_row(Var a, Var row);
Var relu(Var a);
Var tanh_(Var a);
Var sigmoid(Var a);
Var exp_(Var a);
Var log_(Var a);
Var sqrt_(Var a);
Var recip(Var a);
Var abs_(Var a);
Var matmul(Var a, Var b);
Var conv2d(Var x, Var kernel, Var bias, int stride, PadMode pad);
Var conv2d(Var x, Var kernel, Var bias, int stride_h, int stride_w, PadMode pad);
Var upsample2x(Var x);
Var reshape(Var a, std::vector<std::size_t> shape);
Var concat0(Var a, Var b);
Var slice_rows(Var a, int row_begin, int row_end);
Var select_cols(Var a, std::vector<std::size_t> cols);
Var softmax_rows(Var a);
Var softmax_xent(Var logits, Var onehot);
Var mse(Var a, Var b);
Var mean_abs(Var a);
Var sum(Var a);
Var mean(Var a);
Var scale_by(Var a, Var s);
Var at(Var a, int index);
Var max_except(Var a, int banned_index);
Var channels_last(Var a);
Var swap01(Var a);
Var cmul(Var a, Var b);
Var conj_(Var a);
Var map_constellation_ste(Var a, int scheme);
Var argmax(Var a);

} // namespace wsim::nn

#endif
