// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace wsim::nn {

Parameter& ParamStore::create(const std::string& name, std::vector<std::size_t> shape) {
    if (index_.count(name)) throw std::invalid_argument("param store: duplicate name " + name);
    params_.push_back(std::make_unique<Parameter>(name, Tensor(std::move(shape))));
    index_[name] = params_.size() - 1;
    return *params_.back();
}

Parameter& ParamStore::create_glorot(const std::string& name, std::vector<std::size_t> shape,
                                     std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
    Parameter& p = create(name, std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    // draws come from a stream derived from the parameter name, so the
    // initialization of one layer does not depend on its siblings
    RngStream s = rng.derive(name);
    for (auto& v : p.value.vec()) v = s.uniform(-bound, bound);
    return p;
}

Parameter& ParamStore::create_he(const std::string& name, std::vector<std::size_t> shape,
                                 std::size_t fan_in, RngStream& rng) {
    Parameter& p = create(name, std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    RngStream s = rng.derive(name);
    for (auto& v : p.value.vec()) v = s.uniform(-bound, bound);
    return p;
}

Parameter& ParamStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("param store: unknown name " + name);
    return *params_[it->second];
}

const Parameter& ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("param store: unknown name " + name);
    return *params_[it->second];
}

std::vector<Parameter*> ParamStore::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Parameter*> ParamStore::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p->grad.fill(0.0);
}

std::map<std::string, Tensor> ParamStore::to_tensors() const {
    std::map<std::string, Tensor> out;
    for (const auto& p : params_) out.emplace(p->name, p->value);
    return out;
}

void ParamStore::load_tensors(const std::map<std::string, Tensor>& tensors) {
    for (auto& p : params_) {
        auto it = tensors.find(p->name);
        if (it == tensors.end()) throw std::invalid_argument("checkpoint missing parameter " + p->name);
        if (!it->second.same_shape(p->value))
            throw std::invalid_argument("checkpoint shape mismatch for " + p->name);
        p->value = it->second;
        p->grad.fill(0.0);
    }
}

void adam_step(std::vector<Parameter*> params, AdamState& state) {
    if (state.lr <= 0.0) throw std::invalid_argument("adam: lr must be > 0");
    for (Parameter* p : params) {
        if (!p->trainable) continue;
        if (!p->grad.all_finite())
            throw std::runtime_error("adam: non-finite gradient for parameter " + p->name);
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (Parameter* p : params) {
        if (!p->trainable) continue;
        auto& mom = state.moments[p];
        if (mom.m.size() == 0) {
            mom.m = Tensor::zeros_like(p->value);
            mom.v = Tensor::zeros_like(p->value);
        }
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad[i];
            mom.m[i] = state.beta1 * mom.m[i] + (1.0 - state.beta1) * g;
            mom.v[i] = state.beta2 * mom.v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            p->value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        p->grad.fill(0.0);
    }
}

void adam_step(ParamStore& store, AdamState& state) { adam_step(store.all(), state); }

} // namespace wsim::nn
