// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_OPTIM_HPP
#define WSIM_OPTIM_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "wsim/rng.hpp"
#include "wsim/tape.hpp"

namespace wsim::nn {

// Owns named parameters; registration order is stable, names are unique.
class ParamStore {
public:
    Parameter& create(const std::string& name, std::vector<std::size_t> shape);

    // uniform in [-bound, bound] with bound = sqrt(6 / (fan_in + fan_out))
    Parameter& create_glorot(const std::string& name, std::vector<std::size_t> shape,
                             std::size_t fan_in, std::size_t fan_out, RngStream& rng);

    // uniform in [-bound, bound] with bound = sqrt(6 / fan_in); suits relu stacks
    Parameter& create_he(const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in,
                         RngStream& rng);

    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    std::size_t scalar_count() const;

    void zero_grad();

    std::map<std::string, Tensor> to_tensors() const;
    // shapes must match the registered parameters
    void load_tensors(const std::map<std::string, Tensor>& tensors);

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::map<std::string, std::size_t> index_;
};

// Adam with bias correction. Moment buffers are keyed per parameter and
// created on first use; `t` is the shared step counter.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;

    struct Moments {
        Tensor m, v;
    };
    std::map<const Parameter*, Moments> moments;
};

// One update over every trainable parameter using its accumulated gradient;
// gradients are cleared afterwards. Throws on non-finite gradients.
void adam_step(std::vector<Parameter*> params, AdamState& state);
void adam_step(ParamStore& store, AdamState& state);

} // namespace wsim::nn

#endif
