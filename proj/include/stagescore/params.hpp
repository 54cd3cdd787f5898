// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "stagescore/rng.hpp"
#include "stagescore/tensor.hpp"

namespace stagescore {

// A named trainable tensor. Gradients accumulate across backward passes until
// zero_grad is called, so gradient accumulation over a batch needs no extra
// machinery.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string name_, Tensor value_)
        : name(std::move(name_)), value(std::move(value_)), grad(Tensor::zeros(value.shape())) {}

    void zero_grad() {
        for (double& g : grad.data()) g = 0.0;
    }
};

// Owns every parameter of a model. Names are unique; creation order is stable
// and defines the iteration order everywhere (optimizer state, checkpoints,
// gradient checks), which keeps runs bitwise reproducible.
class ParameterStore {
public:
    Parameter& create(const std::string& name, Tensor init);
    // Xavier-uniform init: U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
    Parameter& create_xavier(const std::string& name, int fan_in, int fan_out, Rng& rng);
    Parameter& create_zeros(const std::string& name, std::vector<int> shape);
    Parameter& create_full(const std::string& name, std::vector<int> shape, double v);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    std::size_t size() const { return params_.size(); }
    std::size_t total_elements() const;

    void zero_grad();

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace stagescore
