// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/params.hpp"

#include <cmath>
#include <stdexcept>

namespace stagescore {

Parameter& ParameterStore::create(const std::string& name, Tensor init) {
    if (index_.count(name)) {
        throw std::invalid_argument("ParameterStore: duplicate parameter name '" + name + "'");
    }
    params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
    index_[name] = params_.size() - 1;
    return *params_.back();
}

Parameter& ParameterStore::create_xavier(const std::string& name, int fan_in, int fan_out,
                                         Rng& rng) {
    if (fan_in <= 0 || fan_out <= 0) {
        throw std::invalid_argument("ParameterStore: xavier fans must be positive");
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t({fan_in, fan_out});
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return create(name, std::move(t));
}

Parameter& ParameterStore::create_zeros(const std::string& name, std::vector<int> shape) {
    return create(name, Tensor::zeros(std::move(shape)));
}

Parameter& ParameterStore::create_full(const std::string& name, std::vector<int> shape, double v) {
    return create(name, Tensor::full(std::move(shape), v));
}

Parameter& ParameterStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::invalid_argument("ParameterStore: unknown parameter '" + name + "'");
    }
    return *params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::invalid_argument("ParameterStore: unknown parameter '" + name + "'");
    }
    return *params_[it->second];
}

std::vector<Parameter*> ParameterStore::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::size_t ParameterStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

}  // namespace stagescore
