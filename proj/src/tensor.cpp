// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace stagescore {

namespace {

std::size_t checked_volume(const std::vector<int>& shape) {
    if (shape.empty()) {
        throw std::invalid_argument("tensor shape must have at least one dimension");
    }
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw std::invalid_argument("tensor dimensions must be positive, got " +
                                        shape_string(shape));
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(checked_volume(shape_), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_volume(shape_) != data_.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_string(shape_));
    }
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = value;
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("from_rows requires at least one row");
    const int c = static_cast<int>(rows.front().size());
    Tensor t({static_cast<int>(rows.size()), c});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<int>(rows[i].size()) != c) {
            throw std::invalid_argument("from_rows requires rectangular data");
        }
        for (int j = 0; j < c; ++j) t.at(static_cast<int>(i), j) = rows[i][j];
    }
    return t;
}

int Tensor::rows() const {
    if (ndim() == 1) return 1;
    if (ndim() == 2) return shape_[0];
    throw std::invalid_argument("rows() requires a 1-D or 2-D tensor, got " +
                                shape_string(shape_));
}

int Tensor::cols() const {
    if (ndim() == 1) return shape_[0];
    if (ndim() == 2) return shape_[1];
    throw std::invalid_argument("cols() requires a 1-D or 2-D tensor, got " +
                                shape_string(shape_));
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += " x ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("max_abs_diff shape mismatch: " + shape_string(a.shape()) +
                                    " vs " + shape_string(b.shape()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    }
    return m;
}

}  // namespace stagescore
