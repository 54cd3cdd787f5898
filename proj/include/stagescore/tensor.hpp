// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace stagescore {

// Dense row-major tensor of 64-bit floats. Values are copied, never viewed;
// everything in this project is small enough that copies are cheap.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double value);
    static Tensor identity(int n);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    // 2-D convenience constructor from nested initializer data.
    static Tensor from_rows(const std::vector<std::vector<double>>& rows);

    const std::vector<int>& shape() const { return shape_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    std::size_t size() const { return data_.size(); }
    int ndim() const { return static_cast<int>(shape_.size()); }

    // 2-D accessors; a 1-D tensor is treated as a single row.
    int rows() const;
    int cols() const;
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols() + j]; }
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * cols() + j]; }
    double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
    double& at(int i) { return data_[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::string shape_string(const std::vector<int>& shape);

// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace stagescore
