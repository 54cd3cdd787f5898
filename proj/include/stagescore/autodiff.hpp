// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "stagescore/tensor.hpp"

namespace stagescore {

struct Parameter;

// One node of a reverse-mode differentiation graph. Graphs are built fresh
// for every forward pass and discarded afterwards; nodes are owned via
// shared_ptr by their consumers, so a root Var keeps its whole history alive.
struct Node {
    Tensor value;
    Tensor grad;  // same shape as value, zeroed at construction
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // accumulates into parents' grads
    Parameter* param = nullptr;           // set for leaves bound to a Parameter
    bool requires_grad = false;
};

// Value handle used by all forward code. Copying a Var copies the handle,
// not the tensor.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    const std::shared_ptr<Node>& node() const { return node_; }
    bool defined() const { return node_ != nullptr; }

private:
    std::shared_ptr<Node> node_;
};

// Leaves.
Var constant(Tensor value);
Var leaf(Parameter& param);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// Elementwise (same shape unless noted).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var scalar_mul(const Var& a, const Var& s);  // s is a single-element Var
Var sigmoid(const Var& a);
Var elu(const Var& a, double alpha = 1.0);
Var leaky_relu(const Var& a, double slope);
Var exp_of(const Var& a);
Var log_of(const Var& a);          // requires strictly positive entries
Var pow_of(const Var& a, double p);  // requires nonnegative entries
Var clamp(const Var& a, double lo, double hi);

// Reductions and shape surgery.
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var mean_over_rows(const Var& a);  // [m x n] -> [1 x n]
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int row_begin, int row_end);
Var slice_cols(const Var& a, int col_begin, int col_end);
Var reshape(const Var& a, std::vector<int> shape);

// Normalization and attention building blocks.
//
// layer_norm normalizes each row to zero mean / unit variance (biased
// variance, epsilon inside the square root) before applying the learnable
// per-column gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// Row-wise softmax over the positions whose mask entry is 0; positions with
// mask -inf are exactly 0 in the output. Every row must keep at least one
// admissible position. Stable via max subtraction.
Var softmax_masked(const Var& logits, const Tensor& mask);

// x[m x k] * w[k x n] + b (b broadcast across rows; b is 1-D of length n).
Var linear(const Var& x, const Var& w, const Var& b);

// Runs reverse-mode accumulation from a single-element root, then adds each
// bound leaf's gradient into its Parameter::grad.
void backward(const Var& root);

double scalar(const Var& v);

}  // namespace stagescore
