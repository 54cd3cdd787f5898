// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "stagescore/params.hpp"

namespace stagescore {

namespace {

std::shared_ptr<Node> make_node(Tensor value, std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->grad = Tensor::zeros(value.shape());
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
    for (const auto& p : n->parents) {
        if (p->requires_grad) n->requires_grad = true;
    }
    return n;
}

void require_2d(const Var& v, const char* op) {
    if (v.value().ndim() > 2) {
        throw std::invalid_argument(std::string(op) + ": tensor must be 1-D or 2-D, got " +
                                    shape_string(v.value().shape()));
    }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value())) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_string(a.value().shape()) + " vs " +
                                    shape_string(b.value().shape()));
    }
}

// Elementwise map with pointwise derivative. fn and dfn receive the input
// element; dfn must be the derivative at that element.
Var unary_map(const Var& a, std::function<double(double)> fn, std::function<double(double)> dfn) {
    Tensor out(a.value().shape());
    for (std::size_t i = 0; i < a.value().size(); ++i) out.data()[i] = fn(a.value().data()[i]);
    auto a_node = a.node();
    auto dfn_copy = dfn;
    return Var(make_node(std::move(out), {a_node}, [a_node, dfn_copy](Node& self) {
        if (!a_node->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            a_node->grad.data()[i] += self.grad.data()[i] * dfn_copy(a_node->value.data()[i]);
        }
    }));
}

}  // namespace

Var constant(Tensor value) {
    auto n = make_node(std::move(value), {}, nullptr);
    n->requires_grad = false;
    return Var(n);
}

Var leaf(Parameter& param) {
    auto n = make_node(param.value, {}, nullptr);
    n->param = &param;
    n->requires_grad = true;
    return Var(n);
}

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() != 2 || bv.ndim() != 2 || av.cols() != bv.rows()) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_string(av.shape()) +
                                    " vs " + shape_string(bv.shape()));
    }
    const int m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = av.at(i, p);
            if (aip == 0.0) continue;
            for (int j = 0; j < n; ++j) out.at(i, j) += aip * bv.at(p, j);
        }
    }
    auto an = a.node();
    auto bn = b.node();
    return Var(make_node(std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
        // dA += G * B^T, dB += A^T * G
        if (an->requires_grad) {
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += self.grad.at(i, j) * bn->value.at(p, j);
                    an->grad.at(i, p) += acc;
                }
        }
        if (bn->requires_grad) {
            for (int p = 0; p < k; ++p)
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i) acc += an->value.at(i, p) * self.grad.at(i, j);
                    bn->grad.at(p, j) += acc;
                }
        }
    }));
}

Var transpose(const Var& a) {
    const Tensor& av = a.value();
    if (av.ndim() != 2) {
        throw std::invalid_argument("transpose: requires a 2-D tensor, got " +
                                    shape_string(av.shape()));
    }
    const int m = av.rows(), n = av.cols();
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = av.at(i, j);
    auto an = a.node();
    return Var(make_node(std::move(out), {an}, [an, m, n](Node& self) {
        if (!an->requires_grad) return;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) an->grad.at(i, j) += self.grad.at(j, i);
    }));
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = a.value().data()[i] + b.value().data()[i];
    auto an = a.node();
    auto bn = b.node();
    return Var(make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                an->grad.data()[i] += self.grad.data()[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                bn->grad.data()[i] += self.grad.data()[i];
    }));
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = a.value().data()[i] - b.value().data()[i];
    auto an = a.node();
    auto bn = b.node();
    return Var(make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                an->grad.data()[i] += self.grad.data()[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                bn->grad.data()[i] -= self.grad.data()[i];
    }));
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = a.value().data()[i] * b.value().data()[i];
    auto an = a.node();
    auto bn = b.node();
    return Var(make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                an->grad.data()[i] += self.grad.data()[i] * bn->value.data()[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                bn->grad.data()[i] += self.grad.data()[i] * an->value.data()[i];
    }));
}

Var scale(const Var& a, double c) {
    return unary_map(
        a, [c](double x) { return c * x; }, [c](double) { return c; });
}

Var scalar_mul(const Var& a, const Var& s) {
    if (s.value().size() != 1) {
        throw std::invalid_argument("scalar_mul: scalar operand must have exactly one element, got " +
                                    shape_string(s.value().shape()));
    }
    const double sv = s.value().data()[0];
    Tensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.value().data()[i] * sv;
    auto an = a.node();
    auto sn = s.node();
    return Var(make_node(std::move(out), {an, sn}, [an, sn, sv](Node& self) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                an->grad.data()[i] += self.grad.data()[i] * sv;
        if (sn->requires_grad) {
            double acc = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                acc += self.grad.data()[i] * an->value.data()[i];
            sn->grad.data()[0] += acc;
        }
    }));
}

Var sigmoid(const Var& a) {
    return unary_map(
        a,
        [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double x) {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        });
}

Var elu(const Var& a, double alpha) {
    return unary_map(
        a,
        [alpha](double x) { return x >= 0.0 ? x : alpha * (std::exp(x) - 1.0); },
        [alpha](double x) { return x >= 0.0 ? 1.0 : alpha * std::exp(x); });
}

Var leaky_relu(const Var& a, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) {
        throw std::invalid_argument("leaky_relu: slope must lie in (0, 1), got " +
                                    std::to_string(slope));
    }
    return unary_map(
        a,
        [slope](double x) { return x >= 0.0 ? x : slope * x; },
        [slope](double x) { return x >= 0.0 ? 1.0 : slope; });
}

Var exp_of(const Var& a) {
    return unary_map(
        a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log_of(const Var& a) {
    for (double x : a.value().data()) {
        if (!(x > 0.0)) {
            throw std::invalid_argument("log: requires strictly positive entries, got " +
                                        std::to_string(x));
        }
    }
    return unary_map(
        a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var pow_of(const Var& a, double p) {
    for (double x : a.value().data()) {
        if (x < 0.0) {
            throw std::invalid_argument("pow: requires nonnegative entries, got " +
                                        std::to_string(x));
        }
    }
    return unary_map(
        a,
        [p](double x) { return std::pow(x, p); },
        [p](double x) {
            if (x == 0.0) return p == 1.0 ? 1.0 : 0.0;
            return p * std::pow(x, p - 1.0);
        });
}

Var clamp(const Var& a, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
    return unary_map(
        a,
        [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum_all(const Var& a) {
    double acc = 0.0;
    for (double x : a.value().data()) acc += x;
    auto an = a.node();
    return Var(make_node(Tensor::scalar(acc), {an}, [an](Node& self) {
        if (!an->requires_grad) return;
        const double g = self.grad.data()[0];
        for (double& d : an->grad.data()) d += g;
    }));
}

Var mean_all(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a.value().size());
    double acc = 0.0;
    for (double x : a.value().data()) acc += x;
    auto an = a.node();
    return Var(make_node(Tensor::scalar(acc * inv), {an}, [an, inv](Node& self) {
        if (!an->requires_grad) return;
        const double g = self.grad.data()[0] * inv;
        for (double& d : an->grad.data()) d += g;
    }));
}

Var mean_over_rows(const Var& a) {
    require_2d(a, "mean_over_rows");
    const int m = a.value().rows(), n = a.value().cols();
    Tensor out({1, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(0, j) += a.value().at(i, j);
    for (int j = 0; j < n; ++j) out.at(0, j) /= m;
    auto an = a.node();
    return Var(make_node(std::move(out), {an}, [an, m, n](Node& self) {
        if (!an->requires_grad) return;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) an->grad.at(i, j) += self.grad.at(0, j) / m;
    }));
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: needs at least one part");
    const int n = parts.front().value().cols();
    int total = 0;
    std::vector<std::shared_ptr<Node>> nodes;
    for (const auto& p : parts) {
        require_2d(p, "concat_rows");
        if (p.value().cols() != n) {
            throw std::invalid_argument("concat_rows: column mismatch " +
                                        shape_string(parts.front().value().shape()) + " vs " +
                                        shape_string(p.value().shape()));
        }
        total += p.value().rows();
        nodes.push_back(p.node());
    }
    Tensor out({total, n});
    int r = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < p.value().rows(); ++i, ++r)
            for (int j = 0; j < n; ++j) out.at(r, j) = p.value().at(i, j);
    }
    return Var(make_node(std::move(out), nodes, [nodes, n](Node& self) {
        int r = 0;
        for (const auto& p : nodes) {
            const int rows = p->value.rows();
            if (p->requires_grad) {
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < n; ++j) p->grad.at(i, j) += self.grad.at(r + i, j);
            }
            r += rows;
        }
    }));
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: needs at least one part");
    const int m = parts.front().value().rows();
    int total = 0;
    std::vector<std::shared_ptr<Node>> nodes;
    for (const auto& p : parts) {
        require_2d(p, "concat_cols");
        if (p.value().rows() != m) {
            throw std::invalid_argument("concat_cols: row mismatch " +
                                        shape_string(parts.front().value().shape()) + " vs " +
                                        shape_string(p.value().shape()));
        }
        total += p.value().cols();
        nodes.push_back(p.node());
    }
    Tensor out({m, total});
    int c = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < p.value().cols(); ++j) out.at(i, c + j) = p.value().at(i, j);
        c += p.value().cols();
    }
    return Var(make_node(std::move(out), nodes, [nodes, m](Node& self) {
        int c = 0;
        for (const auto& p : nodes) {
            const int cols = p->value.cols();
            if (p->requires_grad) {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < cols; ++j) p->grad.at(i, j) += self.grad.at(i, c + j);
            }
            c += cols;
        }
    }));
}

Var slice_rows(const Var& a, int row_begin, int row_end) {
    require_2d(a, "slice_rows");
    const int m = a.value().rows(), n = a.value().cols();
    if (!(0 <= row_begin && row_begin < row_end && row_end <= m)) {
        throw std::invalid_argument("slice_rows: invalid range [" + std::to_string(row_begin) +
                                    ", " + std::to_string(row_end) + ") for " +
                                    shape_string(a.value().shape()));
    }
    Tensor out({row_end - row_begin, n});
    for (int i = row_begin; i < row_end; ++i)
        for (int j = 0; j < n; ++j) out.at(i - row_begin, j) = a.value().at(i, j);
    auto an = a.node();
    return Var(make_node(std::move(out), {an}, [an, row_begin, n](Node& self) {
        if (!an->requires_grad) return;
        for (int i = 0; i < self.grad.rows(); ++i)
            for (int j = 0; j < n; ++j) an->grad.at(row_begin + i, j) += self.grad.at(i, j);
    }));
}

Var slice_cols(const Var& a, int col_begin, int col_end) {
    require_2d(a, "slice_cols");
    const int m = a.value().rows(), n = a.value().cols();
    if (!(0 <= col_begin && col_begin < col_end && col_end <= n)) {
        throw std::invalid_argument("slice_cols: invalid range [" + std::to_string(col_begin) +
                                    ", " + std::to_string(col_end) + ") for " +
                                    shape_string(a.value().shape()));
    }
    Tensor out({m, col_end - col_begin});
    for (int i = 0; i < m; ++i)
        for (int j = col_begin; j < col_end; ++j) out.at(i, j - col_begin) = a.value().at(i, j);
    auto an = a.node();
    return Var(make_node(std::move(out), {an}, [an, col_begin, m](Node& self) {
        if (!an->requires_grad) return;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < self.grad.cols(); ++j)
                an->grad.at(i, col_begin + j) += self.grad.at(i, j);
    }));
}

Var reshape(const Var& a, std::vector<int> shape) {
    Tensor out(std::move(shape), a.value().data());
    auto an = a.node();
    return Var(make_node(std::move(out), {an}, [an](Node& self) {
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            an->grad.data()[i] += self.grad.data()[i];
    }));
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    require_2d(x, "layer_norm");
    const int m = x.value().rows(), n = x.value().cols();
    if (gain.value().size() != static_cast<std::size_t>(n) ||
        bias.value().size() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("layer_norm: gain/bias must have length " + std::to_string(n));
    }
    Tensor out({m, n});
    // Per-row mean, inverse stddev and normalized values are recomputed in the
    // backward pass from the stored parent value; only forward output is kept.
    for (int i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x.value().at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = x.value().at(i, j) - mean;
            var += d * d;
        }
        var /= n;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < n; ++j) {
            const double xhat = (x.value().at(i, j) - mean) * inv_std;
            out.at(i, j) = gain.value().at(j) * xhat + bias.value().at(j);
        }
    }
    auto xn = x.node();
    auto gn = gain.node();
    auto bn = bias.node();
    return Var(make_node(std::move(out), {xn, gn, bn}, [xn, gn, bn, m, n, eps](Node& self) {
        for (int i = 0; i < m; ++i) {
            double mean = 0.0;
            for (int j = 0; j < n; ++j) mean += xn->value.at(i, j);
            mean /= n;
            double var = 0.0;
            for (int j = 0; j < n; ++j) {
                const double d = xn->value.at(i, j) - mean;
                var += d * d;
            }
            var /= n;
            const double inv_std = 1.0 / std::sqrt(var + eps);

            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            std::vector<double> xhat(n), dxhat(n);
            for (int j = 0; j < n; ++j) {
                xhat[j] = (xn->value.at(i, j) - mean) * inv_std;
                const double g = self.grad.at(i, j);
                if (gn->requires_grad) gn->grad.at(j) += g * xhat[j];
                if (bn->requires_grad) bn->grad.at(j) += g;
                dxhat[j] = g * gn->value.at(j);
                sum_dxhat += dxhat[j];
                sum_dxhat_xhat += dxhat[j] * xhat[j];
            }
            if (xn->requires_grad) {
                for (int j = 0; j < n; ++j) {
                    xn->grad.at(i, j) += inv_std * (dxhat[j] - sum_dxhat / n -
                                                    xhat[j] * sum_dxhat_xhat / n);
                }
            }
        }
    }));
}

Var softmax_masked(const Var& logits, const Tensor& mask) {
    require_2d(logits, "softmax_masked");
    if (!logits.value().same_shape(mask)) {
        throw std::invalid_argument("softmax_masked: mask shape " + shape_string(mask.shape()) +
                                    " does not match logits " +
                                    shape_string(logits.value().shape()));
    }
    const int m = logits.value().rows(), n = logits.value().cols();
    for (double v : mask.data()) {
        if (!(v == 0.0 || v == -std::numeric_limits<double>::infinity())) {
            throw std::invalid_argument("softmax_masked: mask entries must be 0 or -inf");
        }
    }
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (mask.at(i, j) == 0.0) row_max = std::max(row_max, logits.value().at(i, j));
        }
        if (row_max == -std::numeric_limits<double>::infinity()) {
            throw std::invalid_argument("softmax_masked: row " + std::to_string(i) +
                                        " is fully masked");
        }
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            if (mask.at(i, j) == 0.0) {
                out.at(i, j) = std::exp(logits.value().at(i, j) - row_max);
                denom += out.at(i, j);
            }
        }
        for (int j = 0; j < n; ++j) {
            if (mask.at(i, j) == 0.0) out.at(i, j) /= denom;
        }
    }
    auto ln = logits.node();
    return Var(make_node(std::move(out), {ln}, [ln, m, n](Node& self) {
        if (!ln->requires_grad) return;
        for (int i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += self.grad.at(i, j) * self.value.at(i, j);
            for (int j = 0; j < n; ++j) {
                // Masked positions have y == 0, so they receive no gradient.
                ln->grad.at(i, j) += self.value.at(i, j) * (self.grad.at(i, j) - dot);
            }
        }
    }));
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const int m = x.value().rows();
    const int n = w.value().cols();
    if (b.value().size() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("linear: bias length " + std::to_string(b.value().size()) +
                                    " does not match output width " + std::to_string(n));
    }
    Var ones = constant(Tensor::full({m, 1}, 1.0));
    return add(matmul(x, w), matmul(ones, reshape(b, {1, n})));
}

void backward(const Var& root) {
    if (!root.defined() || root.value().size() != 1) {
        throw std::invalid_argument("backward: root must be a single-element tensor");
    }
    // Iterative post-order DFS; the reversed finish order is a valid
    // topological order for gradient propagation.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node* child = node->parents[next_child++].get();
            if (visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        for (double& g : n->grad.data()) g = 0.0;
    }
    root.node()->grad.data()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->requires_grad && n->backprop) n->backprop(*n);
    }
    for (Node* n : order) {
        if (n->param != nullptr) {
            for (std::size_t i = 0; i < n->grad.size(); ++i) {
                n->param->grad.data()[i] += n->grad.data()[i];
            }
        }
    }
}

double scalar(const Var& v) {
    if (v.value().size() != 1) {
        throw std::invalid_argument("scalar: tensor has " + std::to_string(v.value().size()) +
                                    " elements");
    }
    return v.value().data()[0];
}

}  // namespace stagescore
