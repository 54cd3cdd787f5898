// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace stagescore {

namespace {

void check_targets(const Tensor& targets) {
    for (double t : targets.data()) {
        if (t != 0.0 && t != 1.0) {
            throw std::invalid_argument("targets must be exactly 0 or 1, got " +
                                        std::to_string(t));
        }
    }
}

void check_shapes(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

}  // namespace

Var focal_loss(const Var& logits, const Tensor& targets, double alpha, double gamma) {
    check_shapes(logits.value(), targets, "focal_loss");
    check_targets(targets);
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("focal_loss: alpha must be in (0, 1]");
    }
    if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma must be >= 0");

    // p_t = t*p + (1-t)*(1-p) folds both classes into one expression, so the
    // whole loss stays a single differentiable chain.
    Var p = sigmoid(logits);
    Var t = constant(targets);
    Var one = constant(Tensor::full(targets.shape(), 1.0));
    Var p_t = clamp(add(mul(t, p), mul(sub(one, t), sub(one, p))), kProbClamp, 1.0 - kProbClamp);

    Tensor alpha_t(targets.shape());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        alpha_t.data()[i] = targets.data()[i] == 1.0 ? alpha : 1.0 - alpha;
    }
    Var focus = gamma == 0.0 ? one : pow_of(sub(one, p_t), gamma);
    return mean_all(scale(mul(constant(alpha_t), mul(focus, log_of(p_t))), -1.0));
}

double focal_loss(const Tensor& logits, const Tensor& targets, double alpha, double gamma) {
    return scalar(focal_loss(constant(logits), targets, alpha, gamma));
}

Var bce_loss(const Var& probs, const Tensor& targets) {
    check_shapes(probs.value(), targets, "bce_loss");
    check_targets(targets);
    Var p = clamp(probs, kProbClamp, 1.0 - kProbClamp);
    Var t = constant(targets);
    Var one = constant(Tensor::full(targets.shape(), 1.0));
    Var ll = add(mul(t, log_of(p)), mul(sub(one, t), log_of(sub(one, p))));
    return scale(mean_all(ll), -1.0);
}

double bce_loss(const Tensor& probs, const Tensor& targets) {
    return scalar(bce_loss(constant(probs), targets));
}

Var mse_loss(const Var& pred, const Tensor& target) {
    check_shapes(pred.value(), target, "mse_loss");
    Var err = sub(pred, constant(target));
    return mean_all(mul(err, err));
}

double mse_loss(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.empty() || pred.size() != target.size()) {
        throw std::invalid_argument("mse_loss: vectors must be nonempty and equal length");
    }
    const int n = static_cast<int>(pred.size());
    return scalar(mse_loss(constant(Tensor({n}, pred)), Tensor({n}, target)));
}

Var uncertainty_weighted_total(const std::array<Var, 3>& losses, const std::array<Var, 3>& s) {
    Var total;
    for (int i = 0; i < 3; ++i) {
        if (losses[i].value().size() != 1 || s[i].value().size() != 1) {
            throw std::invalid_argument("uncertainty_weighted_total: terms must be scalars");
        }
        Var term = add(mul(exp_of(scale(s[i], -1.0)), losses[i]), s[i]);
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

double uncertainty_weighted_total(const std::array<double, 3>& losses,
                                  const std::array<double, 3>& s) {
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        if (!std::isfinite(losses[i])) {
            throw std::invalid_argument("uncertainty_weighted_total: non-finite loss");
        }
        total += std::exp(-s[i]) * losses[i] + s[i];
    }
    return total;
}

void init_loss_params(ParameterStore& store) {
    store.create_zeros("loss.s_sap", {1});
    store.create_zeros("loss.s_tap", {1});
    store.create_zeros("loss.s_reg", {1});
}

std::array<Var, 3> bind_loss_params(ParameterStore& store) {
    return {leaf(store.get("loss.s_sap")), leaf(store.get("loss.s_tap")),
            leaf(store.get("loss.s_reg"))};
}

}  // namespace stagescore
