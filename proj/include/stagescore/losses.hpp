// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "stagescore/autodiff.hpp"
#include "stagescore/params.hpp"
#include "stagescore/tensor.hpp"

namespace stagescore {

inline constexpr double kFocalAlphaDefault = 0.25;
inline constexpr double kFocalGammaDefault = 2.0;
// Probabilities are clamped into [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-7;

struct LossBreakdown {
    double l_sap = 0.0;
    double l_tap = 0.0;
    double l_reg = 0.0;
    double weighted_total = 0.0;
    std::array<double, 3> s = {0.0, 0.0, 0.0};  // log-variances (sap, tap, reg)
};

// Mean over elements of -alpha_t (1 - p_t)^gamma log p_t, with p = sigmoid of
// the logits, p_t the probability of the true class, alpha_t = alpha for
// positive targets and 1 - alpha for negative ones.
Var focal_loss(const Var& logits, const Tensor& targets, double alpha = kFocalAlphaDefault,
               double gamma = kFocalGammaDefault);
double focal_loss(const Tensor& logits, const Tensor& targets, double alpha = kFocalAlphaDefault,
                  double gamma = kFocalGammaDefault);

// Mean binary cross-entropy of probabilities against {0,1} targets.
Var bce_loss(const Var& probs, const Tensor& targets);
double bce_loss(const Tensor& probs, const Tensor& targets);

// Mean squared difference.
Var mse_loss(const Var& pred, const Tensor& target);
double mse_loss(const std::vector<double>& pred, const std::vector<double>& target);

// Homoscedastic-uncertainty weighting: sum_i exp(-s_i) l_i + s_i. With all
// s_i = 0 this is the plain sum of the three losses.
Var uncertainty_weighted_total(const std::array<Var, 3>& losses, const std::array<Var, 3>& s);
double uncertainty_weighted_total(const std::array<double, 3>& losses,
                                  const std::array<double, 3>& s);

// Creates the learnable log-variances loss.s_sap / loss.s_tap / loss.s_reg,
// initialized to zero.
void init_loss_params(ParameterStore& store);
std::array<Var, 3> bind_loss_params(ParameterStore& store);

}  // namespace stagescore
