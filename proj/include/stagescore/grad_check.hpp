// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stagescore/autodiff.hpp"
#include "stagescore/params.hpp"

namespace stagescore {

// One coordinate whose analytic and central-difference gradients disagree.
struct GradCheckFailure {
    std::string param;
    int index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    int coords_checked = 0;
    double max_rel_err = 0.0;
    std::string worst_param;
    std::vector<GradCheckFailure> failures;

    bool passed() const { return failures.empty(); }
};

// Compares autodiff gradients of a scalar loss against central differences.
// loss_fn must rebuild the graph on every invocation and read parameter
// values live, since coordinates are perturbed in place between calls.
// For parameters larger than max_coords_per_param a deterministic random
// subset of coordinates is checked. Relative error uses
// |a - n| / max(|a|, |n|, 1e-8). The default step keeps cancellation noise
// on exactly-zero gradients below tol times the denominator floor; pass a
// smaller step only when gradients are known to be well away from zero.
GradCheckReport grad_check(ParameterStore& params, const std::function<Var()>& loss_fn,
                           double tol = 1e-4, double step = 1e-3,
                           int max_coords_per_param = 32, std::uint64_t seed = 0x67c0ffee);

}  // namespace stagescore
