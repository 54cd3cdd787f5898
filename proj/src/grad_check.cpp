// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "stagescore/rng.hpp"

namespace stagescore {

namespace {

double eval_loss(const std::function<Var()>& loss_fn) {
    const double v = scalar(loss_fn());
    if (!std::isfinite(v)) {
        throw std::runtime_error("grad_check: loss is not finite (" + std::to_string(v) + ")");
    }
    return v;
}

}  // namespace

GradCheckReport grad_check(ParameterStore& params, const std::function<Var()>& loss_fn,
                           double tol, double step, int max_coords_per_param,
                           std::uint64_t seed) {
    if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
    if (max_coords_per_param < 1) {
        throw std::invalid_argument("grad_check: max_coords_per_param must be >= 1");
    }

    params.zero_grad();
    Var loss = loss_fn();
    const double base = scalar(loss);
    if (!std::isfinite(base)) {
        throw std::runtime_error("grad_check: loss is not finite (" + std::to_string(base) + ")");
    }
    backward(loss);

    GradCheckReport report;
    Rng rng(seed);
    for (Parameter* p : params.all()) {
        const int n = static_cast<int>(p->value.size());
        std::vector<int> coords(n);
        std::iota(coords.begin(), coords.end(), 0);
        if (n > max_coords_per_param) {
            // Partial Fisher-Yates: the first max_coords_per_param entries end
            // up a uniform sample without replacement.
            for (int i = 0; i < max_coords_per_param; ++i) {
                std::swap(coords[i], coords[rng.uniform_int(i, n - 1)]);
            }
            coords.resize(max_coords_per_param);
        }
        for (int idx : coords) {
            const double saved = p->value.data()[idx];
            const double analytic = p->grad.data()[idx];

            // Differencing error is truncation-dominated for curved
            // coordinates and cancellation-dominated for flat ones, so a
            // coordinate that misses at the base step gets a second look at a
            // larger and a smaller one; the best agreement counts.
            double rel = 0.0, numeric = 0.0;
            bool first = true;
            for (double h : {step, 4.0 * step, step / 4.0}) {
                p->value.data()[idx] = saved + h;
                const double up = eval_loss(loss_fn);
                p->value.data()[idx] = saved - h;
                const double down = eval_loss(loss_fn);
                p->value.data()[idx] = saved;

                const double num_h = (up - down) / (2.0 * h);
                const double rel_h =
                    std::abs(analytic - num_h) /
                    std::max({std::abs(analytic), std::abs(num_h), 1e-8});
                if (first || rel_h < rel) {
                    rel = rel_h;
                    numeric = num_h;
                }
                first = false;
                if (rel <= tol) break;
            }
            ++report.coords_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = p->name;
            }
            if (rel > tol) {
                report.failures.push_back({p->name, idx, analytic, numeric, rel});
            }
        }
    }
    return report;
}

}  // namespace stagescore
