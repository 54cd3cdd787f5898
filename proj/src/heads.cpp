// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/heads.hpp"

#include <algorithm>
#include <stdexcept>

#include "stagescore/temporal_causal_attention.hpp"

namespace stagescore {

void init_tap_params(ParameterStore& store, int D, Rng& rng) {
    store.create_xavier("tap.w", D, 2, rng);
    store.create_zeros("tap.b", {2});
}

Var tap_head(const Var& features, ParameterStore& store) {
    return sigmoid(linear(features, leaf(store.get("tap.w")), leaf(store.get("tap.b"))));
}

StageBoundaries decode_boundaries(const Tensor& probs) {
    if (probs.ndim() != 2 || probs.cols() != 2) {
        throw std::invalid_argument("decode_boundaries: expected T x 2 probabilities, got " +
                                    shape_string(probs.shape()));
    }
    const int T = probs.rows();
    if (T < 3) {
        throw std::invalid_argument("decode_boundaries: need T >= 3, got T=" + std::to_string(T));
    }
    auto earliest_argmax = [&probs](int col, int from) {
        int best = from;
        for (int t = from; t < probs.rows(); ++t) {
            if (probs.at(t, col) > probs.at(best, col)) best = t;
        }
        return best;
    };
    int t1 = earliest_argmax(0, 0);
    int t2 = t1 + 1 < T ? earliest_argmax(1, t1 + 1) : t1 + 1;

    StageBoundaries b;
    b.t1 = std::clamp(t1, 1, T - 2);
    b.t2 = std::min(std::max(t2, b.t1 + 1), T - 1);
    return b;
}

void init_sap_params(ParameterStore& store, int D, int D_m, Rng& rng) {
    store.create_xavier("sap.w", D, D_m, rng);
    store.create_zeros("sap.b", {D_m});
}

Var sap_head(const Var& original, ParameterStore& store) {
    return linear(original, leaf(store.get("sap.w")), leaf(store.get("sap.b")));
}

void init_reg_params(ParameterStore& store, int D, Rng& rng) {
    store.create_xavier("reg.w1", kStageScale * D, 2 * D, rng);
    store.create_zeros("reg.b1", {2 * D});
    store.create_xavier("reg.w2", 2 * D, 1, rng);
    store.create_zeros("reg.b2", {1});
}

Var regress_delta(const Var& refined_query, const Var& refined_exemplar, ParameterStore& store,
                  const std::array<double, 3>& weights) {
    if (!refined_query.value().same_shape(refined_exemplar.value()) ||
        refined_query.value().rows() != kNumStages) {
        throw std::invalid_argument("regress_delta: expected matching 3 x D stage tensors, got " +
                                    shape_string(refined_query.value().shape()) + " and " +
                                    shape_string(refined_exemplar.value().shape()));
    }
    Var diff = sub(refined_query, refined_exemplar);
    std::vector<Var> weighted;
    weighted.reserve(kNumStages);
    for (int s = 0; s < kNumStages; ++s) {
        weighted.push_back(scale(slice_rows(diff, s, s + 1), weights[s]));
    }
    Var flat = concat_cols(weighted);  // [1 x 3D]
    Var hidden = elu(linear(flat, leaf(store.get("reg.w1")), leaf(store.get("reg.b1"))));
    return linear(hidden, leaf(store.get("reg.w2")), leaf(store.get("reg.b2")));  // [1 x 1]
}

ScorePrediction regress_score(const Var& refined_query, const Var& refined_exemplar,
                              double y_exemplar, ParameterStore& store) {
    const double delta = scalar(regress_delta(refined_query, refined_exemplar, store));
    return ScorePrediction{delta, y_exemplar + delta, y_exemplar};
}

}  // namespace stagescore
