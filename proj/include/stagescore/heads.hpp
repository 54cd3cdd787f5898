// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "stagescore/autodiff.hpp"
#include "stagescore/params.hpp"
#include "stagescore/streams_fusion.hpp"

namespace stagescore {

// Per-stage weights on the regression pathway's stage differences and the
// stage count they pair with.
inline constexpr std::array<double, 3> kStageWeights = {3.0, 5.0, 2.0};
inline constexpr int kStageScale = 3;

struct ScorePrediction {
    double delta = 0.0;
    double y_query = 0.0;
    double y_exemplar = 0.0;
};

// tap.* parameters: per-snippet linear map D -> 2 whose sigmoid gives the
// probability that the (forward->twist, twist->entry) transition happens at
// each snippet.
void init_tap_params(ParameterStore& store, int D, Rng& rng);
Var tap_head(const Var& features, ParameterStore& store);

// Earliest-argmax decoding of transition probabilities into boundaries that
// always satisfy 0 < t1 < t2 < T: t1 is the earliest peak of column 0
// clamped into [1, T-2]; t2 the earliest peak of column 1 after t1, pushed
// to at least t1 + 1 and at most T - 1.
StageBoundaries decode_boundaries(const Tensor& transition_probs);

// sap.* parameters: per-snippet linear map D -> D_m producing mask logits.
void init_sap_params(ParameterStore& store, int D, int D_m, Rng& rng);
Var sap_head(const Var& original, ParameterStore& store);

// reg.* parameters: two-layer perceptron (hidden width 2D, ELU) over the
// concatenated per-stage difference vectors, each difference scaled by its
// stage weight.
void init_reg_params(ParameterStore& store, int D, Rng& rng);
Var regress_delta(const Var& refined_query, const Var& refined_exemplar, ParameterStore& store,
                  const std::array<double, 3>& weights = kStageWeights);

// Wraps regress_delta's output into the contrastive prediction
// y_query = y_exemplar + delta (exact by construction).
ScorePrediction regress_score(const Var& refined_query, const Var& refined_exemplar,
                              double y_exemplar, ParameterStore& store);

}  // namespace stagescore
