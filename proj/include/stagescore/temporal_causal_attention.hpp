// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "stagescore/autodiff.hpp"
#include "stagescore/params.hpp"
#include "stagescore/streams_fusion.hpp"

namespace stagescore {

inline constexpr int kNumStages = 3;

extern const char* const kStageNames[kNumStages];  // "forward", "twist", "entry"

// Additive causal mask: 0 where stage i may attend to stage j (j <= i),
// -inf above the diagonal.
Tensor causal_mask(int n = kNumStages);

// Projections of a single attention head.
struct TcaHeadVars {
    Var wq;
    Var wk;
    Var wv;
};

struct TcaVars {
    std::vector<TcaHeadVars> heads;
    Var wo;       // [heads * d_h x D] output projection
    Var ln_gain;  // [D]
    Var ln_bias;  // [D]
    int d_h = 0;
};

// Creates tca.* parameters for n_heads heads with d_h = D / n_heads
// (D must divide evenly). The output projection starts at zero so an
// untrained block is exactly layer_norm(S).
void init_tca_params(ParameterStore& store, int D, int n_heads, Rng& rng);
TcaVars bind_tca_params(ParameterStore& store, int n_heads);

// Mean-pools snippets into the three stage rows (forward, twist, entry).
Var pool_stages(const Var& features, const StageBoundaries& b);

// One head's attention matrix: softmax over j <= i of (QK^T)[i,j] / sqrt(d_h)
// with the causal mask added before the softmax. Upper triangle is exactly 0.
Var tca_scores(const Var& stages, const TcaHeadVars& head, int d_h);

struct TcaForwardResult {
    Var refined;                  // [3 x D]
    std::vector<Tensor> head_attention;  // one [3 x 3] matrix per head
    Tensor mean_attention;        // [3 x 3] mean over heads
};

// Masked multi-head self-attention with residual and layer normalization:
// refined = layer_norm(S + concat_heads(A_h (S Wv_h)) Wo).
TcaForwardResult tca_forward(const Var& stages, const TcaVars& p);

struct StageInfluence {
    int source_stage = 0;
    int target_stage = 0;
    double weight = 0.0;
    bool weak = false;
};

// Per permitted (j <= i) pair, the attention weight of target stage i on
// source stage j; weights below the threshold are flagged weak.
std::vector<StageInfluence> stage_influence(const Tensor& attention, double weak_threshold = 0.1);

std::string stage_influence_text(const std::vector<StageInfluence>& rows);

}  // namespace stagescore
