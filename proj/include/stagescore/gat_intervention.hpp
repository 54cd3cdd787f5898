// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "stagescore/autodiff.hpp"
#include "stagescore/params.hpp"
#include "stagescore/streams_fusion.hpp"

namespace stagescore {

// Per-snippet intervention graph: the four stream nodes, ordered
// (query original, query fused, exemplar original, exemplar fused), fully
// connected including self-loops. There are no cross-snippet edges.
inline constexpr int kGatNodes = 4;
inline constexpr int kGatFusedQueryRow = 1;
inline constexpr int kGatFusedExemplarRow = 3;
inline constexpr double kGatLeakySlope = 0.2;

extern const char* const kGatNodeLabels[kGatNodes];  // "qo", "qf", "eo", "ef"

// One attention layer's weights bound into a graph. theta is the D x D
// feature transform, theta_s / theta_t the D x H source/target transforms of
// the attention logits, a the length-H attention vector.
struct GatLayerVars {
    Var theta;
    Var theta_s;
    Var theta_t;
    Var a;
};

struct GatVars {
    GatLayerVars layer1;
    GatLayerVars layer2;  // theta here plays the second layer's W' role
    Var lambda;           // residual weight, single element
};

// Creates gat.* parameters: two layers plus the residual scalar.
void init_gat_params(ParameterStore& store, int D, int H, Rng& rng);
// Binds the gat.* parameters as graph leaves.
GatVars bind_gat_params(ParameterStore& store);

// Attention over the four nodes: alpha[i,j] = softmax over j of
// a . leaky_relu(theta_s' x_i + theta_t' x_j). Rows sum to 1.
Var attention_coeffs(const Var& nodes, const GatLayerVars& p);

// Refined node features: out_i = ELU(sum_j alpha[i,j] * (x_j theta)).
Var gat_layer(const Var& nodes, const GatLayerVars& p);

struct DeconfoundResult {
    Var query;               // [T x D] refined fused query rows
    Var exemplar;            // [T x D] refined fused exemplar rows
    Tensor attention_summary;  // [4 x 4] mean of layer-1 attention over snippets
    std::vector<Tensor> per_snippet_attention;  // layer-1 alpha per snippet
};

// Runs both attention layers per snippet and reads the deconfounded features
// from the two fused-node rows. Layer 2 recomputes attention from the first
// layer's output with its own weights and adds the lambda-scaled residual.
DeconfoundResult deconfound(const Var& query_original, const Var& query_fused,
                            const Var& exemplar_original, const Var& exemplar_fused,
                            const GatVars& p);

DeconfoundResult deconfound(const Sample& sample, const GatVars& p);

}  // namespace stagescore
