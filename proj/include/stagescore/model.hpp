// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "stagescore/gat_intervention.hpp"
#include "stagescore/heads.hpp"
#include "stagescore/params.hpp"
#include "stagescore/streams_fusion.hpp"
#include "stagescore/temporal_causal_attention.hpp"

namespace stagescore {

// Ablation variants: baseline is plain sigmoid fusion + stage pooling +
// heads; the others insert the intervention (before pooling), the causal
// attention block (after pooling), or both.
enum class Variant { baseline, gat_only, tca_only, full };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
bool has_gat(Variant v);
bool has_tca(Variant v);
const std::vector<Variant>& all_variants();

struct ModelConfig {
    int T = 9;
    int D = 16;
    int D_m = 16;
    int gat_attention_dim = 8;
    int tca_heads = 2;
    // Scores are trained in normalized units (divided by this range); the
    // harness converts predictions back to score units.
    double score_range = 100.0;
    std::array<double, 3> stage_weights = kStageWeights;
};

// Creates exactly the parameters the variant uses. Shared modules (heads,
// loss weights) draw from per-module random substreams, so two variants with
// the same seed start from identical head weights.
void init_model_params(ParameterStore& store, Variant v, const ModelConfig& cfg, Rng& rng);

enum class BoundarySource { ground_truth, decoded };

struct ForwardResult {
    Var delta;       // [1 x 1], normalized score units
    Var tap_probs;   // [T x 2]
    Var sap_logits;  // [T x D_m]
    Var stages_query;     // [3 x D] features entering the regressor
    Var stages_exemplar;  // [3 x D]
    StageBoundaries boundaries_used;
    double y_query_pred = 0.0;  // score units

    // Attention records; empty tensors when the variant lacks the module.
    Tensor gat_attention;  // [4 x 4] mean over snippets
    std::vector<Tensor> gat_per_snippet;
    Tensor tca_attention_query;     // [3 x 3] mean over heads
    Tensor tca_attention_exemplar;  // [3 x 3]
    std::vector<Tensor> tca_heads_query;
    std::vector<Tensor> tca_heads_exemplar;
};

ForwardResult forward(const Sample& sample, ParameterStore& store, Variant v,
                      const ModelConfig& cfg, BoundarySource boundary_source);

// Per-snippet {0,1} targets for the transition head: column 0 marks t1,
// column 1 marks t2.
Tensor transition_targets(const Sample& sample);

}  // namespace stagescore
