// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/model.hpp"

#include <stdexcept>

#include "stagescore/losses.hpp"

namespace stagescore {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::gat_only: return "gat_only";
        case Variant::tca_only: return "tca_only";
        case Variant::full: return "full";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : all_variants()) {
        if (name == variant_name(v)) return v;
    }
    throw std::invalid_argument("unknown variant '" + name +
                                "' (expected baseline, gat_only, tca_only or full)");
}

bool has_gat(Variant v) { return v == Variant::gat_only || v == Variant::full; }
bool has_tca(Variant v) { return v == Variant::tca_only || v == Variant::full; }

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> variants = {Variant::baseline, Variant::gat_only,
                                                  Variant::tca_only, Variant::full};
    return variants;
}

void init_model_params(ParameterStore& store, Variant v, const ModelConfig& cfg, Rng& rng) {
    // Module-local substreams keep shared-module initialization identical
    // across variants under the same seed.
    Rng gat_rng = rng.fork(1), tca_rng = rng.fork(2), tap_rng = rng.fork(3),
        sap_rng = rng.fork(4), reg_rng = rng.fork(5);
    if (has_gat(v)) init_gat_params(store, cfg.D, cfg.gat_attention_dim, gat_rng);
    if (has_tca(v)) init_tca_params(store, cfg.D, cfg.tca_heads, tca_rng);
    init_tap_params(store, cfg.D, tap_rng);
    init_sap_params(store, cfg.D, cfg.D_m, sap_rng);
    init_reg_params(store, cfg.D, reg_rng);
    init_loss_params(store);
}

Tensor transition_targets(const Sample& sample) {
    Tensor t({sample.T(), 2});
    t.at(sample.boundaries.t1, 0) = 1.0;
    t.at(sample.boundaries.t2, 1) = 1.0;
    return t;
}

ForwardResult forward(const Sample& sample, ParameterStore& store, Variant v,
                      const ModelConfig& cfg, BoundarySource boundary_source) {
    if (sample.T() != cfg.T || sample.D() != cfg.D) {
        throw std::invalid_argument("forward: sample is " +
                                    shape_string(sample.query_original.values.shape()) +
                                    " but the model expects [" + std::to_string(cfg.T) + " x " +
                                    std::to_string(cfg.D) + "]");
    }
    ForwardResult result;

    Var feat_q, feat_e;
    if (has_gat(v)) {
        DeconfoundResult dr = deconfound(sample, bind_gat_params(store));
        feat_q = dr.query;
        feat_e = dr.exemplar;
        result.gat_attention = std::move(dr.attention_summary);
        result.gat_per_snippet = std::move(dr.per_snippet_attention);
    } else {
        feat_q = constant(sample.fused_query.values);
        feat_e = constant(sample.fused_exemplar.values);
    }

    result.tap_probs = tap_head(feat_q, store);
    result.boundaries_used = boundary_source == BoundarySource::ground_truth
                                 ? sample.boundaries
                                 : decode_boundaries(result.tap_probs.value());

    Var stages_q = pool_stages(feat_q, result.boundaries_used);
    Var stages_e = pool_stages(feat_e, result.boundaries_used);
    if (has_tca(v)) {
        TcaVars tca = bind_tca_params(store, cfg.tca_heads);
        TcaForwardResult rq = tca_forward(stages_q, tca);
        TcaForwardResult re = tca_forward(stages_e, tca);
        stages_q = rq.refined;
        stages_e = re.refined;
        result.tca_attention_query = std::move(rq.mean_attention);
        result.tca_attention_exemplar = std::move(re.mean_attention);
        result.tca_heads_query = std::move(rq.head_attention);
        result.tca_heads_exemplar = std::move(re.head_attention);
    }
    result.stages_query = stages_q;
    result.stages_exemplar = stages_e;

    result.sap_logits = sap_head(constant(sample.query_original.values), store);
    result.delta = regress_delta(stages_q, stages_e, store, cfg.stage_weights);
    result.y_query_pred = sample.y_exemplar + scalar(result.delta) * cfg.score_range;
    return result;
}

}  // namespace stagescore
