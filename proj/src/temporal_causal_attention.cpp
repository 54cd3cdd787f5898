// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/temporal_causal_attention.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace stagescore {

const char* const kStageNames[kNumStages] = {"forward", "twist", "entry"};

Tensor causal_mask(int n) {
    Tensor m({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) m.at(i, j) = -std::numeric_limits<double>::infinity();
    return m;
}

void init_tca_params(ParameterStore& store, int D, int n_heads, Rng& rng) {
    if (n_heads < 1) throw std::invalid_argument("tca: need at least one head");
    if (D % n_heads != 0) {
        throw std::invalid_argument("tca: D=" + std::to_string(D) + " not divisible by " +
                                    std::to_string(n_heads) + " heads");
    }
    const int d_h = D / n_heads;
    for (int h = 0; h < n_heads; ++h) {
        const std::string prefix = "tca.h" + std::to_string(h) + ".";
        store.create_xavier(prefix + "wq", D, d_h, rng);
        store.create_xavier(prefix + "wk", D, d_h, rng);
        store.create_xavier(prefix + "wv", D, d_h, rng);
    }
    store.create_zeros("tca.wo", {n_heads * d_h, D});
    store.create_full("tca.ln_gain", {D}, 1.0);
    store.create_zeros("tca.ln_bias", {D});
}

TcaVars bind_tca_params(ParameterStore& store, int n_heads) {
    TcaVars p;
    for (int h = 0; h < n_heads; ++h) {
        const std::string prefix = "tca.h" + std::to_string(h) + ".";
        p.heads.push_back(TcaHeadVars{leaf(store.get(prefix + "wq")),
                                      leaf(store.get(prefix + "wk")),
                                      leaf(store.get(prefix + "wv"))});
    }
    p.wo = leaf(store.get("tca.wo"));
    p.ln_gain = leaf(store.get("tca.ln_gain"));
    p.ln_bias = leaf(store.get("tca.ln_bias"));
    p.d_h = p.heads.front().wq.value().cols();
    return p;
}

Var pool_stages(const Var& features, const StageBoundaries& b) {
    const int T = features.value().rows();
    if (!boundaries_valid(b, T)) {
        throw std::invalid_argument("pool_stages: boundaries (" + std::to_string(b.t1) + ", " +
                                    std::to_string(b.t2) + ") invalid for T=" + std::to_string(T));
    }
    return concat_rows({mean_over_rows(slice_rows(features, 0, b.t1)),
                        mean_over_rows(slice_rows(features, b.t1, b.t2)),
                        mean_over_rows(slice_rows(features, b.t2, T))});
}

Var tca_scores(const Var& stages, const TcaHeadVars& head, int d_h) {
    if (!stages.value().all_finite()) {
        throw std::invalid_argument("tca_scores: non-finite stage features");
    }
    const int n = stages.value().rows();
    Var q = matmul(stages, head.wq);
    Var k = matmul(stages, head.wk);
    Var logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d_h)));
    return softmax_masked(logits, causal_mask(n));
}

TcaForwardResult tca_forward(const Var& stages, const TcaVars& p) {
    if (p.heads.empty()) throw std::invalid_argument("tca_forward: no heads bound");
    TcaForwardResult result;
    result.mean_attention = Tensor::zeros({stages.value().rows(), stages.value().rows()});
    std::vector<Var> head_outputs;
    head_outputs.reserve(p.heads.size());
    for (const TcaHeadVars& head : p.heads) {
        Var a = tca_scores(stages, head, p.d_h);
        head_outputs.push_back(matmul(a, matmul(stages, head.wv)));
        result.head_attention.push_back(a.value());
        for (std::size_t i = 0; i < result.mean_attention.size(); ++i) {
            result.mean_attention.data()[i] +=
                a.value().data()[i] / static_cast<double>(p.heads.size());
        }
    }
    Var projected = matmul(concat_cols(head_outputs), p.wo);
    result.refined = layer_norm(add(stages, projected), p.ln_gain, p.ln_bias);
    return result;
}

std::vector<StageInfluence> stage_influence(const Tensor& attention, double weak_threshold) {
    if (attention.ndim() != 2 || attention.rows() != kNumStages ||
        attention.cols() != kNumStages) {
        throw std::invalid_argument("stage_influence: expected a 3 x 3 attention matrix, got " +
                                    shape_string(attention.shape()));
    }
    std::vector<StageInfluence> rows;
    for (int i = 0; i < kNumStages; ++i) {
        for (int j = 0; j <= i; ++j) {
            rows.push_back({j, i, attention.at(i, j), attention.at(i, j) < weak_threshold});
        }
    }
    return rows;
}

std::string stage_influence_text(const std::vector<StageInfluence>& rows) {
    std::ostringstream os;
    for (const auto& r : rows) {
        os << kStageNames[r.source_stage] << " -> " << kStageNames[r.target_stage] << ": "
           << r.weight;
        if (r.weak) os << " (weak)";
        os << "\n";
    }
    return os.str();
}

}  // namespace stagescore
