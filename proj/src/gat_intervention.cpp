// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/gat_intervention.hpp"

#include <stdexcept>

namespace stagescore {

const char* const kGatNodeLabels[kGatNodes] = {"qo", "qf", "eo", "ef"};

namespace {

// Selection matrices that expand the 4 per-node rows into all 16 ordered
// pairs: row r = 4i + j of (E_src * S + E_dst * T) equals S_i + T_j.
Tensor source_selector() {
    Tensor e({kGatNodes * kGatNodes, kGatNodes});
    for (int i = 0; i < kGatNodes; ++i)
        for (int j = 0; j < kGatNodes; ++j) e.at(i * kGatNodes + j, i) = 1.0;
    return e;
}

Tensor target_selector() {
    Tensor e({kGatNodes * kGatNodes, kGatNodes});
    for (int i = 0; i < kGatNodes; ++i)
        for (int j = 0; j < kGatNodes; ++j) e.at(i * kGatNodes + j, j) = 1.0;
    return e;
}

void check_nodes(const Var& nodes) {
    if (nodes.value().ndim() != 2 || nodes.value().rows() != kGatNodes) {
        throw std::invalid_argument("gat: expected 4 node rows, got " +
                                    shape_string(nodes.value().shape()));
    }
    if (!nodes.value().all_finite()) {
        throw std::invalid_argument("gat: node features contain non-finite values");
    }
}

}  // namespace

void init_gat_params(ParameterStore& store, int D, int H, Rng& rng) {
    if (D < 1 || H < 1) throw std::invalid_argument("gat: D and H must be positive");
    for (const char* layer : {"gat.l1.", "gat.l2."}) {
        const std::string prefix(layer);
        store.create_xavier(prefix + "theta", D, D, rng);
        store.create_xavier(prefix + "theta_s", D, H, rng);
        store.create_xavier(prefix + "theta_t", D, H, rng);
        // Attention rows differ across source nodes only through the kink of
        // the leaky unit; starting the attention vector larger than the
        // projections keeps the coefficients input-sensitive from the first
        // step, otherwise the query-minus-exemplar readout starves.
        Tensor a({H});
        for (double& v : a.data()) v = rng.uniform(-1.5, 1.5);
        store.create(prefix + "a", std::move(a));
    }
    store.create("gat.lambda", Tensor::scalar(0.5));
}

GatVars bind_gat_params(ParameterStore& store) {
    auto bind_layer = [&store](const std::string& prefix) {
        return GatLayerVars{leaf(store.get(prefix + "theta")), leaf(store.get(prefix + "theta_s")),
                            leaf(store.get(prefix + "theta_t")), leaf(store.get(prefix + "a"))};
    };
    return GatVars{bind_layer("gat.l1."), bind_layer("gat.l2."), leaf(store.get("gat.lambda"))};
}

Var attention_coeffs(const Var& nodes, const GatLayerVars& p) {
    check_nodes(nodes);
    Var src = matmul(nodes, p.theta_s);  // [4 x H]
    Var dst = matmul(nodes, p.theta_t);  // [4 x H]
    Var pairs = add(matmul(constant(source_selector()), src),
                    matmul(constant(target_selector()), dst));  // [16 x H]
    const int H = p.a.value().cols();
    Var logits = matmul(leaky_relu(pairs, kGatLeakySlope), reshape(p.a, {H, 1}));  // [16 x 1]
    return softmax_masked(reshape(logits, {kGatNodes, kGatNodes}),
                          Tensor::zeros({kGatNodes, kGatNodes}));
}

Var gat_layer(const Var& nodes, const GatLayerVars& p) {
    Var alpha = attention_coeffs(nodes, p);
    return elu(matmul(alpha, matmul(nodes, p.theta)));
}

DeconfoundResult deconfound(const Var& query_original, const Var& query_fused,
                            const Var& exemplar_original, const Var& exemplar_fused,
                            const GatVars& p) {
    const Tensor& qo = query_original.value();
    for (const Var* v : {&query_fused, &exemplar_original, &exemplar_fused}) {
        if (!v->value().same_shape(qo)) {
            throw std::invalid_argument("deconfound: stream shape mismatch " +
                                        shape_string(qo.shape()) + " vs " +
                                        shape_string(v->value().shape()));
        }
    }
    const int T = qo.rows();

    DeconfoundResult result;
    result.attention_summary = Tensor::zeros({kGatNodes, kGatNodes});
    std::vector<Var> query_rows, exemplar_rows;
    query_rows.reserve(T);
    exemplar_rows.reserve(T);
    for (int t = 0; t < T; ++t) {
        Var nodes = concat_rows({slice_rows(query_original, t, t + 1),
                                 slice_rows(query_fused, t, t + 1),
                                 slice_rows(exemplar_original, t, t + 1),
                                 slice_rows(exemplar_fused, t, t + 1)});

        Var alpha1 = attention_coeffs(nodes, p.layer1);
        Var f1 = elu(matmul(alpha1, matmul(nodes, p.layer1.theta)));

        Var alpha2 = attention_coeffs(f1, p.layer2);
        Var f2 = add(elu(matmul(alpha2, matmul(f1, p.layer2.theta))),
                     scalar_mul(f1, p.lambda));

        query_rows.push_back(slice_rows(f2, kGatFusedQueryRow, kGatFusedQueryRow + 1));
        exemplar_rows.push_back(slice_rows(f2, kGatFusedExemplarRow, kGatFusedExemplarRow + 1));

        result.per_snippet_attention.push_back(alpha1.value());
        for (std::size_t i = 0; i < result.attention_summary.size(); ++i) {
            result.attention_summary.data()[i] += alpha1.value().data()[i] / T;
        }
    }
    result.query = concat_rows(query_rows);
    result.exemplar = concat_rows(exemplar_rows);
    return result;
}

DeconfoundResult deconfound(const Sample& sample, const GatVars& p) {
    return deconfound(constant(sample.query_original.values), constant(sample.fused_query.values),
                      constant(sample.exemplar_original.values),
                      constant(sample.fused_exemplar.values), p);
}

}  // namespace stagescore
