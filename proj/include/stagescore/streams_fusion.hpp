// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "stagescore/autodiff.hpp"
#include "stagescore/tensor.hpp"

namespace stagescore {

enum class StreamId { query_original, query_mask, exemplar_original, exemplar_mask };
enum class VideoId { query, exemplar };

const char* stream_name(StreamId id);

// One input feature stream, T snippets by D channels.
struct FeatureStream {
    StreamId id;
    Tensor values;
};

struct FusedStream {
    VideoId video;
    Tensor values;
};

// Snippet indices where forward becomes twist (t1) and twist becomes entry
// (t2); valid iff 0 < t1 < t2 < T so every stage spans at least one snippet.
struct StageBoundaries {
    int t1 = 0;
    int t2 = 0;
};

bool boundaries_valid(const StageBoundaries& b, int T);

// A query/exemplar pair with everything training needs. The pair shares one
// set of ground-truth boundaries and one action type (exemplars are drawn
// from the same action).
struct Sample {
    std::string id;
    int action_type = 0;
    FeatureStream query_original;
    FeatureStream query_mask;
    FeatureStream exemplar_original;
    FeatureStream exemplar_mask;
    FusedStream fused_query;
    FusedStream fused_exemplar;
    StageBoundaries boundaries;
    Tensor mask_targets;  // [T x D_m], entries in {0,1}
    double y_query = 0.0;
    double y_exemplar = 0.0;

    int T() const { return query_original.values.rows(); }
    int D() const { return query_original.values.cols(); }
};

// F[t,d] = O[t,d] * sigmoid(M[t,d]): the mask gates the original features
// elementwise. This is the naive fusion the intervention refines.
FusedStream sigmoid_fuse(const FeatureStream& original, const FeatureStream& mask);

// Differentiable form of the same gate for use inside model graphs.
Var sigmoid_fuse(const Var& original, const Var& mask);

Sample make_sample(FeatureStream query_original, FeatureStream query_mask,
                   FeatureStream exemplar_original, FeatureStream exemplar_mask,
                   StageBoundaries boundaries, Tensor mask_targets, double y_query,
                   double y_exemplar, int action_type = 0, std::string id = "");

}  // namespace stagescore
