// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/streams_fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace stagescore {

const char* stream_name(StreamId id) {
    switch (id) {
        case StreamId::query_original: return "query_original";
        case StreamId::query_mask: return "query_mask";
        case StreamId::exemplar_original: return "exemplar_original";
        case StreamId::exemplar_mask: return "exemplar_mask";
    }
    return "?";
}

bool boundaries_valid(const StageBoundaries& b, int T) {
    return 0 < b.t1 && b.t1 < b.t2 && b.t2 < T;
}

namespace {

VideoId video_of(StreamId id) {
    return (id == StreamId::query_original || id == StreamId::query_mask) ? VideoId::query
                                                                          : VideoId::exemplar;
}

bool is_original(StreamId id) {
    return id == StreamId::query_original || id == StreamId::exemplar_original;
}

void check_stream(const FeatureStream& s) {
    if (s.values.ndim() != 2) {
        throw std::invalid_argument(std::string("stream ") + stream_name(s.id) +
                                    " must be T x D, got " + shape_string(s.values.shape()));
    }
    if (!s.values.all_finite()) {
        throw std::invalid_argument(std::string("stream ") + stream_name(s.id) +
                                    " contains non-finite values");
    }
}

}  // namespace

FusedStream sigmoid_fuse(const FeatureStream& original, const FeatureStream& mask) {
    check_stream(original);
    check_stream(mask);
    if (!is_original(original.id) || is_original(mask.id)) {
        throw std::invalid_argument(std::string("sigmoid_fuse: expected an original and a mask "
                                                "stream, got ") +
                                    stream_name(original.id) + " and " + stream_name(mask.id));
    }
    if (video_of(original.id) != video_of(mask.id)) {
        throw std::invalid_argument("sigmoid_fuse: streams belong to different videos");
    }
    if (!original.values.same_shape(mask.values)) {
        throw std::invalid_argument("sigmoid_fuse: shape mismatch " +
                                    shape_string(original.values.shape()) + " vs " +
                                    shape_string(mask.values.shape()));
    }
    FusedStream out{video_of(original.id), Tensor(original.values.shape())};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        const double gate = 1.0 / (1.0 + std::exp(-mask.values.data()[i]));
        out.values.data()[i] = original.values.data()[i] * gate;
    }
    return out;
}

Var sigmoid_fuse(const Var& original, const Var& mask) {
    return mul(original, sigmoid(mask));
}

Sample make_sample(FeatureStream query_original, FeatureStream query_mask,
                   FeatureStream exemplar_original, FeatureStream exemplar_mask,
                   StageBoundaries boundaries, Tensor mask_targets, double y_query,
                   double y_exemplar, int action_type, std::string id) {
    if (query_original.id != StreamId::query_original ||
        query_mask.id != StreamId::query_mask ||
        exemplar_original.id != StreamId::exemplar_original ||
        exemplar_mask.id != StreamId::exemplar_mask) {
        throw std::invalid_argument("make_sample: streams must arrive in the order "
                                    "query_original, query_mask, exemplar_original, "
                                    "exemplar_mask with matching ids");
    }
    const std::vector<int>& shape = query_original.values.shape();
    for (const FeatureStream* s : {&query_mask, &exemplar_original, &exemplar_mask}) {
        check_stream(*s);
        if (s->values.shape() != shape) {
            throw std::invalid_argument(std::string("make_sample: stream ") + stream_name(s->id) +
                                        " shape " + shape_string(s->values.shape()) +
                                        " does not match " + shape_string(shape));
        }
    }
    check_stream(query_original);
    const int T = query_original.values.rows();
    if (!boundaries_valid(boundaries, T)) {
        throw std::invalid_argument("make_sample: boundaries (" + std::to_string(boundaries.t1) +
                                    ", " + std::to_string(boundaries.t2) +
                                    ") invalid for T=" + std::to_string(T));
    }
    if (mask_targets.ndim() != 2 || mask_targets.rows() != T) {
        throw std::invalid_argument("make_sample: mask targets must have T=" + std::to_string(T) +
                                    " rows, got " + shape_string(mask_targets.shape()));
    }

    Sample s;
    s.id = std::move(id);
    s.action_type = action_type;
    s.fused_query = sigmoid_fuse(query_original, query_mask);
    s.fused_exemplar = sigmoid_fuse(exemplar_original, exemplar_mask);
    s.query_original = std::move(query_original);
    s.query_mask = std::move(query_mask);
    s.exemplar_original = std::move(exemplar_original);
    s.exemplar_mask = std::move(exemplar_mask);
    s.boundaries = boundaries;
    s.mask_targets = std::move(mask_targets);
    s.y_query = y_query;
    s.y_exemplar = y_exemplar;
    return s;
}

}  // namespace stagescore
