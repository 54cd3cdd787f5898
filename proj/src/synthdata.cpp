// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "stagescore/rng.hpp"
#include "json_util.hpp"

namespace stagescore {

namespace {

constexpr int kNumActionTypes = 3;
constexpr double kForegroundNoise = 0.15;
constexpr double kBackgroundNoise = 0.1;
// Fraction of confounder variance the two videos of a pair share. Below 1 so
// that the query-minus-exemplar background difference keeps irreducible
// noise: a regressor leaning on it cannot drive training error to zero.
constexpr double kConfounderShare = 0.5;
constexpr double kMaskBackgroundNoise = 0.1;
constexpr double kMarkerAmplitude = 1.5;
constexpr double kStageOffset = 0.5;
constexpr double kTypeOffset = 0.25;
constexpr double kBackgroundAmplitude = 0.5;
constexpr double kMaskTargetFlipRate = 0.05;

int stage_of(int t, const StageBoundaries& b) { return t < b.t1 ? 0 : (t < b.t2 ? 1 : 2); }

// Per-channel foreground gain; deterministic so the score is recoverable by
// a fixed linear map.
double channel_gain(int k) { return 0.6 + 0.4 * std::sin(1.3 * k + 1.0); }

// Per-channel background gain; varies mildly so background channels are not
// all interchangeable.
double background_gain(int k_rel) { return 1.0 + 0.05 * k_rel; }

struct VideoLatents {
    std::array<double, 3> quality{};  // per-stage quality in (0,1)
    double raw = 0.0;                 // mean quality
    double score = 0.0;               // affine map of raw into [s_min, s_max]
    double confounder = 0.0;          // b = c*normalized_score + sqrt(1-c^2)*eta
};

VideoLatents draw_latents(Rng& rng, const GenConfig& cfg, double c, double eta_pair) {
    VideoLatents v;
    double sum = 0.0;
    for (double& q : v.quality) {
        q = rng.uniform();
        sum += q;
    }
    v.raw = sum / 3.0;
    v.score = cfg.s_min + v.raw * cfg.score_range();
    // raw is a mean of three U(0,1) draws: mean 1/2, standard deviation 1/6.
    const double standardized = (v.raw - 0.5) * 6.0;
    // The environment term mixes a pair-shared draw with a per-video one;
    // both videos of a pair are filmed in correlated, not identical,
    // conditions.
    const double eta = std::sqrt(kConfounderShare) * eta_pair +
                       std::sqrt(1.0 - kConfounderShare) * rng.normal();
    v.confounder = c * standardized + std::sqrt(1.0 - c * c) * eta;
    return v;
}

// Fills the original and mask streams of one video. Foreground channels are
// identical in structure across the two streams (independent noise draws);
// background channels carry the confounder only in the original stream.
void fill_video(Tensor& original, Tensor& mask, const VideoLatents& v, int action_type,
                const StageBoundaries& b, const GenConfig& cfg, Rng& rng) {
    const int fg = cfg.D / 2;
    for (int t = 0; t < cfg.T; ++t) {
        const int s = stage_of(t, b);
        for (int k = 0; k < cfg.D; ++k) {
            if (k < fg) {
                double base = v.quality[s] * channel_gain(k) + kTypeOffset * action_type;
                if (k >= 2 && k % 3 == s) base += kStageOffset;
                // Transition markers let the temporal parser locate the
                // boundaries: channel 0 spikes at t1, channel 1 at t2.
                if (k == 0 && t == b.t1) base += kMarkerAmplitude;
                if (k == 1 && t == b.t2) base += kMarkerAmplitude;
                original.at(t, k) = base + kForegroundNoise * rng.normal();
                mask.at(t, k) = base + kForegroundNoise * rng.normal();
            } else {
                original.at(t, k) = kBackgroundAmplitude * background_gain(k - fg) * v.confounder +
                                    kBackgroundNoise * rng.normal();
                mask.at(t, k) = kMaskBackgroundNoise * rng.normal();
            }
        }
    }
}

Sample generate_sample(const GenConfig& cfg, double c, std::uint64_t stream_id,
                       const std::string& id) {
    Rng rng = Rng(cfg.seed).fork(stream_id);
    const int action_type = rng.uniform_int(0, kNumActionTypes - 1);

    StageBoundaries b;
    b.t1 = std::clamp(cfg.T / 3 + rng.uniform_int(-cfg.boundary_jitter, cfg.boundary_jitter), 1,
                      cfg.T - 2);
    b.t2 = std::clamp(2 * cfg.T / 3 + rng.uniform_int(-cfg.boundary_jitter, cfg.boundary_jitter),
                      b.t1 + 1, cfg.T - 1);

    const double eta_pair = rng.normal();
    const VideoLatents query = draw_latents(rng, cfg, c, eta_pair);
    const VideoLatents exemplar = draw_latents(rng, cfg, c, eta_pair);

    Tensor qo({cfg.T, cfg.D}), qm({cfg.T, cfg.D}), eo({cfg.T, cfg.D}), em({cfg.T, cfg.D});
    fill_video(qo, qm, query, action_type, b, cfg, rng);
    fill_video(eo, em, exemplar, action_type, b, cfg, rng);

    Tensor mask_targets({cfg.T, cfg.D});
    for (int t = 0; t < cfg.T; ++t) {
        for (int k = 0; k < cfg.D; ++k) {
            double target = k < cfg.D / 2 ? 1.0 : 0.0;
            if (rng.uniform() < kMaskTargetFlipRate) target = 1.0 - target;
            mask_targets.at(t, k) = target;
        }
    }

    return make_sample({StreamId::query_original, std::move(qo)},
                       {StreamId::query_mask, std::move(qm)},
                       {StreamId::exemplar_original, std::move(eo)},
                       {StreamId::exemplar_mask, std::move(em)}, b, std::move(mask_targets),
                       query.score, exemplar.score, action_type, id);
}

std::string sample_id(const char* split, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%05d", split, i);
    return buf;
}

}  // namespace

void validate_config(const GenConfig& cfg) {
    if (cfg.T < 3) throw std::invalid_argument("gen config: T must be >= 3");
    if (cfg.D < 4 || cfg.D % 2 != 0) {
        throw std::invalid_argument("gen config: D must be even and >= 4");
    }
    if (!(cfg.s_min < cfg.s_max)) throw std::invalid_argument("gen config: need s_min < s_max");
    if (cfg.n_train < 0 || cfg.n_test < 0) {
        throw std::invalid_argument("gen config: negative sample counts");
    }
    for (double c : {cfg.c_train, cfg.c_test}) {
        if (!(c >= 0.0 && c <= 1.0)) {
            throw std::invalid_argument("gen config: confounder strength must be in [0, 1]");
        }
    }
    if (cfg.boundary_jitter < 0) throw std::invalid_argument("gen config: negative jitter");
}

std::string gen_config_to_json(const GenConfig& cfg, int indent) {
    nlohmann::json j{{"seed", cfg.seed},
                     {"n_train", cfg.n_train},
                     {"n_test", cfg.n_test},
                     {"T", cfg.T},
                     {"D", cfg.D},
                     {"s_min", cfg.s_min},
                     {"s_max", cfg.s_max},
                     {"c_train", cfg.c_train},
                     {"c_test", cfg.c_test},
                     {"boundary_jitter", cfg.boundary_jitter}};
    return j.dump(indent);
}

GenConfig gen_config_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    GenConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.n_train = j.value("n_train", cfg.n_train);
    cfg.n_test = j.value("n_test", cfg.n_test);
    cfg.T = j.value("T", cfg.T);
    cfg.D = j.value("D", cfg.D);
    cfg.s_min = j.value("s_min", cfg.s_min);
    cfg.s_max = j.value("s_max", cfg.s_max);
    cfg.c_train = j.value("c_train", cfg.c_train);
    cfg.c_test = j.value("c_test", cfg.c_test);
    cfg.boundary_jitter = j.value("boundary_jitter", cfg.boundary_jitter);
    validate_config(cfg);
    return cfg;
}

DatasetPair generate(const GenConfig& cfg) {
    validate_config(cfg);
    DatasetPair out;
    out.train.reserve(cfg.n_train);
    out.test.reserve(cfg.n_test);
    for (int i = 0; i < cfg.n_train; ++i) {
        out.train.push_back(generate_sample(cfg, cfg.c_train, i, sample_id("train", i)));
    }
    for (int i = 0; i < cfg.n_test; ++i) {
        out.test.push_back(generate_sample(cfg, cfg.c_test,
                                           static_cast<std::uint64_t>(cfg.n_train) + i,
                                           sample_id("test", i)));
    }
    return out;
}

void write_dataset(const std::vector<Sample>& samples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    nlohmann::json header{{"format", "stagescore-dataset"},
                          {"version", 1},
                          {"count", samples.size()}};
    out << header.dump() << "\n";
    for (const Sample& s : samples) {
        nlohmann::json j;
        j["id"] = s.id;
        j["action_type"] = s.action_type;
        j["streams"] = {{"qo", jsonutil::tensor_to_json(s.query_original.values)},
                        {"qm", jsonutil::tensor_to_json(s.query_mask.values)},
                        {"eo", jsonutil::tensor_to_json(s.exemplar_original.values)},
                        {"em", jsonutil::tensor_to_json(s.exemplar_mask.values)}};
        j["boundaries"] = {{"t1", s.boundaries.t1}, {"t2", s.boundaries.t2}};
        j["mask_targets"] = jsonutil::tensor_to_json(s.mask_targets);
        j["y_query"] = s.y_query;
        j["y_exemplar"] = s.y_exemplar;
        out << j.dump() << "\n";
    }
}

std::vector<Sample> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& what) -> std::runtime_error {
        return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
    };
    if (!std::getline(in, line)) throw fail("missing dataset header");
    ++line_no;
    try {
        nlohmann::json header = nlohmann::json::parse(line);
        if (header.at("format").get<std::string>() != "stagescore-dataset") {
            throw std::runtime_error("not a stagescore dataset file");
        }
        if (header.at("version").get<int>() != 1) {
            throw std::runtime_error("unsupported dataset version");
        }
    } catch (const std::exception& e) {
        throw fail(std::string("bad header: ") + e.what());
    }

    std::vector<Sample> samples;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            const auto& streams = j.at("streams");
            StageBoundaries b{j.at("boundaries").at("t1").get<int>(),
                              j.at("boundaries").at("t2").get<int>()};
            samples.push_back(make_sample(
                {StreamId::query_original, jsonutil::tensor_from_json(streams.at("qo"))},
                {StreamId::query_mask, jsonutil::tensor_from_json(streams.at("qm"))},
                {StreamId::exemplar_original, jsonutil::tensor_from_json(streams.at("eo"))},
                {StreamId::exemplar_mask, jsonutil::tensor_from_json(streams.at("em"))}, b,
                jsonutil::tensor_from_json(j.at("mask_targets")), j.at("y_query").get<double>(),
                j.at("y_exemplar").get<double>(), j.at("action_type").get<int>(),
                j.at("id").get<std::string>()));
        } catch (const std::exception& e) {
            throw fail(std::string("bad sample record: ") + e.what());
        }
    }
    return samples;
}

double background_score_correlation(const std::vector<Sample>& samples) {
    if (samples.size() < 2) {
        throw std::invalid_argument("background_score_correlation: need at least 2 samples");
    }
    std::vector<double> bg, y;
    for (const Sample& s : samples) {
        const Tensor& qo = s.query_original.values;
        const int fg = qo.cols() / 2;
        double acc = 0.0;
        int n = 0;
        for (int t = 0; t < qo.rows(); ++t) {
            for (int k = fg; k < qo.cols(); ++k) {
                acc += qo.at(t, k);
                ++n;
            }
        }
        bg.push_back(acc / n);
        y.push_back(s.y_query);
    }
    const double n = static_cast<double>(bg.size());
    double mb = 0.0, my = 0.0;
    for (std::size_t i = 0; i < bg.size(); ++i) {
        mb += bg[i];
        my += y[i];
    }
    mb /= n;
    my /= n;
    double sby = 0.0, sbb = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < bg.size(); ++i) {
        sby += (bg[i] - mb) * (y[i] - my);
        sbb += (bg[i] - mb) * (bg[i] - mb);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sbb == 0.0 || syy == 0.0) return 0.0;
    return sby / std::sqrt(sbb * syy);
}

}  // namespace stagescore
