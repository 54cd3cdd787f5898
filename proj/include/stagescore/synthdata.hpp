// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stagescore/streams_fusion.hpp"

namespace stagescore {

// Generator settings. Foreground channels (the first D/2) carry the stage
// qualities that actually determine the score; background channels (the last
// D/2, original streams only) carry a confounder whose correlation with the
// score is c_train at generation time for the train split and c_test for the
// test split. Setting c_train high and c_test to zero creates the
// distribution shift the deconfounding experiment measures.
struct GenConfig {
    std::uint64_t seed = 7;
    int n_train = 800;
    int n_test = 200;
    int T = 9;
    int D = 16;
    double s_min = 0.0;
    double s_max = 100.0;
    double c_train = 0.9;
    double c_test = 0.0;
    int boundary_jitter = 1;  // max snippets of jitter around T/3 and 2T/3

    double score_range() const { return s_max - s_min; }
};

void validate_config(const GenConfig& cfg);

std::string gen_config_to_json(const GenConfig& cfg, int indent = -1);
GenConfig gen_config_from_json(const std::string& text);

struct DatasetPair {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

// Deterministic given cfg.seed: every sample derives its own random stream
// from the seed and its index, so regenerating any split is bitwise stable.
DatasetPair generate(const GenConfig& cfg);

// JSON lines: one header object, then one sample per line.
void write_dataset(const std::vector<Sample>& samples, const std::string& path);
std::vector<Sample> read_dataset(const std::string& path);

// Pearson correlation between per-sample mean background activation of the
// query original stream and the query score; used to verify the generator's
// confounder strength.
double background_score_correlation(const std::vector<Sample>& samples);

}  // namespace stagescore
