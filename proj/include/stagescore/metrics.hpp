// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stagescore/streams_fusion.hpp"

namespace stagescore {

// Half-open snippet spans of the three stages, partitioning [0, T).
struct StageIntervals {
    std::array<std::pair<int, int>, 3> spans;
};

StageIntervals to_intervals(const StageBoundaries& b, int T);

// Average ranks (ties get the mean of the positions they occupy), 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);

// Spearman's rho: Pearson correlation of average ranks. Throws on n < 2 or
// constant input, where the correlation is undefined.
double spearman(const std::vector<double>& y_true, const std::vector<double>& y_pred);

// 100 * mean(((y - y_hat) / (max(y) - min(y)))^2), range over ground truth.
double relative_l2(const std::vector<double>& y_true, const std::vector<double>& y_pred);

double mean_stage_iou(const StageIntervals& truth, const StageIntervals& pred);

// AIoU@tau: the fraction of samples whose mean stage IoU reaches tau.
std::map<double, double> aiou(const std::vector<StageIntervals>& truth,
                              const std::vector<StageIntervals>& pred,
                              const std::vector<double>& thresholds);

inline constexpr std::array<double, 2> kAiouThresholds = {0.5, 0.75};

struct MetricReport {
    double rho = 0.0;
    double r_l2_x100 = 0.0;
    std::map<double, double> aiou;
};

struct PredictionRecord {
    std::string id;
    double y_true = 0.0;
    double y_pred = 0.0;
    StageIntervals intervals_true;
    StageIntervals intervals_pred;
};

MetricReport compute_metrics(const std::vector<PredictionRecord>& records);

std::string metric_report_to_json(const MetricReport& report, int indent = -1);

void write_predictions(const std::vector<PredictionRecord>& records, const std::string& path);
std::vector<PredictionRecord> read_predictions(const std::string& path);

}  // namespace stagescore
