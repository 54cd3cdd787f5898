// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace stagescore {

StageIntervals to_intervals(const StageBoundaries& b, int T) {
    if (!boundaries_valid(b, T)) {
        throw std::invalid_argument("to_intervals: boundaries (" + std::to_string(b.t1) + ", " +
                                    std::to_string(b.t2) + ") invalid for T=" + std::to_string(T));
    }
    return StageIntervals{{{{0, b.t1}, {b.t1, b.t2}, {b.t2, T}}}};
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&values](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Positions i..j (0-based) hold equal values; each gets the mean of
        // the 1-based ranks i+1 .. j+1.
        const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw std::invalid_argument("correlation undefined for constant input");
    }
    return sxy / std::sqrt(sxx * syy);
}

void check_pair(const std::vector<double>& y_true, const std::vector<double>& y_pred,
                const char* op) {
    if (y_true.size() != y_pred.size()) {
        throw std::invalid_argument(std::string(op) + ": length mismatch " +
                                    std::to_string(y_true.size()) + " vs " +
                                    std::to_string(y_pred.size()));
    }
    if (y_true.size() < 2) {
        throw std::invalid_argument(std::string(op) + ": need at least 2 samples");
    }
}

nlohmann::json intervals_to_json(const StageIntervals& iv) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [b, e] : iv.spans) j.push_back({b, e});
    return j;
}

StageIntervals intervals_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw std::invalid_argument("intervals must be an array of 3 [begin, end) pairs");
    }
    StageIntervals iv;
    for (int s = 0; s < 3; ++s) {
        iv.spans[s] = {j[s].at(0).get<int>(), j[s].at(1).get<int>()};
    }
    return iv;
}

}  // namespace

double spearman(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    check_pair(y_true, y_pred, "spearman");
    return pearson(average_ranks(y_true), average_ranks(y_pred));
}

double relative_l2(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    check_pair(y_true, y_pred, "relative_l2");
    const auto [lo, hi] = std::minmax_element(y_true.begin(), y_true.end());
    const double range = *hi - *lo;
    if (range <= 0.0) {
        throw std::invalid_argument("relative_l2: degenerate ground-truth range");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double e = (y_true[i] - y_pred[i]) / range;
        acc += e * e;
    }
    return 100.0 * acc / static_cast<double>(y_true.size());
}

double mean_stage_iou(const StageIntervals& truth, const StageIntervals& pred) {
    double acc = 0.0;
    for (int s = 0; s < 3; ++s) {
        const auto [tb, te] = truth.spans[s];
        const auto [pb, pe] = pred.spans[s];
        if (te <= tb || pe <= pb) {
            throw std::invalid_argument("mean_stage_iou: empty stage interval");
        }
        const int inter = std::max(0, std::min(te, pe) - std::max(tb, pb));
        const int uni = (te - tb) + (pe - pb) - inter;
        acc += static_cast<double>(inter) / static_cast<double>(uni);
    }
    return acc / 3.0;
}

std::map<double, double> aiou(const std::vector<StageIntervals>& truth,
                              const std::vector<StageIntervals>& pred,
                              const std::vector<double>& thresholds) {
    if (truth.size() != pred.size() || truth.empty()) {
        throw std::invalid_argument("aiou: interval lists must be nonempty and equal length");
    }
    std::vector<double> ious;
    ious.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ious.push_back(mean_stage_iou(truth[i], pred[i]));
    }
    std::map<double, double> out;
    for (double tau : thresholds) {
        std::size_t hits = 0;
        for (double v : ious) {
            if (v >= tau) ++hits;
        }
        out[tau] = static_cast<double>(hits) / static_cast<double>(ious.size());
    }
    return out;
}

MetricReport compute_metrics(const std::vector<PredictionRecord>& records) {
    std::vector<double> y_true, y_pred;
    std::vector<StageIntervals> iv_true, iv_pred;
    for (const auto& r : records) {
        y_true.push_back(r.y_true);
        y_pred.push_back(r.y_pred);
        iv_true.push_back(r.intervals_true);
        iv_pred.push_back(r.intervals_pred);
    }
    MetricReport report;
    report.rho = spearman(y_true, y_pred);
    report.r_l2_x100 = relative_l2(y_true, y_pred);
    report.aiou = aiou(iv_true, iv_pred, {kAiouThresholds.begin(), kAiouThresholds.end()});
    return report;
}

std::string metric_report_to_json(const MetricReport& report, int indent) {
    nlohmann::json j;
    j["rho"] = report.rho;
    j["r_l2_x100"] = report.r_l2_x100;
    for (const auto& [tau, v] : report.aiou) {
        // Threshold keys rendered as e.g. "aiou@0.5".
        std::string key = "aiou@" + std::to_string(tau);
        key.erase(key.find_last_not_of('0') + 1);
        if (key.back() == '.') key.pop_back();
        j[key] = v;
    }
    return j.dump(indent);
}

void write_predictions(const std::vector<PredictionRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& r : records) {
        nlohmann::json j;
        j["id"] = r.id;
        j["y_true"] = r.y_true;
        j["y_pred"] = r.y_pred;
        j["intervals_true"] = intervals_to_json(r.intervals_true);
        j["intervals_pred"] = intervals_to_json(r.intervals_pred);
        out << j.dump() << "\n";
    }
}

std::vector<PredictionRecord> read_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<PredictionRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            PredictionRecord r;
            r.id = j.at("id").get<std::string>();
            r.y_true = j.at("y_true").get<double>();
            r.y_pred = j.at("y_pred").get<double>();
            r.intervals_true = intervals_from_json(j.at("intervals_true"));
            r.intervals_pred = intervals_from_json(j.at("intervals_pred"));
            records.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": bad prediction record: " + e.what());
        }
    }
    return records;
}

}  // namespace stagescore
