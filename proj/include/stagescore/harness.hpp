// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "stagescore/losses.hpp"
#include "stagescore/metrics.hpp"
#include "stagescore/model.hpp"
#include "stagescore/params.hpp"
#include "stagescore/synthdata.hpp"

namespace stagescore {

struct RunConfig {
    Variant variant = Variant::full;
    int epochs = 20;
    int batch_size = 16;
    // The trunk group covers everything except the transition head, whose
    // per-frame probabilities train an order of magnitude slower.
    double lr_trunk = 1e-3;
    double lr_heads = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    double focal_alpha = kFocalAlphaDefault;
    double focal_gamma = kFocalGammaDefault;
    std::array<double, 3> stage_weights = kStageWeights;
    int num_stages = kNumStages;  // recorded constant
    std::uint64_t seed = 1;
    GenConfig gen;

    ModelConfig model() const {
        return ModelConfig{gen.T, gen.D, gen.D, 8, 2, gen.score_range(), stage_weights};
    }
};

void validate_run_config(const RunConfig& cfg);
std::string run_config_to_json(const RunConfig& cfg, int indent = -1);
RunConfig run_config_from_json(const std::string& text);

double learning_rate_for(const std::string& param_name, const RunConfig& cfg);

// Adam with bias correction; moment buffers follow parameter creation order.
class Adam {
public:
    Adam(ParameterStore& store, const RunConfig& cfg);
    void step();

private:
    ParameterStore& store_;
    RunConfig cfg_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct EpochStats {
    int epoch = 0;
    LossBreakdown train_loss;  // means over the epoch's steps
    MetricReport val;
};

struct Checkpoint {
    int version = 1;
    RunConfig config;
    std::map<std::string, Tensor> params;
    int epoch = 0;
    std::vector<EpochStats> history;
    bool aborted = false;
};

std::string checkpoint_to_json(const Checkpoint& cp, int indent = -1);
Checkpoint checkpoint_from_json(const std::string& text);
void write_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

Checkpoint snapshot(const ParameterStore& store, const RunConfig& cfg, int epoch,
                    std::vector<EpochStats> history);
// Recreates the variant's parameters and overwrites them with the stored
// tensors; names and shapes must match exactly.
void restore_params(const Checkpoint& cp, ParameterStore& store);

// Mini-batch training with teacher-forced boundaries. Deterministic given
// cfg.seed. If metrics_log_path is nonempty, JSON lines are appended there:
// one object per optimizer step and one per epoch (with validation metrics).
// A non-finite loss aborts training and returns the last epoch-end snapshot
// with aborted = true.
Checkpoint train(const RunConfig& cfg, const std::vector<Sample>& train_set,
                 const std::vector<Sample>& test_set, const std::string& metrics_log_path = "");

// Scalar training loss over the given samples, rebuilt on every call with
// live parameter values; the shape the gradient checker needs. Boundaries
// are teacher-forced so the loss is differentiable everywhere.
std::function<Var()> training_loss_fn(ParameterStore& store, const RunConfig& cfg,
                                      const std::vector<Sample>& samples);

struct EvalResult {
    MetricReport report;
    std::vector<PredictionRecord> predictions;
};

// Evaluation never teacher-forces: boundaries come from the transition head.
EvalResult evaluate(const Checkpoint& cp, const std::vector<Sample>& samples);
EvalResult evaluate(ParameterStore& store, const RunConfig& cfg,
                    const std::vector<Sample>& samples);

struct AblationReport {
    std::vector<std::pair<Variant, MetricReport>> rows;  // all four variants
    std::string table_text;
    std::string csv;
};

// Trains every variant on the same data and seed, evaluating on the test set.
AblationReport run_ablation(const RunConfig& base_cfg, const DatasetPair& data);

// Writes per-sample GAT (4 x 4) and TCA (3 x 3) attention CSVs for the first
// n samples, plus summary CSVs averaged over those samples and a
// failure-propagation report comparing each sample against a copy with
// corrupted forward-stage features.
void export_attention(const Checkpoint& cp, const std::vector<Sample>& samples,
                      const std::string& out_dir, int n);

}  // namespace stagescore
