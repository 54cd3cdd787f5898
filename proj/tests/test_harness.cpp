// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "stagescore/harness.hpp"
#include "oracles.hpp"

using namespace stagescore;

namespace {

// A dataset small enough that whole training runs are test-speed.
RunConfig tiny_config(Variant v, int epochs = 2) {
    RunConfig cfg;
    cfg.variant = v;
    cfg.epochs = epochs;
    cfg.batch_size = 4;
    cfg.seed = 1;
    cfg.gen.T = 5;
    cfg.gen.D = 8;
    cfg.gen.n_train = 8;
    cfg.gen.n_test = 4;
    cfg.gen.seed = 3;
    return cfg;
}

bool reports_equal(const MetricReport& a, const MetricReport& b) {
    return a.rho == b.rho && a.r_l2_x100 == b.r_l2_x100 && a.aiou == b.aiou;
}

bool checkpoints_equal(const Checkpoint& a, const Checkpoint& b) {
    if (a.epoch != b.epoch || a.aborted != b.aborted || a.params.size() != b.params.size() ||
        a.history.size() != b.history.size()) {
        return false;
    }
    for (const auto& [name, value] : a.params) {
        auto it = b.params.find(name);
        if (it == b.params.end() || !(it->second == value)) return false;
    }
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        const EpochStats& x = a.history[i];
        const EpochStats& y = b.history[i];
        if (x.epoch != y.epoch || x.train_loss.weighted_total != y.train_loss.weighted_total ||
            x.train_loss.l_sap != y.train_loss.l_sap || x.train_loss.l_tap != y.train_loss.l_tap ||
            x.train_loss.l_reg != y.train_loss.l_reg || !reports_equal(x.val, y.val)) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("learning rates split at the transition head") {
    RunConfig cfg;
    CHECK(learning_rate_for("tap.w", cfg) == cfg.lr_heads);
    CHECK(learning_rate_for("tap.b", cfg) == cfg.lr_heads);
    for (const char* name : {"gat.l1.theta", "tca.h0.wq", "sap.w", "reg.w1", "loss.s_reg"}) {
        CHECK(learning_rate_for(name, cfg) == cfg.lr_trunk);
    }
}

TEST_CASE("run config round-trips through json") {
    RunConfig cfg = tiny_config(Variant::tca_only, 7);
    cfg.lr_trunk = 5e-4;
    cfg.weight_decay = 0.01;
    cfg.stage_weights = {1.0, 2.0, 3.0};
    cfg.gen.c_train = 0.4;

    RunConfig back = run_config_from_json(run_config_to_json(cfg, 2));
    CHECK(back.variant == cfg.variant);
    CHECK(back.epochs == cfg.epochs);
    CHECK(back.batch_size == cfg.batch_size);
    CHECK(back.lr_trunk == cfg.lr_trunk);
    CHECK(back.lr_heads == cfg.lr_heads);
    CHECK(back.weight_decay == cfg.weight_decay);
    CHECK(back.stage_weights == cfg.stage_weights);
    CHECK(back.seed == cfg.seed);
    CHECK(back.gen.T == cfg.gen.T);
    CHECK(back.gen.c_train == cfg.gen.c_train);
}

TEST_CASE("invalid run configs are rejected") {
    RunConfig cfg = tiny_config(Variant::full);
    cfg.epochs = -1;
    CHECK_THROWS_AS(validate_run_config(cfg), std::invalid_argument);
    cfg = tiny_config(Variant::full);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(validate_run_config(cfg), std::invalid_argument);
    cfg = tiny_config(Variant::full);
    cfg.lr_trunk = -1e-3;
    CHECK_THROWS_AS(validate_run_config(cfg), std::invalid_argument);
    cfg = tiny_config(Variant::full);
    cfg.beta1 = 1.0;
    CHECK_THROWS_AS(validate_run_config(cfg), std::invalid_argument);
}

TEST_CASE("one optimizer step follows the bias-corrected update") {
    RunConfig cfg;
    ParameterStore store;
    store.create("tap.b", Tensor::scalar(1.0));
    store.create("reg.b2", Tensor::scalar(-0.5));
    Adam adam(store, cfg);

    store.get("tap.b").grad.at(0) = 2.0;
    store.get("reg.b2").grad.at(0) = -0.25;
    adam.step();

    // With bias correction the first step is lr * g / (|g| + eps) per group.
    const double head_step = cfg.lr_heads * 2.0 / (2.0 + cfg.adam_eps);
    const double trunk_step = cfg.lr_trunk * -0.25 / (0.25 + cfg.adam_eps);
    CHECK(store.get("tap.b").value.at(0) == doctest::Approx(1.0 - head_step).epsilon(1e-14));
    CHECK(store.get("reg.b2").value.at(0) == doctest::Approx(-0.5 - trunk_step).epsilon(1e-14));
}

TEST_CASE("zero epochs return the initialization") {
    RunConfig cfg = tiny_config(Variant::full, 0);
    DatasetPair data = generate(cfg.gen);
    Checkpoint cp = train(cfg, data.train, data.test);
    CHECK(cp.epoch == 0);
    CHECK(cp.history.empty());
    CHECK_FALSE(cp.aborted);

    ParameterStore fresh;
    Rng rng(cfg.seed);
    init_model_params(fresh, cfg.variant, cfg.model(), rng);
    REQUIRE(cp.params.size() == fresh.size());
    for (const Parameter* p : std::as_const(fresh).all()) {
        REQUIRE(cp.params.count(p->name) == 1);
        CHECK(cp.params.at(p->name) == p->value);
    }
}

TEST_CASE("training is deterministic and logs every step") {
    RunConfig cfg = tiny_config(Variant::full);
    DatasetPair data = generate(cfg.gen);
    const std::string log_path = "harness_metrics_test.jsonl";
    std::remove(log_path.c_str());

    Checkpoint a = train(cfg, data.train, data.test, log_path);
    Checkpoint b = train(cfg, data.train, data.test);
    CHECK(checkpoints_equal(a, b));
    CHECK(a.epoch == cfg.epochs);
    CHECK(a.history.size() == static_cast<std::size_t>(cfg.epochs));

    std::ifstream log(log_path);
    REQUIRE(log.good());
    int steps = 0, epochs = 0;
    std::string line;
    while (std::getline(log, line)) {
        if (line.find("\"kind\":\"step\"") != std::string::npos) ++steps;
        if (line.find("\"kind\":\"epoch\"") != std::string::npos) ++epochs;
    }
    // 8 samples in batches of 4 make 2 steps per epoch.
    CHECK(steps == 2 * cfg.epochs);
    CHECK(epochs == cfg.epochs);
    std::remove(log_path.c_str());
}

TEST_CASE("checkpoints round trip bitwise and reload into identical evaluations") {
    RunConfig cfg = tiny_config(Variant::full);
    DatasetPair data = generate(cfg.gen);
    Checkpoint cp = train(cfg, data.train, data.test);

    const std::string path = "harness_checkpoint_test.json";
    write_checkpoint(cp, path);
    Checkpoint back = read_checkpoint(path);
    CHECK(checkpoints_equal(cp, back));

    EvalResult before = evaluate(cp, data.test);
    EvalResult after = evaluate(back, data.test);
    CHECK(reports_equal(before.report, after.report));
    REQUIRE(before.predictions.size() == after.predictions.size());
    for (std::size_t i = 0; i < before.predictions.size(); ++i) {
        CHECK(before.predictions[i].y_pred == after.predictions[i].y_pred);
        CHECK(before.predictions[i].intervals_pred.spans ==
              after.predictions[i].intervals_pred.spans);
    }
    std::remove(path.c_str());
}

TEST_CASE("snapshot and restore agree") {
    RunConfig cfg = tiny_config(Variant::gat_only);
    ParameterStore store;
    Rng rng(cfg.seed);
    init_model_params(store, cfg.variant, cfg.model(), rng);
    Checkpoint cp = snapshot(store, cfg, 0, {});

    ParameterStore restored;
    Rng other(cfg.seed + 17);
    init_model_params(restored, cfg.variant, cfg.model(), other);
    restore_params(cp, restored);
    REQUIRE(restored.size() == store.size());
    for (const Parameter* p : std::as_const(store).all()) {
        CHECK(restored.get(p->name).value == p->value);
    }

    // A checkpoint with a missing tensor is rejected.
    Checkpoint broken = cp;
    broken.params.erase(broken.params.begin());
    ParameterStore sink;
    Rng sink_rng(cfg.seed);
    init_model_params(sink, cfg.variant, cfg.model(), sink_rng);
    CHECK_THROWS(restore_params(broken, sink));
}

TEST_CASE("variants create exactly their own modules") {
    for (Variant v : all_variants()) {
        RunConfig cfg = tiny_config(v, 0);
        Checkpoint cp = train(cfg, generate(cfg.gen).train, {});
        bool saw_gat = false, saw_tca = false;
        bool saw_heads = false;
        for (const auto& [name, tensor] : cp.params) {
            saw_gat = saw_gat || name.rfind("gat.", 0) == 0;
            saw_tca = saw_tca || name.rfind("tca.", 0) == 0;
            saw_heads = saw_heads || name.rfind("tap.", 0) == 0;
        }
        CHECK(saw_gat == has_gat(v));
        CHECK(saw_tca == has_tca(v));
        CHECK(saw_heads);
    }
}

TEST_CASE("with a zero output projection the full variant is gat_only plus row normalization") {
    RunConfig cfg = tiny_config(Variant::full, 0);
    DatasetPair data = generate(cfg.gen);
    const Sample& sample = data.train.front();

    // Shared modules draw from per-module substreams, so the two stores
    // agree on every gat.* and reg.* tensor under the same seed, and
    // tca.wo starts at zero.
    ParameterStore full_store, gat_store;
    Rng r1(cfg.seed), r2(cfg.seed);
    init_model_params(full_store, Variant::full, cfg.model(), r1);
    init_model_params(gat_store, Variant::gat_only, cfg.model(), r2);
    CHECK(full_store.get("gat.l1.theta").value == gat_store.get("gat.l1.theta").value);
    CHECK(full_store.get("reg.w1").value == gat_store.get("reg.w1").value);

    ForwardResult full_fr =
        forward(sample, full_store, Variant::full, cfg.model(), BoundarySource::ground_truth);
    ForwardResult gat_fr =
        forward(sample, gat_store, Variant::gat_only, cfg.model(), BoundarySource::ground_truth);

    const oracle::Mat gat_stages = oracle::to_mat(gat_fr.stages_query.value());
    const std::vector<double> gain(sample.D(), 1.0), bias(sample.D(), 0.0);
    for (int s = 0; s < 3; ++s) {
        const std::vector<double> expected = oracle::layer_norm_row(gat_stages[s], gain, bias);
        for (int d = 0; d < sample.D(); ++d) {
            CHECK(full_fr.stages_query.value().at(s, d) ==
                  doctest::Approx(expected[d]).epsilon(1e-12));
        }
    }
}

TEST_CASE("teacher forcing uses the true boundaries, evaluation decodes") {
    RunConfig cfg = tiny_config(Variant::baseline, 0);
    DatasetPair data = generate(cfg.gen);
    ParameterStore store;
    Rng rng(cfg.seed);
    init_model_params(store, cfg.variant, cfg.model(), rng);

    const Sample& s = data.train.front();
    ForwardResult forced = forward(s, store, cfg.variant, cfg.model(),
                                   BoundarySource::ground_truth);
    CHECK(forced.boundaries_used.t1 == s.boundaries.t1);
    CHECK(forced.boundaries_used.t2 == s.boundaries.t2);
    // Ground-truth against itself is a perfect parse by definition.
    CHECK(mean_stage_iou(to_intervals(forced.boundaries_used, s.T()),
                         to_intervals(s.boundaries, s.T())) == 1.0);

    ForwardResult decoded = forward(s, store, cfg.variant, cfg.model(), BoundarySource::decoded);
    CHECK(decoded.boundaries_used.t1 ==
          decode_boundaries(decoded.tap_probs.value()).t1);
    CHECK(boundaries_valid(decoded.boundaries_used, s.T()));
}

TEST_CASE("an untrained model still evaluates to a finite report") {
    RunConfig cfg = tiny_config(Variant::full, 0);
    DatasetPair data = generate(cfg.gen);
    Checkpoint cp = train(cfg, data.train, {});
    EvalResult result = evaluate(cp, data.test);
    CHECK(std::isfinite(result.report.rho));
    CHECK(std::abs(result.report.rho) <= 1.0);
    CHECK(std::isfinite(result.report.r_l2_x100));
    CHECK(result.report.aiou.count(0.5) == 1);
    CHECK(result.report.aiou.count(0.75) == 1);
    CHECK(result.predictions.size() == data.test.size());
    CHECK_THROWS_AS(evaluate(cp, std::vector<Sample>{}), std::invalid_argument);
}

TEST_CASE("a non-finite loss aborts onto the last whole epoch") {
    RunConfig cfg = tiny_config(Variant::full, 4);
    // An absurd learning rate sends the parameters to overflow within the
    // first epoch.
    cfg.lr_trunk = 1e14;
    cfg.lr_heads = 1e14;
    DatasetPair data = generate(cfg.gen);
    const std::string log_path = "harness_abort_test.jsonl";
    std::remove(log_path.c_str());

    Checkpoint cp = train(cfg, data.train, data.test, log_path);
    CHECK(cp.aborted);
    CHECK(cp.epoch < cfg.epochs);

    std::ifstream log(log_path);
    std::string line, text;
    while (std::getline(log, line)) text += line + "\n";
    CHECK(text.find("\"kind\":\"abort\"") != std::string::npos);
    std::remove(log_path.c_str());

    // The returned parameters are the pre-divergence snapshot and stay
    // usable.
    for (const auto& [name, tensor] : cp.params) CHECK(tensor.all_finite());
}

TEST_CASE("the ablation runner covers all four variants") {
    RunConfig cfg = tiny_config(Variant::full, 1);
    DatasetPair data = generate(cfg.gen);
    AblationReport report = run_ablation(cfg, data);

    REQUIRE(report.rows.size() == 4);
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        CHECK(report.rows[i].first == all_variants()[i]);
        CHECK(std::isfinite(report.rows[i].second.r_l2_x100));
    }
    for (Variant v : all_variants()) {
        CHECK(report.table_text.find(variant_name(v)) != std::string::npos);
        CHECK(report.csv.find(variant_name(v)) != std::string::npos);
    }
    // Header plus one csv line per variant.
    CHECK(std::count(report.csv.begin(), report.csv.end(), '\n') == 5);
}

TEST_CASE("attention export writes per-sample and summary files") {
    RunConfig cfg = tiny_config(Variant::full, 0);
    DatasetPair data = generate(cfg.gen);
    Checkpoint cp = train(cfg, data.train, {});

    const std::string dir = "harness_export_test";
    std::filesystem::remove_all(dir);
    export_attention(cp, data.train, dir, 2);

    for (const Sample& s : {data.train[0], data.train[1]}) {
        CHECK(std::filesystem::exists(dir + "/gat_attention_" + s.id + ".csv"));
        CHECK(std::filesystem::exists(dir + "/tca_attention_" + s.id + ".csv"));
    }
    CHECK(std::filesystem::exists(dir + "/gat_attention_summary.csv"));
    CHECK(std::filesystem::exists(dir + "/tca_attention_summary.csv"));
    CHECK(std::filesystem::exists(dir + "/attention_shift.csv"));

    // Stage attention files keep the causal zeros in the upper triangle.
    std::ifstream tca(dir + "/tca_attention_" + data.train[0].id + ".csv");
    std::string header, row0;
    std::getline(tca, header);
    std::getline(tca, row0);
    CHECK(row0.find("forward,1") == 0);

    RunConfig base_cfg = tiny_config(Variant::baseline, 0);
    Checkpoint base_cp = train(base_cfg, data.train, {});
    CHECK_THROWS_AS(export_attention(base_cp, data.train, dir, 2), std::invalid_argument);
    CHECK_THROWS_AS(export_attention(cp, data.train, dir, 0), std::invalid_argument);
    std::filesystem::remove_all(dir);
}
