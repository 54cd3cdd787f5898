// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "stagescore/autodiff.hpp"
#include "json.hpp"
#include "json_util.hpp"

namespace stagescore {

namespace {

using nlohmann::json;

json loss_to_json(const LossBreakdown& l) {
    return json{{"l_sap", l.l_sap},
                {"l_tap", l.l_tap},
                {"l_reg", l.l_reg},
                {"weighted_total", l.weighted_total},
                {"s", l.s}};
}

LossBreakdown loss_from_json(const json& j) {
    LossBreakdown l;
    l.l_sap = j.at("l_sap").get<double>();
    l.l_tap = j.at("l_tap").get<double>();
    l.l_reg = j.at("l_reg").get<double>();
    l.weighted_total = j.at("weighted_total").get<double>();
    l.s = j.at("s").get<std::array<double, 3>>();
    return l;
}

json report_to_json_obj(const MetricReport& r) { return json::parse(metric_report_to_json(r)); }

MetricReport report_from_json(const json& j) {
    MetricReport r;
    r.rho = j.at("rho").get<double>();
    r.r_l2_x100 = j.at("r_l2_x100").get<double>();
    for (const auto& [key, value] : j.items()) {
        if (key.rfind("aiou@", 0) == 0) {
            r.aiou[std::stod(key.substr(5))] = value.get<double>();
        }
    }
    return r;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("run config: " + what);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

// Square attention matrix with identical row and column labels.
std::string attention_csv(const Tensor& a, const char* const* labels) {
    std::string text;
    for (int j = 0; j < a.cols(); ++j) {
        text += ',';
        text += labels[j];
    }
    text += '\n';
    for (int i = 0; i < a.rows(); ++i) {
        text += labels[i];
        for (int j = 0; j < a.cols(); ++j) {
            text += ',';
            text += format_double(a.at(i, j));
        }
        text += '\n';
    }
    return text;
}

void accumulate(Tensor& acc, const Tensor& t, double w) {
    if (acc.data().empty()) acc = Tensor::zeros(t.shape());
    for (std::size_t k = 0; k < t.data().size(); ++k) acc.data()[k] += w * t.data()[k];
}

}  // namespace

void validate_run_config(const RunConfig& cfg) {
    require(cfg.epochs >= 0, "epochs must be >= 0");
    require(cfg.batch_size >= 1, "batch size must be >= 1");
    require(cfg.lr_trunk > 0 && cfg.lr_heads > 0, "learning rates must be positive");
    require(cfg.beta1 >= 0 && cfg.beta1 < 1 && cfg.beta2 >= 0 && cfg.beta2 < 1,
            "moment decays must lie in [0, 1)");
    require(cfg.adam_eps > 0, "adam epsilon must be positive");
    require(cfg.weight_decay >= 0, "weight decay must be >= 0");
    require(cfg.focal_alpha > 0 && cfg.focal_alpha <= 1, "focal alpha must lie in (0, 1]");
    require(cfg.focal_gamma >= 0, "focal gamma must be >= 0");
    for (double w : cfg.stage_weights) {
        require(std::isfinite(w) && w > 0, "stage weights must be positive");
    }
    require(cfg.num_stages == kNumStages, "the stage count is fixed at 3");
    validate_config(cfg.gen);
}

std::string run_config_to_json(const RunConfig& cfg, int indent) {
    json j{{"variant", variant_name(cfg.variant)},
           {"epochs", cfg.epochs},
           {"batch_size", cfg.batch_size},
           {"lr_trunk", cfg.lr_trunk},
           {"lr_heads", cfg.lr_heads},
           {"beta1", cfg.beta1},
           {"beta2", cfg.beta2},
           {"adam_eps", cfg.adam_eps},
           {"weight_decay", cfg.weight_decay},
           {"focal_alpha", cfg.focal_alpha},
           {"focal_gamma", cfg.focal_gamma},
           {"stage_weights", cfg.stage_weights},
           {"num_stages", cfg.num_stages},
           {"seed", cfg.seed},
           {"gen", json::parse(gen_config_to_json(cfg.gen))}};
    return j.dump(indent);
}

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("run config: bad JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        cfg.variant = variant_from_name(j.value("variant", std::string(variant_name(cfg.variant))));
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.lr_trunk = j.value("lr_trunk", cfg.lr_trunk);
        cfg.lr_heads = j.value("lr_heads", cfg.lr_heads);
        cfg.beta1 = j.value("beta1", cfg.beta1);
        cfg.beta2 = j.value("beta2", cfg.beta2);
        cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
        cfg.focal_alpha = j.value("focal_alpha", cfg.focal_alpha);
        cfg.focal_gamma = j.value("focal_gamma", cfg.focal_gamma);
        cfg.stage_weights = j.value("stage_weights", cfg.stage_weights);
        cfg.num_stages = j.value("num_stages", cfg.num_stages);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("gen")) cfg.gen = gen_config_from_json(j.at("gen").dump());
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("run config: ") + e.what());
    }
    validate_run_config(cfg);
    return cfg;
}

double learning_rate_for(const std::string& param_name, const RunConfig& cfg) {
    // Only the transition head uses the slow rate; the mask head behaves like
    // trunk capacity and keeps the fast one.
    return param_name.rfind("tap.", 0) == 0 ? cfg.lr_heads : cfg.lr_trunk;
}

Adam::Adam(ParameterStore& store, const RunConfig& cfg) : store_(store), cfg_(cfg) {
    for (const Parameter* p : static_cast<const ParameterStore&>(store).all()) {
        m_.push_back(Tensor::zeros(p->value.shape()));
        v_.push_back(Tensor::zeros(p->value.shape()));
    }
}

void Adam::step() {
    auto params = store_.all();
    if (params.size() != m_.size()) {
        throw std::runtime_error("optimizer state is stale: parameter count changed");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        const double lr = learning_rate_for(p.name, cfg_);
        auto& value = p.value.data();
        const auto& grad = p.grad.data();
        auto& m = m_[i].data();
        auto& v = v_[i].data();
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad[k] + cfg_.weight_decay * value[k];
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
            value[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.adam_eps);
        }
    }
}

std::string checkpoint_to_json(const Checkpoint& cp, int indent) {
    json params = json::object();
    for (const auto& [name, tensor] : cp.params) params[name] = jsonutil::tensor_to_json(tensor);
    json history = json::array();
    for (const EpochStats& es : cp.history) {
        history.push_back(json{{"epoch", es.epoch},
                               {"train_loss", loss_to_json(es.train_loss)},
                               {"val", report_to_json_obj(es.val)}});
    }
    json j{{"version", cp.version}, {"config", json::parse(run_config_to_json(cp.config))},
           {"params", params},      {"epoch", cp.epoch},
           {"history", history},    {"aborted", cp.aborted}};
    return j.dump(indent);
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: bad JSON: ") + e.what());
    }
    Checkpoint cp;
    try {
        cp.version = j.at("version").get<int>();
        if (cp.version != 1) {
            throw std::runtime_error("checkpoint: unsupported version " +
                                     std::to_string(cp.version));
        }
        cp.config = run_config_from_json(j.at("config").dump());
        for (const auto& [name, value] : j.at("params").items()) {
            cp.params.emplace(name, jsonutil::tensor_from_json(value));
        }
        cp.epoch = j.at("epoch").get<int>();
        for (const json& item : j.at("history")) {
            EpochStats es;
            es.epoch = item.at("epoch").get<int>();
            es.train_loss = loss_from_json(item.at("train_loss"));
            es.val = report_from_json(item.at("val"));
            cp.history.push_back(std::move(es));
        }
        cp.aborted = j.value("aborted", false);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: ") + e.what());
    }
    return cp;
}

void write_checkpoint(const Checkpoint& cp, const std::string& path) {
    write_text_file(path, checkpoint_to_json(cp) + "\n");
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_json(text);
}

Checkpoint snapshot(const ParameterStore& store, const RunConfig& cfg, int epoch,
                    std::vector<EpochStats> history) {
    Checkpoint cp;
    cp.config = cfg;
    cp.epoch = epoch;
    cp.history = std::move(history);
    for (const Parameter* p : store.all()) cp.params.emplace(p->name, p->value);
    return cp;
}

void restore_params(const Checkpoint& cp, ParameterStore& store) {
    if (cp.params.size() != store.size()) {
        throw std::runtime_error("checkpoint holds " + std::to_string(cp.params.size()) +
                                 " parameters but the model has " + std::to_string(store.size()));
    }
    for (Parameter* p : store.all()) {
        auto it = cp.params.find(p->name);
        if (it == cp.params.end()) {
            throw std::runtime_error("checkpoint is missing parameter " + p->name);
        }
        if (!it->second.same_shape(p->value)) {
            throw std::runtime_error("checkpoint parameter " + p->name + " has shape " +
                                     shape_string(it->second.shape()) + ", expected " +
                                     shape_string(p->value.shape()));
        }
        p->value = it->second;
        p->zero_grad();
    }
}

namespace {

struct BatchLoss {
    Var l_sap, l_tap, l_reg, total;
};

BatchLoss batch_loss(const std::vector<Sample>& train_set, const std::vector<int>& order,
                     std::size_t begin, std::size_t end, ParameterStore& store,
                     const RunConfig& cfg, const ModelConfig& mc) {
    BatchLoss b;
    for (std::size_t pos = begin; pos < end; ++pos) {
        const Sample& sample = train_set[static_cast<std::size_t>(order[pos])];
        ForwardResult fr = forward(sample, store, cfg.variant, mc, BoundarySource::ground_truth);
        Var l_sap =
            focal_loss(fr.sap_logits, sample.mask_targets, cfg.focal_alpha, cfg.focal_gamma);
        Var l_tap = bce_loss(fr.tap_probs, transition_targets(sample));
        Tensor target({1, 1});
        target.at(0, 0) = (sample.y_query - sample.y_exemplar) / mc.score_range;
        Var l_reg = mse_loss(fr.delta, target);
        if (pos == begin) {
            b.l_sap = l_sap;
            b.l_tap = l_tap;
            b.l_reg = l_reg;
        } else {
            b.l_sap = add(b.l_sap, l_sap);
            b.l_tap = add(b.l_tap, l_tap);
            b.l_reg = add(b.l_reg, l_reg);
        }
    }
    const double inv = 1.0 / static_cast<double>(end - begin);
    b.l_sap = scale(b.l_sap, inv);
    b.l_tap = scale(b.l_tap, inv);
    b.l_reg = scale(b.l_reg, inv);
    b.total = uncertainty_weighted_total({b.l_sap, b.l_tap, b.l_reg}, bind_loss_params(store));
    return b;
}

std::array<double, 3> current_s(const ParameterStore& store) {
    return {store.get("loss.s_sap").value.data()[0], store.get("loss.s_tap").value.data()[0],
            store.get("loss.s_reg").value.data()[0]};
}

}  // namespace

std::function<Var()> training_loss_fn(ParameterStore& store, const RunConfig& cfg,
                                      const std::vector<Sample>& samples) {
    if (samples.empty()) throw std::invalid_argument("training_loss_fn: no samples");
    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    return [&store, &samples, cfg, mc = cfg.model(), order]() {
        return batch_loss(samples, order, 0, samples.size(), store, cfg, mc).total;
    };
}

Checkpoint train(const RunConfig& cfg, const std::vector<Sample>& train_set,
                 const std::vector<Sample>& test_set, const std::string& metrics_log_path) {
    validate_run_config(cfg);
    if (train_set.empty()) throw std::invalid_argument("train: training set is empty");
    const ModelConfig mc = cfg.model();

    ParameterStore store;
    Rng master(cfg.seed);
    init_model_params(store, cfg.variant, mc, master);
    Adam opt(store, cfg);

    std::ofstream log;
    if (!metrics_log_path.empty()) {
        log.open(metrics_log_path, std::ios::binary);
        if (!log) throw std::runtime_error("cannot open metrics log " + metrics_log_path);
    }

    std::vector<EpochStats> history;
    Checkpoint last_good = snapshot(store, cfg, 0, history);
    const std::size_t n = train_set.size();
    long global_step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = master.fork(1000 + static_cast<std::uint64_t>(epoch));
        for (std::size_t i = n; i > 1; --i) {
            const auto j = static_cast<std::size_t>(
                shuffle_rng.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        LossBreakdown epoch_mean;
        int steps = 0;
        for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
            store.zero_grad();
            BatchLoss b = batch_loss(train_set, order, begin, end, store, cfg, mc);
            const double total_v = scalar(b.total);
            if (!std::isfinite(total_v)) {
                if (log) {
                    log << json{{"kind", "abort"}, {"epoch", epoch}, {"step", global_step}}.dump()
                        << '\n';
                }
                last_good.aborted = true;
                return last_good;
            }
            backward(b.total);
            opt.step();
            ++global_step;
            ++steps;
            epoch_mean.l_sap += scalar(b.l_sap);
            epoch_mean.l_tap += scalar(b.l_tap);
            epoch_mean.l_reg += scalar(b.l_reg);
            epoch_mean.weighted_total += total_v;
            if (log) {
                log << json{{"kind", "step"},
                            {"step", global_step},
                            {"epoch", epoch},
                            {"l_sap", scalar(b.l_sap)},
                            {"l_tap", scalar(b.l_tap)},
                            {"l_reg", scalar(b.l_reg)},
                            {"total", total_v}}
                           .dump()
                    << '\n';
            }
        }
        epoch_mean.l_sap /= steps;
        epoch_mean.l_tap /= steps;
        epoch_mean.l_reg /= steps;
        epoch_mean.weighted_total /= steps;
        epoch_mean.s = current_s(store);

        EpochStats es;
        es.epoch = epoch;
        es.train_loss = epoch_mean;
        if (test_set.size() >= 2) es.val = evaluate(store, cfg, test_set).report;
        history.push_back(es);
        if (log) {
            log << json{{"kind", "epoch"},
                        {"epoch", epoch},
                        {"train_loss", loss_to_json(es.train_loss)},
                        {"val", report_to_json_obj(es.val)}}
                       .dump()
                << '\n';
        }
        last_good = snapshot(store, cfg, epoch + 1, history);
    }
    return last_good;
}

EvalResult evaluate(ParameterStore& store, const RunConfig& cfg,
                    const std::vector<Sample>& samples) {
    if (samples.size() < 2) {
        throw std::invalid_argument("evaluate: need at least 2 samples, got " +
                                    std::to_string(samples.size()));
    }
    const ModelConfig mc = cfg.model();
    EvalResult result;
    result.predictions.reserve(samples.size());
    for (const Sample& sample : samples) {
        ForwardResult fr = forward(sample, store, cfg.variant, mc, BoundarySource::decoded);
        PredictionRecord rec;
        rec.id = sample.id;
        rec.y_true = sample.y_query;
        rec.y_pred = fr.y_query_pred;
        rec.intervals_true = to_intervals(sample.boundaries, sample.T());
        rec.intervals_pred = to_intervals(fr.boundaries_used, sample.T());
        result.predictions.push_back(std::move(rec));
    }
    result.report = compute_metrics(result.predictions);
    return result;
}

EvalResult evaluate(const Checkpoint& cp, const std::vector<Sample>& samples) {
    ParameterStore store;
    Rng rng(cp.config.seed);
    init_model_params(store, cp.config.variant, cp.config.model(), rng);
    restore_params(cp, store);
    return evaluate(store, cp.config, samples);
}

AblationReport run_ablation(const RunConfig& base_cfg, const DatasetPair& data) {
    AblationReport report;
    for (Variant v : all_variants()) {
        RunConfig cfg = base_cfg;
        cfg.variant = v;
        Checkpoint cp = train(cfg, data.train, data.test);
        report.rows.emplace_back(v, evaluate(cp, data.test).report);
    }

    std::string table = "variant      rho  r_l2_x100";
    std::string csv = "variant,rho,r_l2_x100";
    for (double tau : kAiouThresholds) {
        char head[32];
        std::snprintf(head, sizeof head, "  aiou@%.2f", tau);
        table += head;
        std::snprintf(head, sizeof head, ",aiou@%.2f", tau);
        csv += head;
    }
    table += '\n';
    csv += '\n';
    for (const auto& [v, r] : report.rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%-8s  %6.4f  %9.4f", variant_name(v), r.rho,
                      r.r_l2_x100);
        table += line;
        csv += variant_name(v);
        std::snprintf(line, sizeof line, ",%.6f,%.6f", r.rho, r.r_l2_x100);
        csv += line;
        for (const auto& [tau, value] : r.aiou) {
            std::snprintf(line, sizeof line, "  %9.4f", value);
            table += line;
            std::snprintf(line, sizeof line, ",%.6f", value);
            csv += line;
        }
        table += '\n';
        csv += '\n';
    }
    report.table_text = table;
    report.csv = csv;
    return report;
}

void export_attention(const Checkpoint& cp, const std::vector<Sample>& samples,
                      const std::string& out_dir, int n) {
    const Variant v = cp.config.variant;
    if (!has_gat(v) && !has_tca(v)) {
        throw std::invalid_argument(std::string("export_attention: variant ") + variant_name(v) +
                                    " has no attention module");
    }
    if (n <= 0) throw std::invalid_argument("export_attention: n must be positive");
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(n), samples.size());
    if (count == 0) throw std::invalid_argument("export_attention: no samples");

    ParameterStore store;
    Rng rng(cp.config.seed);
    init_model_params(store, v, cp.config.model(), rng);
    restore_params(cp, store);

    std::filesystem::create_directories(out_dir);
    const ModelConfig mc = cp.config.model();
    const double w = 1.0 / static_cast<double>(count);

    Tensor gat_sum, tca_sum, shift_sum;
    for (std::size_t i = 0; i < count; ++i) {
        const Sample& sample = samples[i];
        ForwardResult fr = forward(sample, store, v, mc, BoundarySource::decoded);
        const std::string base = out_dir + "/";
        if (has_gat(v)) {
            write_text_file(base + "gat_attention_" + sample.id + ".csv",
                            attention_csv(fr.gat_attention, kGatNodeLabels));
            accumulate(gat_sum, fr.gat_attention, w);
        }
        if (has_tca(v)) {
            write_text_file(base + "tca_attention_" + sample.id + ".csv",
                            attention_csv(fr.tca_attention_query, kStageNames));
            accumulate(tca_sum, fr.tca_attention_query, w);

            // Paired comparison: re-run with the query's opening stage buried
            // in noise and record how the stage attention moves. Ground-truth
            // boundaries on both passes keep the pooling windows aligned.
            Sample corrupted = sample;
            Rng noise = Rng(cp.config.seed).fork(9000 + i);
            Tensor qo = sample.query_original.values;
            for (int t = 0; t < sample.boundaries.t1; ++t) {
                for (int k = 0; k < qo.cols(); ++k) qo.at(t, k) += 3.0 * noise.normal();
            }
            corrupted = make_sample({sample.query_original.id, qo}, sample.query_mask,
                                    sample.exemplar_original, sample.exemplar_mask,
                                    sample.boundaries, sample.mask_targets, sample.y_query,
                                    sample.y_exemplar, sample.action_type, sample.id);
            ForwardResult clean = forward(sample, store, v, mc, BoundarySource::ground_truth);
            ForwardResult noisy = forward(corrupted, store, v, mc, BoundarySource::ground_truth);
            Tensor diff = noisy.tca_attention_query;
            for (std::size_t k = 0; k < diff.data().size(); ++k) {
                diff.data()[k] -= clean.tca_attention_query.data()[k];
            }
            accumulate(shift_sum, diff, w);
        }
    }
    if (has_gat(v)) {
        write_text_file(out_dir + "/gat_attention_summary.csv",
                        attention_csv(gat_sum, kGatNodeLabels));
    }
    if (has_tca(v)) {
        write_text_file(out_dir + "/tca_attention_summary.csv",
                        attention_csv(tca_sum, kStageNames));
        write_text_file(out_dir + "/attention_shift.csv", attention_csv(shift_sum, kStageNames));
    }
}

}  // namespace stagescore
