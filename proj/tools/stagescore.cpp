// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: data generation, training, evaluation, the ablation
// table, attention export, gradient checking and the causal-graph report.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "stagescore/causal_graph.hpp"
#include "stagescore/grad_check.hpp"
#include "stagescore/harness.hpp"

namespace fc = stagescore;
namespace fs = std::filesystem;

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::string default_out_dir() {
    const char* env = std::getenv("STAGESCORE_OUT_DIR");
    return env != nullptr && *env != '\0' ? env : ".";
}

// --data accepts either a split file or a directory produced by gen-data.
std::string resolve_split(const std::string& data_path, const std::string& split) {
    if (fs::is_directory(data_path)) return data_path + "/" + split + ".jsonl";
    return data_path;
}

// Loading a stored dataset must also restore the generator settings the
// model geometry derives from (snippets, channels, score range), or training
// would build a model sized for the config defaults instead of the data.
fc::DatasetPair load_or_generate(const std::string& data_path, fc::GenConfig& gen) {
    if (data_path.empty()) return fc::generate(gen);
    const std::string stored_config =
        fs::is_directory(data_path) ? data_path + "/gen_config.json" : "";
    if (!stored_config.empty() && fs::exists(stored_config)) {
        gen = fc::gen_config_from_json(read_text_file(stored_config));
    }
    fc::DatasetPair data;
    data.train = fc::read_dataset(resolve_split(data_path, "train"));
    data.test = fc::read_dataset(resolve_split(data_path, "test"));
    const fc::Sample* probe = !data.train.empty()  ? &data.train.front()
                              : !data.test.empty() ? &data.test.front()
                                                   : nullptr;
    if (probe != nullptr) {
        gen.T = probe->T();
        gen.D = probe->D();
    }
    return data;
}

struct ConfigFlags {
    std::string config_path;
    std::string variant;
    std::uint64_t seed = 0;
    int epochs = 0;
    int batch_size = 0;
    CLI::Option* variant_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* batch_opt = nullptr;

    void attach(CLI::App* cmd, bool with_variant) {
        cmd->add_option("--config", config_path, "run config JSON file")
            ->check(CLI::ExistingFile);
        if (with_variant) {
            variant_opt = cmd->add_option("--variant", variant,
                                          "baseline, gat_only, tca_only or full");
        }
        seed_opt = cmd->add_option("--seed", seed, "master seed (overrides config)");
        epochs_opt = cmd->add_option("--epochs", epochs, "training epochs (overrides config)");
        batch_opt = cmd->add_option("--batch-size", batch_size, "batch size (overrides config)");
    }

    // Flags win over the config file.
    fc::RunConfig resolve() const {
        fc::RunConfig cfg;
        if (!config_path.empty()) cfg = fc::run_config_from_json(read_text_file(config_path));
        if (variant_opt != nullptr && variant_opt->count() > 0) {
            cfg.variant = fc::variant_from_name(variant);
        }
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (epochs_opt->count() > 0) cfg.epochs = epochs;
        if (batch_opt->count() > 0) cfg.batch_size = batch_size;
        fc::validate_run_config(cfg);
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stagescore: causal action-quality assessment on synthetic data"};
    app.require_subcommand(1);
    // Options the subcommands do not recognize (notably --out-dir) fall
    // through to the app, so they may be given before or after the command.
    app.fallthrough();
    std::string out_dir = default_out_dir();
    app.add_option("--out-dir", out_dir, "directory for output files")
        ->capture_default_str()
        ->envname("STAGESCORE_OUT_DIR");

    // gen-data
    auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset pair");
    fc::GenConfig gen;
    gen_cmd->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
    gen_cmd->add_option("--n-train", gen.n_train, "training samples")->capture_default_str();
    gen_cmd->add_option("--n-test", gen.n_test, "test samples")->capture_default_str();
    gen_cmd->add_option("--snippets", gen.T, "snippets per video")->capture_default_str();
    gen_cmd->add_option("--channels", gen.D, "feature channels")->capture_default_str();
    gen_cmd->add_option("--s-min", gen.s_min, "minimum score")->capture_default_str();
    gen_cmd->add_option("--s-max", gen.s_max, "maximum score")->capture_default_str();
    gen_cmd->add_option("--c-train", gen.c_train, "train confounder correlation")
        ->capture_default_str();
    gen_cmd->add_option("--c-test", gen.c_test, "test confounder correlation")
        ->capture_default_str();
    gen_cmd->add_option("--jitter", gen.boundary_jitter, "boundary jitter in snippets")
        ->capture_default_str();
    gen_cmd->callback([&] {
        fc::validate_config(gen);
        fs::create_directories(out_dir);
        fc::DatasetPair data = fc::generate(gen);
        fc::write_dataset(data.train, out_dir + "/train.jsonl");
        fc::write_dataset(data.test, out_dir + "/test.jsonl");
        write_text_file(out_dir + "/gen_config.json", fc::gen_config_to_json(gen, 2) + "\n");
        std::printf("wrote %zu train and %zu test samples to %s\n", data.train.size(),
                    data.test.size(), out_dir.c_str());
    });

    // train
    auto* train_cmd = app.add_subcommand("train", "train one variant");
    ConfigFlags train_flags;
    train_flags.attach(train_cmd, true);
    std::string train_data;
    train_cmd->add_option("--data", train_data,
                          "dataset directory or file (default: generate from config)");
    train_cmd->callback([&] {
        fc::RunConfig cfg = train_flags.resolve();
        fc::DatasetPair data = load_or_generate(train_data, cfg.gen);
        fs::create_directories(out_dir);
        fc::Checkpoint cp =
            fc::train(cfg, data.train, data.test, out_dir + "/metrics.jsonl");
        fc::write_checkpoint(cp, out_dir + "/checkpoint.json");
        if (cp.aborted) throw std::runtime_error("training aborted on non-finite loss");
        if (!cp.history.empty()) {
            std::printf("%s\n", fc::metric_report_to_json(cp.history.back().val).c_str());
        }
        std::printf("checkpoint written to %s/checkpoint.json\n", out_dir.c_str());
    });

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_checkpoint, eval_data;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint JSON")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", eval_data, "dataset directory or test split file")
        ->required();
    eval_cmd->callback([&] {
        fc::Checkpoint cp = fc::read_checkpoint(eval_checkpoint);
        std::vector<fc::Sample> samples = fc::read_dataset(resolve_split(eval_data, "test"));
        fc::EvalResult result = fc::evaluate(cp, samples);
        fs::create_directories(out_dir);
        fc::write_predictions(result.predictions, out_dir + "/predictions.jsonl");
        std::printf("%s\n", fc::metric_report_to_json(result.report).c_str());
    });

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "train and compare all four variants");
    ConfigFlags ablate_flags;
    ablate_flags.attach(ablate_cmd, false);
    std::string ablate_data;
    ablate_cmd->add_option("--data", ablate_data,
                           "dataset directory or file (default: generate from config)");
    ablate_cmd->callback([&] {
        fc::RunConfig cfg = ablate_flags.resolve();
        fc::DatasetPair data = load_or_generate(ablate_data, cfg.gen);
        fc::AblationReport report = fc::run_ablation(cfg, data);
        fs::create_directories(out_dir);
        write_text_file(out_dir + "/ablation.csv", report.csv);
        write_text_file(out_dir + "/ablation.txt", report.table_text);
        std::printf("%s", report.table_text.c_str());
    });

    // export-attn
    auto* attn_cmd = app.add_subcommand("export-attn", "export attention matrices as CSV");
    std::string attn_checkpoint, attn_data;
    int attn_n = 8;
    attn_cmd->add_option("--checkpoint", attn_checkpoint, "checkpoint JSON")
        ->required()
        ->check(CLI::ExistingFile);
    attn_cmd->add_option("--data", attn_data, "dataset directory or test split file")
        ->required();
    attn_cmd->add_option("--n", attn_n, "number of samples to export")->capture_default_str();
    attn_cmd->callback([&] {
        fc::Checkpoint cp = fc::read_checkpoint(attn_checkpoint);
        std::vector<fc::Sample> samples = fc::read_dataset(resolve_split(attn_data, "test"));
        fc::export_attention(cp, samples, out_dir, attn_n);
        std::printf("attention CSVs written to %s\n", out_dir.c_str());
    });

    // grad-check
    auto* grad_cmd = app.add_subcommand("grad-check",
                                        "compare autodiff gradients with central differences");
    std::string grad_variant = "full";
    double grad_tol = 1e-4;
    grad_cmd->add_option("--variant", grad_variant, "baseline, gat_only, tca_only or full")
        ->capture_default_str();
    grad_cmd->add_option("--tol", grad_tol, "relative error tolerance")->capture_default_str();
    grad_cmd->callback([&] {
        fc::RunConfig cfg;
        cfg.variant = fc::variant_from_name(grad_variant);
        cfg.gen.T = 5;
        cfg.gen.D = 8;
        cfg.gen.n_train = 2;
        cfg.gen.n_test = 0;
        cfg.gen.seed = 3;
        fc::DatasetPair data = fc::generate(cfg.gen);

        fc::ParameterStore store;
        fc::Rng rng(cfg.seed);
        fc::init_model_params(store, cfg.variant, cfg.model(), rng);
        auto loss_fn = fc::training_loss_fn(store, cfg, data.train);
        fc::GradCheckReport report = fc::grad_check(store, loss_fn, grad_tol);
        std::printf("checked %d coordinates, max rel err %.3g (%s)\n", report.coords_checked,
                    report.max_rel_err, report.worst_param.c_str());
        if (!report.passed()) {
            for (const auto& f : report.failures) {
                std::fprintf(stderr, "FAIL %s[%d]: analytic %.9g numeric %.9g rel %.3g\n",
                             f.param.c_str(), f.index, f.analytic, f.numeric, f.rel_err);
            }
            throw std::runtime_error("gradient check failed on " +
                                     std::to_string(report.failures.size()) + " coordinates");
        }
        std::printf("all gradients match within %.0e\n", grad_tol);
    });

    // graph-report
    auto* graph_cmd = app.add_subcommand("graph-report",
                                         "print the causal graph and its factorization");
    graph_cmd->callback([&] {
        fc::CausalGraph g = fc::default_graph();
        const std::string json_text = fc::graph_to_json_string(g, 2);
        std::printf("%s\n", json_text.c_str());
        std::printf("factorization: %s\n", fc::factorization_string(g).c_str());
        fs::create_directories(out_dir);
        write_text_file(out_dir + "/causal_graph.json", json_text + "\n");
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
