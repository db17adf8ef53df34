// causal-text: treatment-effect estimation for text classifiers.
//
//   causal-text run --config experiment.cfg --out results/
//   causal-text grid --config experiment.cfg --vary synthetic_ate=-0.5,-0.25,0.25,0.5
//   causal-text gen-demo --out data/demo --docs 25000 --test-docs 5000
//   causal-text ensemble results/run_*/report.json

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "causaltext/demo_corpus.hpp"
#include "causaltext/harness.hpp"

namespace {

using causaltext::ConfigEntries;

struct Overrides {
    ConfigEntries entries;

    void add(const std::string& key, const std::string& value) {
        entries.emplace_back(key, value);
    }
};

void add_run_overrides(CLI::App* cmd, Overrides& ov) {
    auto opt = [&ov, cmd](const std::string& flag, const std::string& key,
                          const std::string& desc) {
        auto value = std::make_shared<std::string>();
        cmd->add_option_function<std::string>(
               flag, [&ov, key](const std::string& v) { ov.add(key, v); }, desc)
            ->expected(1);
    };
    auto flag = [&ov, cmd](const std::string& name, const std::string& key,
                           const std::string& desc) {
        cmd->add_flag_callback(name, [&ov, key] { ov.add(key, "true"); }, desc);
    };
    opt("--epochs", "epochs", "number of training epochs");
    opt("--lr", "learning_rate", "learning rate");
    opt("--batch-size", "batch_size", "minibatch size");
    opt("--lambda-bce", "lambda_bce", "sentiment loss weight");
    opt("--lambda-riesz", "lambda_riesz", "Riesz loss weight");
    opt("--lambda-l1", "lambda_l1", "L1 penalty weight");
    opt("--lambda-reg", "lambda_reg", "effect-regularization weight");
    opt("--early-stop-patience", "early_stop_patience", "early stopping patience");
    opt("--early-stop-epsilon", "early_stop_epsilon", "early stopping epsilon");
    opt("--log-freq", "log_freq", "steps between loss log records");
    opt("--seed", "seed", "training seed");
    opt("--synthetic-ate", "synthetic_ate", "target ATE for synthetic data");
    opt("--synthetic-ate-treat-fraction", "synthetic_ate_treat_fraction",
        "treated fraction for synthetic data");
    opt("--treatment-phrase", "treatment_phrase", "treatment phrase");
    opt("--text-field", "text_field", "JSONL text field name");
    opt("--label-field", "label_field", "JSONL label field name");
    opt("--binarize-threshold", "binarize_threshold", "binarize labels as label > threshold");
    opt("--max-seq-length", "max_seq_length", "token truncation length");
    opt("--limit-data", "limit_data", "cap on loaded documents (0 = all)");
    flag("--interleave", "interleave", "alternate Riesz and sentiment epochs");
    flag("--running-ate", "running_ate", "estimate the ATE every epoch");
    flag("--adjust-ate", "adjust_ate", "synthesize a dataset with the target ATE");
    flag("--treated-only", "treated_only", "average effects over treated documents only");
    flag("--doubly-robust", "doubly_robust", "use the doubly robust estimator");
    flag("--ipw-baseline", "ipw_baseline", "also fit a propensity model and report IPW");
}

int cmd_run(const std::string& config_path, const Overrides& ov, const std::string& out_dir) {
    ConfigEntries entries = causaltext::parse_config_file(config_path);
    entries.insert(entries.end(), ov.entries.begin(), ov.entries.end());
    causaltext::ExperimentConfig cfg = causaltext::build_config(entries);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const causaltext::RunReport report = causaltext::run_experiment(cfg);
    const nlohmann::json j = causaltext::report_to_json(report);
    if (cfg.output_dir.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << "report: " << (std::filesystem::path(cfg.output_dir) / "report.json").string()
                  << '\n';
    }
    std::printf("direct=%+.6f doubly_robust=%+.6f n=%zu scope=%s\n", report.effect.direct,
                report.effect.doubly_robust, report.effect.n,
                causaltext::to_string(report.effect.scope));
    return 0;
}

int cmd_grid(const std::string& config_path, const std::vector<std::string>& vary,
             const Overrides& ov, const std::string& out_dir) {
    ConfigEntries entries = causaltext::parse_config_file(config_path);
    entries.insert(entries.end(), ov.entries.begin(), ov.entries.end());
    std::vector<causaltext::GridAxis> axes;
    for (const std::string& spec : vary) {
        const std::size_t eq = spec.find('=');
        if (eq == std::string::npos) {
            throw causaltext::ConfigError("--vary expects key=v1,v2,... got '" + spec + "'");
        }
        causaltext::GridAxis axis;
        axis.key = spec.substr(0, eq);
        std::string cur;
        for (const char c : spec.substr(eq + 1)) {
            if (c == ',') {
                axis.values.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        axis.values.push_back(cur);
        axes.push_back(std::move(axis));
    }
    const causaltext::GridResult result = causaltext::grid_search(entries, axes, out_dir);
    std::cout << causaltext::grid_summary_to_json(result.summary).dump(2) << '\n';
    return 0;
}

int cmd_gen_demo(const std::string& out_dir, std::size_t docs, std::size_t test_docs,
                 std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    auto write = [](const std::string& path, const std::vector<causaltext::Document>& ds) {
        std::ofstream out(path);
        for (const auto& d : ds) {
            nlohmann::json j;
            j["id"] = d.id;
            j["text"] = d.text;
            j["label"] = d.label;
            out << j.dump() << '\n';
        }
    };
    causaltext::DemoCorpusConfig cfg;
    cfg.docs = docs;
    cfg.seed = seed;
    write((std::filesystem::path(out_dir) / "train.jsonl").string(),
          causaltext::generate_demo_docs(cfg));
    if (test_docs > 0) {
        cfg.docs = test_docs;
        cfg.seed = seed + 1;
        cfg.id_prefix = "demo-test-";
        write((std::filesystem::path(out_dir) / "test.jsonl").string(),
              causaltext::generate_demo_docs(cfg));
    }
    std::cout << "wrote demo corpus to " << out_dir << '\n';
    return 0;
}

int cmd_ensemble(const std::vector<std::string>& report_paths, const std::string& estimator) {
    std::vector<causaltext::RunReport> reports;
    for (const auto& path : report_paths) {
        reports.push_back(causaltext::load_report(path));
    }
    const causaltext::EnsembleSummary s = causaltext::ensemble(reports, estimator);
    nlohmann::json j;
    j["mean"] = s.mean;
    j["min"] = s.min;
    j["max"] = s.max;
    j["n"] = s.n;
    j["estimator"] = s.estimator;
    j["scope"] = causaltext::to_string(s.scope);
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"treatment-effect estimation for text classifiers"};
    app.require_subcommand(1);

    std::string config_path, out_dir, estimator = "doubly_robust";
    std::vector<std::string> vary, report_paths;
    std::size_t docs = 25000, test_docs = 0;
    std::uint64_t seed = 13;
    Overrides ov;

    CLI::App* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory for report.json and train_log.jsonl");
    add_run_overrides(run, ov);

    CLI::App* grid = app.add_subcommand("grid", "run a cartesian grid over config axes");
    grid->add_option("--config", config_path, "base config file")->required();
    grid->add_option("--vary", vary, "axis as key=v1,v2,... (repeatable)")->required();
    grid->add_option("--out", out_dir, "output directory for runs and grid_summary.json");
    add_run_overrides(grid, ov);

    CLI::App* gen = app.add_subcommand("gen-demo", "write the bundled demo corpus as JSONL");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--docs", docs, "training pool size");
    gen->add_option("--test-docs", test_docs, "test pool size");
    gen->add_option("--seed", seed, "generator seed");

    CLI::App* ens = app.add_subcommand("ensemble", "mean/min/max of an estimator over reports");
    ens->add_option("reports", report_paths, "report.json files")->required();
    ens->add_option("--estimator", estimator, "doubly_robust | direct | ipw");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, ov, out_dir);
        if (grid->parsed()) return cmd_grid(config_path, vary, ov, out_dir);
        if (gen->parsed()) return cmd_gen_demo(out_dir, docs, test_docs, seed);
        if (ens->parsed()) return cmd_ensemble(report_paths, estimator);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
