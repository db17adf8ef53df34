#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "causaltext/checkpoint.hpp"
#include "causaltext/config.hpp"
#include "causaltext/demo_corpus.hpp"
#include "causaltext/estimators.hpp"
#include "causaltext/metrics.hpp"
#include "causaltext/synth.hpp"
#include "causaltext/train.hpp"

namespace causaltext {

struct SplitMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    std::optional<double> loss;
};

struct SyntheticSummary {
    double target_ate = 0.0;
    double achieved_ate_train = 0.0;
    std::optional<double> achieved_ate_val;
    double abs_error = 0.0;  // |final DR - target|
};

struct RunReport {
    std::string config_hash;
    nlohmann::json config;
    std::string status = "ok";  // ok | failed
    std::string error;
    std::uint64_t seed = 0;
    double wall_time_seconds = 0.0;
    EffectEstimate effect;
    std::vector<EffectEstimate> epoch_estimates;
    std::optional<SplitMetrics> validation;
    std::optional<SplitMetrics> test;
    std::optional<SyntheticSummary> synthetic;
    std::optional<double> raw_association_train;
    std::optional<OverlapDiagnostic> overlap;
    bool early_stopped = false;
    std::size_t epochs_run = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline nlohmann::json effect_to_json(const EffectEstimate& e) {
    nlohmann::json j;
    j["direct"] = e.direct;
    j["doubly_robust"] = e.doubly_robust;
    j["ipw"] = e.ipw ? nlohmann::json(*e.ipw) : nlohmann::json(nullptr);
    j["n"] = e.n;
    j["scope"] = to_string(e.scope);
    j["epoch"] = e.epoch;
    j["warnings"] = e.warnings;
    return j;
}

inline EffectEstimate effect_from_json(const nlohmann::json& j) {
    EffectEstimate e;
    e.direct = j.at("direct").get<double>();
    e.doubly_robust = j.at("doubly_robust").get<double>();
    if (j.contains("ipw") && !j["ipw"].is_null()) e.ipw = j["ipw"].get<double>();
    e.n = j.at("n").get<std::size_t>();
    e.scope = j.at("scope").get<std::string>() == "treated_only" ? EstimateScope::treated_only
                                                                 : EstimateScope::all;
    if (j.contains("epoch")) e.epoch = j["epoch"].get<int>();
    if (j.contains("warnings")) e.warnings = j["warnings"].get<std::vector<std::string>>();
    return e;
}

}  // namespace detail

inline nlohmann::json report_to_json(const RunReport& r) {
    nlohmann::json j;
    j["config_hash"] = r.config_hash;
    j["config"] = r.config;
    j["status"] = r.status;
    if (!r.error.empty()) j["error"] = r.error;
    j["seed"] = r.seed;
    j["wall_time_seconds"] = r.wall_time_seconds;
    j["effect"] = detail::effect_to_json(r.effect);
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.epoch_estimates) epochs.push_back(detail::effect_to_json(e));
    j["epoch_estimates"] = epochs;
    auto metrics_json = [](const std::optional<SplitMetrics>& m) {
        if (!m) return nlohmann::json(nullptr);
        nlohmann::json mj;
        mj["accuracy"] = m->accuracy;
        mj["f1"] = m->f1;
        mj["loss"] = m->loss ? nlohmann::json(*m->loss) : nlohmann::json(nullptr);
        return mj;
    };
    j["validation"] = metrics_json(r.validation);
    j["test"] = metrics_json(r.test);
    if (r.synthetic) {
        nlohmann::json s;
        s["target_ate"] = r.synthetic->target_ate;
        s["achieved_ate_train"] = r.synthetic->achieved_ate_train;
        s["achieved_ate_val"] = r.synthetic->achieved_ate_val
                                     ? nlohmann::json(*r.synthetic->achieved_ate_val)
                                     : nlohmann::json(nullptr);
        s["abs_error"] = r.synthetic->abs_error;
        j["synthetic"] = s;
    } else {
        j["synthetic"] = nullptr;
    }
    j["raw_association_train"] = r.raw_association_train
                                      ? nlohmann::json(*r.raw_association_train)
                                      : nlohmann::json(nullptr);
    if (r.overlap) {
        nlohmann::json o;
        o["fraction_in_overlap"] = r.overlap->fraction_in_overlap;
        o["eta"] = r.overlap->eta;
        o["histogram"] = r.overlap->histogram;
        j["overlap"] = o;
    } else {
        j["overlap"] = nullptr;
    }
    j["early_stopped"] = r.early_stopped;
    j["epochs_run"] = r.epochs_run;
    j["warnings"] = r.warnings;
    return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config");
    r.status = j.at("status").get<std::string>();
    if (j.contains("error")) r.error = j["error"].get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
    r.effect = detail::effect_from_json(j.at("effect"));
    for (const auto& e : j.at("epoch_estimates")) {
        r.epoch_estimates.push_back(detail::effect_from_json(e));
    }
    if (!j.at("synthetic").is_null()) {
        SyntheticSummary s;
        s.target_ate = j["synthetic"].at("target_ate").get<double>();
        s.achieved_ate_train = j["synthetic"].at("achieved_ate_train").get<double>();
        if (!j["synthetic"].at("achieved_ate_val").is_null()) {
            s.achieved_ate_val = j["synthetic"]["achieved_ate_val"].get<double>();
        }
        s.abs_error = j["synthetic"].at("abs_error").get<double>();
        r.synthetic = s;
    }
    if (!j.at("raw_association_train").is_null()) {
        r.raw_association_train = j["raw_association_train"].get<double>();
    }
    r.early_stopped = j.at("early_stopped").get<bool>();
    r.epochs_run = j.at("epochs_run").get<std::size_t>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
}

inline RunReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open report: " + path);
    nlohmann::json j;
    in >> j;
    return report_from_json(j);
}

// --- data loading ----------------------------------------------------------

struct LoadedData {
    std::vector<Document> train;
    std::vector<Document> validation;
    std::vector<Document> test;
};

inline LoadedData load_dataset(const ExperimentConfig& cfg) {
    const DatasetSpec& ds = cfg.dataset;
    LoadedData out;
    if (ds.kind == DatasetKind::demo) {
        DemoCorpusConfig dc;
        dc.docs = ds.demo_docs;
        dc.seed = ds.demo_seed;
        dc.max_seq_len = ds.max_seq_len;
        std::vector<Document> pool = generate_demo_docs(dc);
        if (ds.limit_data > 0 && pool.size() > ds.limit_data) pool.resize(ds.limit_data);
        DatasetSplit s = split(std::move(pool), ds.split_fractions, ds.split_seed);
        out.train = std::move(s.train);
        out.validation = std::move(s.validation);
        out.test = std::move(s.test);
        if (ds.demo_test_docs > 0) {
            DemoCorpusConfig tc = dc;
            tc.docs = ds.demo_test_docs;
            tc.seed = dc.seed + 1;
            tc.id_prefix = "demo-test-";
            out.test = generate_demo_docs(tc);
        }
        return out;
    }
    JsonlOptions opts;
    opts.text_field = ds.text_field;
    opts.label_field = ds.label_field;
    opts.binarize_threshold = ds.binarize_threshold;
    opts.max_seq_len = ds.max_seq_len;
    if (ds.kind == DatasetKind::jsonl) {
        opts.id_prefix = "doc-";
        std::vector<Document> pool = load_jsonl(ds.path, opts);
        if (ds.limit_data > 0 && pool.size() > ds.limit_data) pool.resize(ds.limit_data);
        DatasetSplit s = split(std::move(pool), ds.split_fractions, ds.split_seed);
        out.train = std::move(s.train);
        out.validation = std::move(s.validation);
        out.test = std::move(s.test);
        return out;
    }
    // imdb: directory of train/test JSONL files
    const std::filesystem::path dir(ds.path);
    opts.id_prefix = "train-";
    std::vector<Document> pool = load_jsonl((dir / "train.jsonl").string(), opts);
    if (ds.limit_data > 0 && pool.size() > ds.limit_data) pool.resize(ds.limit_data);
    DatasetSplit s = split(std::move(pool), ds.split_fractions, ds.split_seed);
    out.train = std::move(s.train);
    out.validation = std::move(s.validation);
    const std::filesystem::path test_path = dir / "test.jsonl";
    if (std::filesystem::exists(test_path)) {
        opts.id_prefix = "test-";
        out.test = load_jsonl(test_path.string(), opts);
    }
    return out;
}

// --- experiment -------------------------------------------------------------

inline FeaturizerSpec make_featurizer_spec(const FeaturizerConfig& fc) {
    FeaturizerSpec spec;
    if (fc.kind == FeaturizerConfig::Kind::hashing) {
        spec.kind = FeaturizerSpec::Kind::hashing;
        spec.hashing.dim = fc.dim;
        spec.hashing.hash_seed = fc.hash_seed;
        spec.hashing.l2_normalize = fc.l2_normalize;
    } else {
        spec.kind = FeaturizerSpec::Kind::embedding_file;
        if (fc.embedding_path.empty()) {
            throw ConfigError("embedding_file featurizer needs embedding_path");
        }
        spec.table = std::make_shared<EmbeddingTable>(EmbeddingTable::load(fc.embedding_path));
    }
    return spec;
}

// Full pipeline for one configuration: load, synthesize (optional),
// featurize, train, estimate, score, and serialize.
inline RunReport run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.config = canonical_config_json(cfg);
    report.config_hash = config_hash(cfg);
    report.seed = cfg.train.seed;

    std::ofstream log_stream;
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        log_stream.open(std::filesystem::path(cfg.output_dir) / "train_log.jsonl");
    }

    LoadedData data = load_dataset(cfg);
    if (data.train.empty()) throw ConfigError("training split is empty");
    for (auto* docs : {&data.train, &data.validation, &data.test}) {
        for (Document& d : *docs) refresh_treated(d, cfg.treatment_phrase);
    }

    if (cfg.adjust_ate) {
        SynthConfig sc;
        sc.phrase = cfg.treatment_phrase;
        sc.proportion_treated = cfg.synthetic_ate_treat_fraction;
        sc.target_ate = cfg.synthetic_ate;
        sc.append_position = cfg.synthetic_append;
        sc.exact = cfg.synthetic_exact;
        sc.max_seq_len = cfg.dataset.max_seq_len;
        sc.keep_natural_occurrences = cfg.natural_treatment;
        sc.seed = cfg.train.seed;
        SynthResult train_res = synthesize(std::move(data.train), sc);
        data.train = std::move(train_res.docs);
        SyntheticSummary summary;
        summary.target_ate = cfg.synthetic_ate;
        summary.achieved_ate_train = train_res.achieved_ate;
        if (!data.validation.empty() && data.validation.size() >= 4) {
            // each split is synthesized to the target independently so the
            // validation task matches the training task
            SynthConfig vc = sc;
            vc.seed = sc.seed + 1;
            SynthResult val_res = synthesize(std::move(data.validation), vc);
            data.validation = std::move(val_res.docs);
            summary.achieved_ate_val = val_res.achieved_ate;
        }
        report.synthetic = summary;
    } else if (cfg.natural_treatment) {
        throw ConfigError("natural_treatment only applies with adjust_ate");
    }

    try {
        report.raw_association_train = raw_association(data.train, cfg.treatment_phrase);
    } catch (const DegenerateGroups&) {
        report.warnings.push_back("raw association unavailable: a treatment group is empty");
    }

    FeaturizerSpec sent_spec = make_featurizer_spec(cfg.featurizer);
    std::optional<FeaturizerSpec> rz_spec;
    if (cfg.architecture == ArchKind::two_backbone) {
        rz_spec = make_featurizer_spec(cfg.riesz_featurizer ? *cfg.riesz_featurizer
                                                            : cfg.featurizer);
    }
    if (sent_spec.kind == FeaturizerSpec::Kind::hashing) {
        verify_phrase_separation(sent_spec.hashing, cfg.treatment_phrase, kMaskToken);
    }

    const FeaturizerSpec* rz_ptr = rz_spec ? &*rz_spec : nullptr;
    FeaturizedDataset train_data = build_featurized(data.train, cfg.treatment_phrase,
                                                    cfg.dataset.max_seq_len, sent_spec, rz_ptr);
    FeaturizedDataset val_data, test_data;
    if (!data.validation.empty()) {
        val_data = build_featurized(data.validation, cfg.treatment_phrase,
                                    cfg.dataset.max_seq_len, sent_spec, rz_ptr);
    }
    if (!data.test.empty()) {
        test_data = build_featurized(data.test, cfg.treatment_phrase, cfg.dataset.max_seq_len,
                                     sent_spec, rz_ptr);
    }

    const std::size_t dim_s = sent_spec.dim();
    const std::size_t dim_r = rz_spec ? rz_spec->dim() : dim_s;
    ModelParams init = init_model(cfg.train.seed, cfg.architecture, cfg.sentiment_head,
                                  cfg.riesz_head, dim_s, dim_r, cfg.adapter);

    TrainLogSink sink;
    if (log_stream.is_open()) {
        sink = [&log_stream](const TrainingLogRecord& rec) {
            nlohmann::json j;
            j["epoch"] = rec.epoch;
            j["step"] = rec.step;
            j["loss_sentiment"] = rec.losses.sentiment;
            j["loss_riesz"] = rec.losses.riesz;
            j["loss_l1"] = rec.losses.l1;
            j["loss_reg"] = rec.losses.reg;
            j["loss_overall"] = rec.losses.overall;
            j["phase"] = rec.phase;
            j["epoch_end"] = rec.epoch_end;
            if (rec.ate_direct) j["ate_direct"] = *rec.ate_direct;
            if (rec.ate_dr) j["ate_dr"] = *rec.ate_dr;
            if (rec.ate_out_of_range) j["ate_out_of_range"] = true;
            if (rec.val_accuracy) j["val_accuracy"] = *rec.val_accuracy;
            if (rec.val_f1) j["val_f1"] = *rec.val_f1;
            if (rec.val_loss) j["val_loss"] = *rec.val_loss;
            log_stream << j.dump() << '\n';
            log_stream.flush();
        };
    }

    TrainResult tr = train(init, train_data, val_data.size() > 0 ? &val_data : nullptr,
                           cfg.train, sink);
    report.epochs_run = tr.epochs_run;
    report.early_stopped = tr.early_stopped;
    report.epoch_estimates = std::move(tr.epoch_estimates);
    for (const auto& w : tr.warnings) report.warnings.push_back(w);

    const EstimateScope scope =
        cfg.treated_only ? EstimateScope::treated_only : EstimateScope::all;
    report.effect = estimate_effects(tr.params, train_data, scope,
                                     static_cast<int>(tr.epochs_run) - 1);

    if (cfg.ipw_baseline) {
        try {
            // e(X) is fit on the control (phrase-masked) features: the
            // confounding text without the treatment itself
            PropensityModel prop =
                fit_propensity(train_data.sent_cfc, train_data.treated, cfg.propensity_l2,
                               cfg.propensity_iterations, cfg.propensity_clip);
            report.effect.ipw = estimate_ipw(prop, train_data.sent_cfc, train_data.treated,
                                             train_data.labels, scope);
            report.overlap = overlap_diagnostic(prop, train_data.sent_cfc);
        } catch (const DegenerateGroups& e) {
            report.warnings.push_back(std::string("ipw baseline skipped: ") + e.what());
        }
    }

    if (report.synthetic) {
        report.synthetic->abs_error =
            std::abs(report.effect.doubly_robust - report.synthetic->target_ate);
    }

    auto split_metrics = [&](const FeaturizedDataset& d) {
        std::vector<double> probs(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            probs[i] = forward_sentiment(tr.params, d.sent_fact.row(i));
        }
        const ClassificationMetrics m = classification_metrics(probs, d.labels);
        SplitMetrics sm;
        sm.accuracy = m.accuracy;
        sm.f1 = m.f1;
        std::vector<double> bce(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) bce[i] = clamp_prob(probs[i]);
        sm.loss = sentiment_loss(bce, d.labels);
        return sm;
    };
    if (val_data.size() > 0) report.validation = split_metrics(val_data);
    if (test_data.size() > 0) report.test = split_metrics(test_data);

    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!cfg.output_dir.empty()) {
        if (cfg.save_checkpoint) {
            save_checkpoint(tr.params,
                            (std::filesystem::path(cfg.output_dir) / "model.bin").string());
        }
        std::ofstream out(std::filesystem::path(cfg.output_dir) / "report.json");
        out << report_to_json(report).dump(2) << '\n';
    }
    return report;
}

// --- grid search -------------------------------------------------------------

struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

struct GridTargetSummary {
    std::size_t runs_total = 0;
    std::size_t runs_completed = 0;
    std::size_t runs_failed = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double mae = 0.0;                       // vs the target, when synthetic
    std::optional<double> mae_over_target;  // mae / |target|
};

struct GridSummary {
    // keyed by the synthetic target ("observational" when adjust_ate is off)
    std::map<std::string, GridTargetSummary> per_target;
    std::string estimator = "doubly_robust";
    std::size_t runs_total = 0;
    std::size_t runs_completed = 0;
};

struct GridResult {
    GridSummary summary;
    std::vector<RunReport> reports;
};

inline nlohmann::json grid_summary_to_json(const GridSummary& s) {
    nlohmann::json j;
    j["estimator"] = s.estimator;
    j["runs_total"] = s.runs_total;
    j["runs_completed"] = s.runs_completed;
    nlohmann::json targets;
    for (const auto& [key, t] : s.per_target) {
        nlohmann::json tj;
        tj["runs_total"] = t.runs_total;
        tj["runs_completed"] = t.runs_completed;
        tj["runs_failed"] = t.runs_failed;
        tj["mean"] = t.mean;
        tj["min"] = t.min;
        tj["max"] = t.max;
        tj["mae"] = t.mae;
        tj["mae_over_target"] =
            t.mae_over_target ? nlohmann::json(*t.mae_over_target) : nlohmann::json(nullptr);
        targets[key] = tj;
    }
    j["per_target"] = targets;
    return j;
}

// Aggregates Table-1-style rows from finished reports; failures are counted,
// never fatal.
inline GridSummary summarize_grid(const std::vector<RunReport>& reports) {
    GridSummary summary;
    std::map<std::string, std::vector<const RunReport*>> groups;
    for (const auto& r : reports) {
        const std::string key =
            r.synthetic ? nlohmann::json(r.synthetic->target_ate).dump() : "observational";
        groups[key].push_back(&r);
        ++summary.runs_total;
    }
    for (const auto& [key, runs] : groups) {
        GridTargetSummary t;
        t.runs_total = runs.size();
        std::vector<double> estimates;
        double target = 0.0;
        bool synthetic = false;
        for (const RunReport* r : runs) {
            if (r->status != "ok") {
                ++t.runs_failed;
                continue;
            }
            ++t.runs_completed;
            estimates.push_back(r->effect.doubly_robust);
            if (r->synthetic) {
                synthetic = true;
                target = r->synthetic->target_ate;
            }
        }
        summary.runs_completed += t.runs_completed;
        if (!estimates.empty()) {
            t.min = estimates[0];
            t.max = estimates[0];
            double sum = 0, abs_err = 0;
            for (const double e : estimates) {
                sum += e;
                t.min = std::min(t.min, e);
                t.max = std::max(t.max, e);
                abs_err += std::abs(e - target);
            }
            t.mean = sum / static_cast<double>(estimates.size());
            if (synthetic) {
                t.mae = abs_err / static_cast<double>(estimates.size());
                if (target != 0.0) t.mae_over_target = t.mae / std::abs(target);
            }
        }
        summary.per_target[key] = t;
    }
    return summary;
}

// Runs the cartesian product of the axes over the base config. Each run gets
// its own output directory; one failed run is recorded and the grid moves on.
inline GridResult grid_search(const ConfigEntries& base, const std::vector<GridAxis>& axes,
                              const std::string& output_dir) {
    for (const auto& axis : axes) {
        if (axis.values.empty()) throw ConfigError("grid axis '" + axis.key + "' has no values");
    }
    std::size_t combos = 1;
    for (const auto& axis : axes) combos *= axis.values.size();

    GridResult result;
    for (std::size_t c = 0; c < combos; ++c) {
        ConfigEntries entries = base;
        std::size_t rem = c;
        for (const auto& axis : axes) {
            const std::string& value = axis.values[rem % axis.values.size()];
            rem /= axis.values.size();
            entries.emplace_back(detail::normalize_key(axis.key), value);
        }
        ExperimentConfig cfg = build_config(entries);
        char run_name[32];
        std::snprintf(run_name, sizeof(run_name), "run_%03zu", c);
        if (!output_dir.empty()) {
            cfg.output_dir = (std::filesystem::path(output_dir) / run_name).string();
        }
        try {
            result.reports.push_back(run_experiment(cfg));
        } catch (const Error& e) {
            RunReport failed;
            failed.config = canonical_config_json(cfg);
            failed.config_hash = config_hash(cfg);
            failed.seed = cfg.train.seed;
            failed.status = "failed";
            failed.error = e.what();
            if (!cfg.output_dir.empty()) {
                std::filesystem::create_directories(cfg.output_dir);
                std::ofstream out(std::filesystem::path(cfg.output_dir) / "report.json");
                out << report_to_json(failed).dump(2) << '\n';
            }
            result.reports.push_back(std::move(failed));
        }
    }
    result.summary = summarize_grid(result.reports);
    if (!output_dir.empty()) {
        std::filesystem::create_directories(output_dir);
        std::ofstream out(std::filesystem::path(output_dir) / "grid_summary.json");
        out << grid_summary_to_json(result.summary).dump(2) << '\n';
    }
    return result;
}

// --- ensemble ----------------------------------------------------------------

struct EnsembleSummary {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t n = 0;
    std::string estimator;
    EstimateScope scope = EstimateScope::all;
};

inline EnsembleSummary ensemble(const std::vector<RunReport>& reports,
                                const std::string& estimator = "doubly_robust") {
    if (reports.empty()) throw MixedScope("ensemble needs at least one report");
    EnsembleSummary s;
    s.estimator = estimator;
    s.scope = reports.front().effect.scope;
    double sum = 0;
    for (const auto& r : reports) {
        if (r.effect.scope != s.scope) {
            throw MixedScope("ensemble reports mix estimator scopes");
        }
        double value = 0;
        if (estimator == "doubly_robust" || estimator == "dr") {
            value = r.effect.doubly_robust;
        } else if (estimator == "direct") {
            value = r.effect.direct;
        } else if (estimator == "ipw") {
            if (!r.effect.ipw) throw ConfigError("report lacks an ipw estimate");
            value = *r.effect.ipw;
        } else {
            throw ConfigError("unknown estimator '" + estimator + "'");
        }
        if (s.n == 0) {
            s.min = value;
            s.max = value;
        }
        s.min = std::min(s.min, value);
        s.max = std::max(s.max, value);
        sum += value;
        ++s.n;
    }
    s.mean = sum / static_cast<double>(s.n);
    return s;
}

}  // namespace causaltext
