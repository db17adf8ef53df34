#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "causaltext/corpus.hpp"
#include "causaltext/errors.hpp"
#include "causaltext/features.hpp"
#include "causaltext/model.hpp"
#include "causaltext/synth.hpp"
#include "causaltext/train.hpp"

namespace causaltext {

enum class DatasetKind { demo, jsonl, imdb };

struct DatasetSpec {
    DatasetKind kind = DatasetKind::demo;
    std::string path;  // jsonl file, or directory holding {train,test}.jsonl
    std::string text_field = "text";
    std::string label_field = "label";
    std::optional<double> binarize_threshold;
    std::size_t limit_data = 0;  // 0 = all
    std::size_t max_seq_len = 150;
    std::vector<double> split_fractions = {0.8, 0.2};
    std::uint64_t split_seed = 7;
    std::size_t demo_docs = 2000;
    std::size_t demo_test_docs = 0;
    std::uint64_t demo_seed = 13;
};

struct FeaturizerConfig {
    enum class Kind { hashing, embedding_file } kind = Kind::hashing;
    std::size_t dim = 256;
    std::uint64_t hash_seed = 0;
    bool l2_normalize = true;
    std::string embedding_path;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    FeaturizerConfig featurizer;
    std::optional<FeaturizerConfig> riesz_featurizer;  // two-backbone only
    ArchKind architecture = ArchKind::shared_backbone;
    bool adapter = false;
    HeadConfig sentiment_head;
    HeadConfig riesz_head;
    std::string treatment_phrase = "love";
    bool adjust_ate = false;
    double synthetic_ate = 0.0;
    double synthetic_ate_treat_fraction = 0.5;
    AppendPosition synthetic_append = AppendPosition::front;
    bool synthetic_exact = true;
    bool natural_treatment = false;  // rejected at synthesis time
    TrainConfig train;
    bool treated_only = false;
    bool ipw_baseline = false;
    double propensity_l2 = 1e-4;
    std::size_t propensity_iterations = 500;
    double propensity_clip = 0.01;
    bool save_checkpoint = true;
    std::string output_dir;  // execution detail; not part of the canonical config
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string normalize_key(std::string key) {
    for (char& c : key) {
        c = ascii_lower(c);
        if (c == '-') c = '_';
    }
    return key;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
    std::string v = normalize_key(raw);
    if (v == "true" || v == "1" || v == "yes" || v == "on" || v == "enabled") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off" || v == "disabled") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + raw + "'");
}

inline double parse_real(const std::string& key, const std::string& raw) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + raw + "'");
    }
}

inline std::uint64_t parse_count(const std::string& key, const std::string& raw) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(raw, &pos);
        if (pos != raw.size() || v < 0) throw std::invalid_argument(raw);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" +
                          raw + "'");
    }
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& raw) {
    std::vector<std::size_t> out;
    std::string cur;
    auto flush = [&] {
        const std::string t = trim(cur);
        if (!t.empty()) out.push_back(static_cast<std::size_t>(parse_count(key, t)));
        cur.clear();
    };
    for (const char c : raw) {
        if (c == ',') {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return out;
}

}  // namespace detail

// Plain "key = value" / "key: value" lines; '#' starts a comment line.
inline ConfigEntries parse_config_text(const std::string& text) {
    ConfigEntries entries;
    std::string line;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        line = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
        start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t sep = t.find('=');
        const std::size_t colon = t.find(':');
        if (colon != std::string::npos && (sep == std::string::npos || colon < sep)) sep = colon;
        if (sep == std::string::npos) {
            throw ParseError("expected 'key = value' or 'key: value'", line_no);
        }
        const std::string key = detail::normalize_key(detail::trim(t.substr(0, sep)));
        const std::string value = detail::trim(t.substr(sep + 1));
        if (key.empty()) throw ParseError("empty config key", line_no);
        entries.emplace_back(key, value);
    }
    return entries;
}

inline ConfigEntries parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

// Builds the effective config; later entries win, unknown keys are errors.
inline ExperimentConfig build_config(const ConfigEntries& entries) {
    ExperimentConfig cfg;
    bool early_patience_set = false, early_epsilon_set = false;
    EarlyStopConfig early;
    bool two_backbone = false;
    std::optional<FeaturizerConfig> riesz_feat;

    for (const auto& [key, value] : entries) {
        using detail::parse_bool;
        using detail::parse_count;
        using detail::parse_real;
        if (key == "dataset") {
            const std::string v = detail::normalize_key(value);
            if (v == "demo") {
                cfg.dataset.kind = DatasetKind::demo;
            } else if (v == "jsonl") {
                cfg.dataset.kind = DatasetKind::jsonl;
            } else if (v == "imdb") {
                cfg.dataset.kind = DatasetKind::imdb;
            } else {
                throw ConfigError("dataset must be demo|jsonl|imdb, got '" + value + "'");
            }
        } else if (key == "data_path") {
            cfg.dataset.path = value;
        } else if (key == "text_field") {
            cfg.dataset.text_field = value;
        } else if (key == "label_field") {
            cfg.dataset.label_field = value;
        } else if (key == "binarize_threshold") {
            cfg.dataset.binarize_threshold = parse_real(key, value);
        } else if (key == "limit_data") {
            cfg.dataset.limit_data = parse_count(key, value);
        } else if (key == "max_seq_length" || key == "max_sequence_length") {
            const auto v = parse_count(key, value);
            if (v == 0) throw ConfigError("max_seq_length must be >= 1");
            cfg.dataset.max_seq_len = v;
        } else if (key == "split_seed") {
            cfg.dataset.split_seed = parse_count(key, value);
        } else if (key == "demo_docs") {
            cfg.dataset.demo_docs = parse_count(key, value);
        } else if (key == "demo_test_docs") {
            cfg.dataset.demo_test_docs = parse_count(key, value);
        } else if (key == "demo_seed") {
            cfg.dataset.demo_seed = parse_count(key, value);
        } else if (key == "featurizer" || key == "pretrained_model") {
            const std::string v = detail::normalize_key(value);
            if (v == "hashing") {
                cfg.featurizer.kind = FeaturizerConfig::Kind::hashing;
            } else if (v == "embedding_file") {
                cfg.featurizer.kind = FeaturizerConfig::Kind::embedding_file;
            } else {
                throw ConfigError("featurizer must be hashing|embedding_file, got '" + value +
                                  "' (full pretrained backbones are not part of this library; "
                                  "export their pooled embeddings and use embedding_file)");
            }
        } else if (key == "hash_dim") {
            const auto v = parse_count(key, value);
            if (v == 0) throw ConfigError("hash_dim must be >= 1");
            cfg.featurizer.dim = v;
        } else if (key == "hash_seed") {
            cfg.featurizer.hash_seed = parse_count(key, value);
        } else if (key == "l2_normalize") {
            cfg.featurizer.l2_normalize = parse_bool(key, value);
        } else if (key == "embedding_path") {
            cfg.featurizer.embedding_path = value;
        } else if (key == "architecture") {
            const std::string v = detail::normalize_key(value);
            if (v == "shared" || v == "shared_backbone") {
                cfg.architecture = ArchKind::shared_backbone;
            } else if (v == "two_backbone" || v == "twobackbone") {
                cfg.architecture = ArchKind::two_backbone;
                two_backbone = true;
            } else {
                throw ConfigError("architecture must be shared|two_backbone");
            }
        } else if (key == "adapter") {
            cfg.adapter = parse_bool(key, value);
        } else if (key == "unfreeze_backbone") {
            const std::string v = detail::normalize_key(value);
            if (v.rfind("top", 0) == 0) {
                cfg.adapter = v != "top0";
            } else {
                cfg.adapter = parse_bool(key, value);
            }
        } else if (key == "sentiment_head_type") {
            const std::string v = detail::normalize_key(value);
            if (v == "linear") {
                cfg.sentiment_head.type = HeadType::linear;
            } else if (v == "fcn") {
                cfg.sentiment_head.type = HeadType::fcn;
            } else {
                throw ConfigError("sentiment_head_type must be linear|fcn (convolutional heads "
                                  "are not supported)");
            }
        } else if (key == "riesz_head_type") {
            const std::string v = detail::normalize_key(value);
            if (v == "linear") {
                cfg.riesz_head.type = HeadType::linear;
            } else if (v == "fcn") {
                cfg.riesz_head.type = HeadType::fcn;
            } else {
                throw ConfigError("riesz_head_type must be linear|fcn");
            }
        } else if (key == "fcn_hidden") {
            const auto sizes = detail::parse_size_list(key, value);
            if (sizes.empty()) throw ConfigError("fcn_hidden needs at least one size");
            cfg.sentiment_head.hidden = sizes;
            cfg.riesz_head.hidden = sizes;
        } else if (key == "lambda_bce") {
            cfg.train.weights.bce = parse_real(key, value);
        } else if (key == "lambda_riesz") {
            cfg.train.weights.riesz = parse_real(key, value);
        } else if (key == "lambda_l1") {
            cfg.train.weights.l1 = parse_real(key, value);
        } else if (key == "lambda_reg") {
            cfg.train.weights.reg = parse_real(key, value);
        } else if (key == "epochs") {
            cfg.train.epochs = parse_count(key, value);
        } else if (key == "batch_size") {
            const auto v = parse_count(key, value);
            if (v == 0) throw ConfigError("batch_size must be >= 1");
            cfg.train.batch_size = v;
        } else if (key == "learning_rate" || key == "lr") {
            cfg.train.learning_rate = parse_real(key, value);
        } else if (key == "log_freq") {
            cfg.train.log_freq = parse_count(key, value);
        } else if (key == "seed") {
            cfg.train.seed = parse_count(key, value);
        } else if (key == "interleave") {
            cfg.train.regime = parse_bool(key, value) ? Regime::interleaved : Regime::simultaneous;
        } else if (key == "interleave_unit") {
            const std::string v = detail::normalize_key(value);
            if (v == "epoch") {
                cfg.train.interleave_unit = InterleaveUnit::epoch;
            } else if (v == "step") {
                cfg.train.interleave_unit = InterleaveUnit::step;
            } else {
                throw ConfigError("interleave_unit must be epoch|step");
            }
        } else if (key == "running_ate") {
            cfg.train.running_ate = parse_bool(key, value);
        } else if (key == "doubly_robust") {
            cfg.train.doubly_robust = parse_bool(key, value);
            cfg.train.reg_tau_estimator =
                cfg.train.doubly_robust ? TauEstimator::doubly_robust : TauEstimator::direct;
        } else if (key == "reg_tau_estimator") {
            const std::string v = detail::normalize_key(value);
            if (v == "dr" || v == "doubly_robust") {
                cfg.train.reg_tau_estimator = TauEstimator::doubly_robust;
            } else if (v == "direct") {
                cfg.train.reg_tau_estimator = TauEstimator::direct;
            } else {
                throw ConfigError("reg_tau_estimator must be dr|direct");
            }
        } else if (key == "reg_tau_update") {
            const std::string v = detail::normalize_key(value);
            if (v == "per_epoch") {
                cfg.train.reg_tau_update = TauUpdate::per_epoch;
            } else if (v == "per_batch") {
                cfg.train.reg_tau_update = TauUpdate::per_batch;
            } else {
                throw ConfigError("reg_tau_update must be per_epoch|per_batch");
            }
        } else if (key == "early_stop_patience") {
            early.patience = parse_count(key, value);
            early_patience_set = true;
        } else if (key == "early_stop_epsilon") {
            early.epsilon = parse_real(key, value);
            early_epsilon_set = true;
        } else if (key == "adamw_beta1") {
            cfg.train.adamw.beta1 = parse_real(key, value);
        } else if (key == "adamw_beta2") {
            cfg.train.adamw.beta2 = parse_real(key, value);
        } else if (key == "adamw_eps") {
            cfg.train.adamw.eps = parse_real(key, value);
        } else if (key == "adamw_weight_decay") {
            cfg.train.adamw.weight_decay = parse_real(key, value);
        } else if (key == "treatment_phrase") {
            std::string v = value;
            for (char& c : v) c = detail::ascii_lower(c);
            cfg.treatment_phrase = v;
        } else if (key == "adjust_ate") {
            cfg.adjust_ate = parse_bool(key, value);
        } else if (key == "synthetic_ate") {
            cfg.synthetic_ate = parse_real(key, value);
        } else if (key == "synthetic_ate_treat_fraction") {
            cfg.synthetic_ate_treat_fraction = parse_real(key, value);
        } else if (key == "synthetic_append_position") {
            const std::string v = detail::normalize_key(value);
            if (v == "front") {
                cfg.synthetic_append = AppendPosition::front;
            } else if (v == "back") {
                cfg.synthetic_append = AppendPosition::back;
            } else {
                throw ConfigError("synthetic_append_position must be front|back");
            }
        } else if (key == "synthetic_exact") {
            cfg.synthetic_exact = parse_bool(key, value);
        } else if (key == "natural_treatment") {
            cfg.natural_treatment = parse_bool(key, value);
        } else if (key == "treated_only") {
            cfg.treated_only = parse_bool(key, value);
        } else if (key == "ipw_baseline") {
            cfg.ipw_baseline = parse_bool(key, value);
        } else if (key == "propensity_l2") {
            cfg.propensity_l2 = parse_real(key, value);
        } else if (key == "propensity_iterations") {
            cfg.propensity_iterations = parse_count(key, value);
        } else if (key == "propensity_clip") {
            cfg.propensity_clip = parse_real(key, value);
        } else if (key == "save_checkpoint") {
            cfg.save_checkpoint = parse_bool(key, value);
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }

    if (early_patience_set || early_epsilon_set) {
        if (early.patience == 0) throw ConfigError("early_stop_patience must be >= 1");
        cfg.train.early_stop = early;
    }
    if (two_backbone) {
        // both backbones read the same featurizer settings unless a future
        // config splits them; the heads are still fully separate
        riesz_feat = cfg.featurizer;
        cfg.riesz_featurizer = riesz_feat;
    }
    if (cfg.treatment_phrase.empty()) throw ConfigError("treatment_phrase must be nonempty");
    cfg.train.scope = cfg.treated_only ? EstimateScope::treated_only : EstimateScope::all;
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    return build_config(parse_config_file(path));
}

// The effective configuration as JSON; nlohmann orders keys, so two configs
// that agree key-by-key serialize identically no matter the input order.
// output_dir is an execution detail and stays out.
inline nlohmann::json canonical_config_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    switch (cfg.dataset.kind) {
        case DatasetKind::demo: j["dataset"] = "demo"; break;
        case DatasetKind::jsonl: j["dataset"] = "jsonl"; break;
        case DatasetKind::imdb: j["dataset"] = "imdb"; break;
    }
    j["data_path"] = cfg.dataset.path;
    j["text_field"] = cfg.dataset.text_field;
    j["label_field"] = cfg.dataset.label_field;
    j["binarize_threshold"] = cfg.dataset.binarize_threshold
                                   ? nlohmann::json(*cfg.dataset.binarize_threshold)
                                   : nlohmann::json(nullptr);
    j["limit_data"] = cfg.dataset.limit_data;
    j["max_seq_length"] = cfg.dataset.max_seq_len;
    j["split_fractions"] = cfg.dataset.split_fractions;
    j["split_seed"] = cfg.dataset.split_seed;
    j["demo_docs"] = cfg.dataset.demo_docs;
    j["demo_test_docs"] = cfg.dataset.demo_test_docs;
    j["demo_seed"] = cfg.dataset.demo_seed;
    j["featurizer"] =
        cfg.featurizer.kind == FeaturizerConfig::Kind::hashing ? "hashing" : "embedding_file";
    j["hash_dim"] = cfg.featurizer.dim;
    j["hash_seed"] = cfg.featurizer.hash_seed;
    j["l2_normalize"] = cfg.featurizer.l2_normalize;
    j["embedding_path"] = cfg.featurizer.embedding_path;
    j["architecture"] =
        cfg.architecture == ArchKind::shared_backbone ? "shared" : "two_backbone";
    j["adapter"] = cfg.adapter;
    j["sentiment_head_type"] = cfg.sentiment_head.type == HeadType::linear ? "linear" : "fcn";
    j["riesz_head_type"] = cfg.riesz_head.type == HeadType::linear ? "linear" : "fcn";
    j["fcn_hidden"] = cfg.sentiment_head.hidden;
    j["lambda_bce"] = cfg.train.weights.bce;
    j["lambda_riesz"] = cfg.train.weights.riesz;
    j["lambda_l1"] = cfg.train.weights.l1;
    j["lambda_reg"] = cfg.train.weights.reg;
    j["epochs"] = cfg.train.epochs;
    j["batch_size"] = cfg.train.batch_size;
    j["learning_rate"] = cfg.train.learning_rate;
    j["log_freq"] = cfg.train.log_freq;
    j["seed"] = cfg.train.seed;
    j["interleave"] = cfg.train.regime == Regime::interleaved;
    j["interleave_unit"] =
        cfg.train.interleave_unit == InterleaveUnit::epoch ? "epoch" : "step";
    j["running_ate"] = cfg.train.running_ate;
    j["doubly_robust"] = cfg.train.doubly_robust;
    j["reg_tau_estimator"] =
        cfg.train.reg_tau_estimator == TauEstimator::doubly_robust ? "dr" : "direct";
    j["reg_tau_update"] =
        cfg.train.reg_tau_update == TauUpdate::per_epoch ? "per_epoch" : "per_batch";
    if (cfg.train.early_stop) {
        j["early_stop_patience"] = cfg.train.early_stop->patience;
        j["early_stop_epsilon"] = cfg.train.early_stop->epsilon;
    } else {
        j["early_stop_patience"] = nullptr;
        j["early_stop_epsilon"] = nullptr;
    }
    j["adamw_beta1"] = cfg.train.adamw.beta1;
    j["adamw_beta2"] = cfg.train.adamw.beta2;
    j["adamw_eps"] = cfg.train.adamw.eps;
    j["adamw_weight_decay"] = cfg.train.adamw.weight_decay;
    j["treatment_phrase"] = cfg.treatment_phrase;
    j["adjust_ate"] = cfg.adjust_ate;
    j["synthetic_ate"] = cfg.synthetic_ate;
    j["synthetic_ate_treat_fraction"] = cfg.synthetic_ate_treat_fraction;
    j["synthetic_append_position"] =
        cfg.synthetic_append == AppendPosition::front ? "front" : "back";
    j["synthetic_exact"] = cfg.synthetic_exact;
    j["natural_treatment"] = cfg.natural_treatment;
    j["treated_only"] = cfg.treated_only;
    j["ipw_baseline"] = cfg.ipw_baseline;
    j["propensity_l2"] = cfg.propensity_l2;
    j["propensity_iterations"] = cfg.propensity_iterations;
    j["propensity_clip"] = cfg.propensity_clip;
    return j;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
    const std::string canon = canonical_config_json(cfg).dump();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canon)));
    return std::string(buf);
}

}  // namespace causaltext
