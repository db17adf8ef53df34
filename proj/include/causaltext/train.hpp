#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "causaltext/estimators.hpp"
#include "causaltext/metrics.hpp"
#include "causaltext/objective.hpp"

namespace causaltext {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam. The decay shrink is applied to each parameter
// before the bias-corrected moment step.
class AdamW {
public:
    AdamW(const ModelParams& params, AdamWConfig cfg) : cfg_(cfg) {
        for_each_tensor(const_cast<ModelParams&>(params),
                        [&](ParamGroup group, std::vector<double>& t) {
                            groups_.push_back(group);
                            m_.emplace_back(t.size(), 0.0);
                            v_.emplace_back(t.size(), 0.0);
                            steps_.push_back(0);
                        });
    }

    // Applies one update to every tensor whose group is active; inactive
    // tensors (params, moments, step counts) stay bitwise untouched.
    void step(ModelParams& params, const ModelParams& grads, double lr,
              std::function<bool(ParamGroup)> active = nullptr) {
        std::vector<std::vector<double>*> ptensors, gtensors;
        for_each_tensor(params, [&](ParamGroup, std::vector<double>& t) {
            ptensors.push_back(&t);
        });
        for_each_tensor(const_cast<ModelParams&>(grads),
                        [&](ParamGroup, std::vector<double>& t) { gtensors.push_back(&t); });
        for (std::size_t k = 0; k < ptensors.size(); ++k) {
            if (active && !active(groups_[k])) continue;
            std::vector<double>& p = *ptensors[k];
            const std::vector<double>& g = *gtensors[k];
            std::vector<double>& m = m_[k];
            std::vector<double>& v = v_[k];
            const std::uint64_t t = ++steps_[k];
            const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
            for (std::size_t i = 0; i < p.size(); ++i) {
                p[i] *= 1.0 - lr * cfg_.weight_decay;
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double m_hat = m[i] / bc1;
                const double v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
            }
        }
    }

private:
    AdamWConfig cfg_;
    std::vector<ParamGroup> groups_;
    std::vector<std::vector<double>> m_, v_;
    std::vector<std::uint64_t> steps_;
};

enum class Regime { simultaneous, interleaved };
enum class InterleaveUnit { epoch, step };
enum class TauEstimator { doubly_robust, direct };
enum class TauUpdate { per_epoch, per_batch };

struct EarlyStopConfig {
    std::size_t patience = 4;
    double epsilon = 0.05;
};

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 5e-5;
    LossWeights weights;
    Regime regime = Regime::simultaneous;
    InterleaveUnit interleave_unit = InterleaveUnit::epoch;
    std::optional<EarlyStopConfig> early_stop;
    bool running_ate = true;
    bool doubly_robust = true;
    std::uint64_t seed = 0;
    AdamWConfig adamw;
    TauEstimator reg_tau_estimator = TauEstimator::doubly_robust;
    TauUpdate reg_tau_update = TauUpdate::per_epoch;
    std::size_t log_freq = 100;
    EstimateScope scope = EstimateScope::all;
};

struct TrainingLogRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;  // global step counter
    LossReport losses;
    bool epoch_end = false;
    std::string phase;  // "simultaneous", "riesz", or "sentiment"
    std::optional<double> ate_direct;
    std::optional<double> ate_dr;
    bool ate_out_of_range = false;
    std::optional<double> val_accuracy;
    std::optional<double> val_f1;
    std::optional<double> val_loss;
};

using TrainLogSink = std::function<void(const TrainingLogRecord&)>;

struct TrainResult {
    ModelParams params;
    std::vector<TrainingLogRecord> log;
    std::vector<EffectEstimate> epoch_estimates;
    std::size_t epochs_run = 0;
    bool early_stopped = false;
    std::vector<std::string> warnings;
};

// Stop once the best criterion value has not improved by more than epsilon
// for `patience` consecutive epochs; an improvement of exactly epsilon does
// not count.
inline bool early_stop_check(std::span<const double> history, std::size_t patience,
                             double epsilon) {
    if (history.empty()) return false;
    double best = history[0];
    std::size_t streak = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i] < best - epsilon) {
            best = history[i];
            streak = 0;
        } else {
            ++streak;
        }
    }
    return streak >= patience;
}

// Per-epoch ATEs outside [-1.5, 1.5] on a binary outcome indicate a
// runaway fit; they are flagged, not masked.
inline bool ate_out_of_range(double estimate, double delta = 0.5) {
    return !std::isfinite(estimate) || std::abs(estimate) > 1.0 + delta;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed ^ (stream + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum class Phase { simultaneous, riesz, sentiment };

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::simultaneous: return "simultaneous";
        case Phase::riesz: return "riesz";
        case Phase::sentiment: return "sentiment";
    }
    return "?";
}

inline LossWeights phase_weights(const LossWeights& w, Phase phase) {
    switch (phase) {
        case Phase::simultaneous:
            return w;
        case Phase::riesz:
            return LossWeights{0.0, w.riesz, w.l1, 0.0};
        case Phase::sentiment:
            return LossWeights{w.bce, 0.0, w.l1, w.reg};
    }
    return w;
}

inline std::function<bool(ParamGroup)> phase_mask(Phase phase) {
    switch (phase) {
        case Phase::simultaneous:
            return nullptr;  // all groups
        case Phase::riesz:
            return [](ParamGroup g) { return g != ParamGroup::sentiment; };
        case Phase::sentiment:
            return [](ParamGroup g) { return g != ParamGroup::riesz; };
    }
    return nullptr;
}

inline double tau_estimate(const ModelParams& params, const FeaturizedDataset& data,
                           std::span<const std::size_t> idx, TauEstimator kind,
                           EstimateScope scope) {
    // batch-restricted estimate when idx is a strict subset
    if (idx.empty()) return 0.0;
    double direct = 0, correction = 0;
    std::size_t n = 0;
    for (const std::size_t i : idx) {
        if (scope == EstimateScope::treated_only && data.treated[i] == 0) continue;
        ++n;
        direct += forward_sentiment(params, data.sent_cft.row(i)) -
                  forward_sentiment(params, data.sent_cfc.row(i));
        if (kind == TauEstimator::doubly_robust) {
            const double g_z = forward_sentiment(params, data.sent_fact.row(i));
            const double a_z = forward_riesz(params, data.rz_fact().row(i));
            correction += a_z * (static_cast<double>(data.labels[i]) - g_z);
        }
    }
    if (n == 0) return 0.0;
    return (direct + correction) / static_cast<double>(n);
}

}  // namespace detail

// One optimization loop covering both regimes. Simultaneous training applies
// the full objective to every batch; interleaved training alternates a Riesz
// phase and a sentiment phase (first phase is Riesz so the regularizer has a
// tau estimate before the first sentiment update).
inline TrainResult train(const ModelParams& initial, const FeaturizedDataset& train_data,
                         const FeaturizedDataset* val_data, const TrainConfig& cfg,
                         const TrainLogSink& sink = nullptr) {
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (cfg.learning_rate <= 0) throw ConfigError("learning_rate must be positive");

    TrainResult result;
    result.params = initial;
    AdamW opt(result.params, cfg.adamw);

    std::vector<std::size_t> all_idx(train_data.size());
    for (std::size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = i;

    auto emit = [&](TrainingLogRecord rec) {
        if (sink) sink(rec);
        result.log.push_back(std::move(rec));
    };

    double tau_hat = 0.0;
    std::vector<double> val_history;
    std::size_t global_step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::Phase epoch_phase = detail::Phase::simultaneous;
        if (cfg.regime == Regime::interleaved && cfg.interleave_unit == InterleaveUnit::epoch) {
            epoch_phase = epoch % 2 == 0 ? detail::Phase::riesz : detail::Phase::sentiment;
        }
        if (cfg.weights.reg != 0.0 && cfg.reg_tau_update == TauUpdate::per_epoch) {
            tau_hat = detail::tau_estimate(result.params, train_data, all_idx,
                                           cfg.reg_tau_estimator, cfg.scope);
        }

        std::vector<std::size_t> order = all_idx;
        Rng epoch_rng(detail::mix_seed(cfg.seed, epoch));
        epoch_rng.shuffle(order);

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> batch{order.data() + start, end - start};
            detail::Phase phase = epoch_phase;
            if (cfg.regime == Regime::interleaved &&
                cfg.interleave_unit == InterleaveUnit::step) {
                phase = global_step % 2 == 0 ? detail::Phase::riesz : detail::Phase::sentiment;
            }
            const LossWeights step_weights = detail::phase_weights(cfg.weights, phase);
            if (step_weights.reg != 0.0 && cfg.reg_tau_update == TauUpdate::per_batch) {
                tau_hat = detail::tau_estimate(result.params, train_data, batch,
                                               cfg.reg_tau_estimator, cfg.scope);
            }
            BatchResult res = backward(result.params, train_data, batch, step_weights, tau_hat);
            if (!std::isfinite(res.report.overall)) {
                throw NumericalDivergence("loss became non-finite at epoch " +
                                          std::to_string(epoch) + " step " +
                                          std::to_string(global_step));
            }
            opt.step(result.params, res.grads, cfg.learning_rate, detail::phase_mask(phase));
            if (!all_finite(result.params)) {
                throw NumericalDivergence("parameters became non-finite at epoch " +
                                          std::to_string(epoch) + " step " +
                                          std::to_string(global_step));
            }
            ++global_step;
            if (cfg.log_freq > 0 && global_step % cfg.log_freq == 0) {
                TrainingLogRecord rec;
                rec.epoch = epoch;
                rec.step = global_step;
                rec.losses = res.report;
                rec.phase = detail::phase_name(phase);
                emit(std::move(rec));
            }
        }

        TrainingLogRecord rec;
        rec.epoch = epoch;
        rec.step = global_step;
        rec.epoch_end = true;
        rec.phase = detail::phase_name(epoch_phase);
        rec.losses = compute_losses(result.params, train_data, all_idx, cfg.weights, tau_hat);

        if (cfg.running_ate) {
            EffectEstimate est =
                estimate_effects(result.params, train_data, cfg.scope, static_cast<int>(epoch));
            rec.ate_direct = est.direct;
            rec.ate_dr = est.doubly_robust;
            if (ate_out_of_range(est.doubly_robust)) {
                rec.ate_out_of_range = true;
                result.warnings.push_back("doubly robust estimate " +
                                          std::to_string(est.doubly_robust) +
                                          " outside [-1.5, 1.5] at epoch " +
                                          std::to_string(epoch));
            }
            result.epoch_estimates.push_back(std::move(est));
        }

        if (val_data != nullptr && val_data->size() > 0) {
            std::vector<std::size_t> vidx(val_data->size());
            for (std::size_t i = 0; i < vidx.size(); ++i) vidx[i] = i;
            const LossReport vloss =
                compute_losses(result.params, *val_data, vidx, cfg.weights, tau_hat);
            std::vector<double> probs(val_data->size());
            for (std::size_t i = 0; i < val_data->size(); ++i) {
                probs[i] = forward_sentiment(result.params, val_data->sent_fact.row(i));
            }
            const ClassificationMetrics m =
                classification_metrics(probs, val_data->labels);
            rec.val_loss = vloss.overall;
            rec.val_accuracy = m.accuracy;
            rec.val_f1 = m.f1;
            val_history.push_back(vloss.overall);
        }

        emit(std::move(rec));
        result.epochs_run = epoch + 1;

        if (cfg.early_stop && !val_history.empty() &&
            early_stop_check(val_history, cfg.early_stop->patience, cfg.early_stop->epsilon)) {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

inline TrainResult train_simultaneous(const ModelParams& initial,
                                      const FeaturizedDataset& train_data,
                                      const FeaturizedDataset* val_data, TrainConfig cfg,
                                      const TrainLogSink& sink = nullptr) {
    cfg.regime = Regime::simultaneous;
    return train(initial, train_data, val_data, cfg, sink);
}

inline TrainResult train_interleaved(const ModelParams& initial,
                                     const FeaturizedDataset& train_data,
                                     const FeaturizedDataset* val_data, TrainConfig cfg,
                                     const TrainLogSink& sink = nullptr) {
    cfg.regime = Regime::interleaved;
    return train(initial, train_data, val_data, cfg, sink);
}

}  // namespace causaltext
