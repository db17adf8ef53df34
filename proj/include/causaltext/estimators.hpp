#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "causaltext/data.hpp"
#include "causaltext/errors.hpp"
#include "causaltext/model.hpp"

namespace causaltext {

enum class EstimateScope { all, treated_only };

inline const char* to_string(EstimateScope s) {
    return s == EstimateScope::all ? "all" : "treated_only";
}

inline constexpr const char* kTreatedOnlyCaveat =
    "treated-only scope: label-flipping synthesis cannot validate this estimand because "
    "naturally occurring treatment phrases correlate with the surrounding text; interpret "
    "with caution";

struct EffectEstimate {
    double direct = 0.0;
    double doubly_robust = 0.0;
    std::optional<double> ipw;
    std::size_t n = 0;
    EstimateScope scope = EstimateScope::all;
    int epoch = -1;
    std::vector<std::string> warnings;
};

namespace detail {

template <typename Fn>
void for_scope(const FeaturizedDataset& data, EstimateScope scope, Fn&& fn) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (scope == EstimateScope::treated_only && data.treated[i] == 0) continue;
        fn(i);
    }
}

inline std::size_t scope_count(const FeaturizedDataset& data, EstimateScope scope) {
    if (scope == EstimateScope::all) return data.size();
    std::size_t n = 0;
    for (const char t : data.treated) n += t != 0;
    return n;
}

}  // namespace detail

// (1/n) sum of g(X,1) - g(X,0); documents are visited in index order so the
// reduction is bit-reproducible.
inline double estimate_direct(const ModelParams& params, const FeaturizedDataset& data,
                              EstimateScope scope = EstimateScope::all) {
    const std::size_t n = detail::scope_count(data, scope);
    if (n == 0) throw EmptyScope("no documents in estimator scope");
    double total = 0;
    detail::for_scope(data, scope, [&](std::size_t i) {
        total += forward_sentiment(params, data.sent_cft.row(i)) -
                 forward_sentiment(params, data.sent_cfc.row(i));
    });
    return total / static_cast<double>(n);
}

// Direct estimate plus the Riesz-weighted residual correction
// (1/n) sum of alpha(Z) (Y - g(Z)).
inline double estimate_dr(const ModelParams& params, const FeaturizedDataset& data,
                          EstimateScope scope = EstimateScope::all) {
    const std::size_t n = detail::scope_count(data, scope);
    if (n == 0) throw EmptyScope("no documents in estimator scope");
    double direct = 0, correction = 0;
    detail::for_scope(data, scope, [&](std::size_t i) {
        direct += forward_sentiment(params, data.sent_cft.row(i)) -
                  forward_sentiment(params, data.sent_cfc.row(i));
        const double g_z = forward_sentiment(params, data.sent_fact.row(i));
        const double a_z = forward_riesz(params, data.rz_fact().row(i));
        correction += a_z * (static_cast<double>(data.labels[i]) - g_z);
    });
    return (direct + correction) / static_cast<double>(n);
}

inline EffectEstimate estimate_effects(const ModelParams& params, const FeaturizedDataset& data,
                                       EstimateScope scope = EstimateScope::all,
                                       int epoch = -1) {
    EffectEstimate est;
    est.scope = scope;
    est.epoch = epoch;
    est.n = detail::scope_count(data, scope);
    if (est.n == 0) throw EmptyScope("no documents in estimator scope");
    est.direct = estimate_direct(params, data, scope);
    est.doubly_robust = estimate_dr(params, data, scope);
    if (scope == EstimateScope::treated_only) {
        est.warnings.push_back(kTreatedOnlyCaveat);
    }
    return est;
}

// Logistic regression e(X) = Pr[T | X] fit by deterministic full-batch
// gradient descent with an L2 penalty on the weights.
struct PropensityModel {
    std::vector<double> weights;
    double bias = 0.0;
    double clip = 0.01;  // 0 disables clipping
    std::size_t iterations_run = 0;
    double final_loss = 0.0;

    double raw(std::span<const double> x) const {
        double z = bias;
        for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * x[i];
        return sigmoid(z);
    }

    double predict(std::span<const double> x) const {
        const double e = raw(x);
        if (clip <= 0.0) return e;
        if (e < clip) return clip;
        if (e > 1.0 - clip) return 1.0 - clip;
        return e;
    }
};

inline PropensityModel fit_propensity(const Matrix& features, std::span<const char> treatments,
                                      double l2, std::size_t iterations, double clip = 0.01) {
    const std::size_t n = features.rows;
    std::size_t n_treated = 0;
    for (const char t : treatments) n_treated += t != 0;
    if (n_treated == 0 || n_treated == n) {
        throw DegenerateGroups("propensity fit needs both treatment groups nonempty");
    }
    PropensityModel model;
    model.clip = clip;
    model.weights.assign(features.cols, 0.0);

    // step size from a Lipschitz bound on the penalized logistic gradient
    double mean_sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 1.0;  // bias coordinate
        for (const double v : features.row(i)) s += v * v;
        mean_sq += s;
    }
    mean_sq /= static_cast<double>(n);
    const double lr = 1.0 / (0.25 * mean_sq + l2);

    std::vector<double> grad_w(features.cols);
    for (std::size_t it = 0; it < iterations; ++it) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        double grad_b = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = model.raw(features.row(i));
            const double r = (e - (treatments[i] != 0 ? 1.0 : 0.0)) / static_cast<double>(n);
            grad_b += r;
            const auto x = features.row(i);
            for (std::size_t k = 0; k < features.cols; ++k) grad_w[k] += r * x[k];
        }
        for (std::size_t k = 0; k < features.cols; ++k) {
            model.weights[k] -= lr * (grad_w[k] + l2 * model.weights[k]);
        }
        model.bias -= lr * grad_b;
    }
    model.iterations_run = iterations;
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = clamp_prob(model.raw(features.row(i)));
        loss += treatments[i] != 0 ? -std::log(e) : -std::log(1.0 - e);
    }
    model.final_loss = loss / static_cast<double>(n);
    return model;
}

// (1/n) sum of alpha_e(Z) Y with alpha_e = T/e(X) - (1-T)/(1-e(X)).
inline double estimate_ipw(const PropensityModel& model, const Matrix& features,
                           std::span<const char> treatments, std::span<const int> labels,
                           EstimateScope scope = EstimateScope::all) {
    double total = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < features.rows; ++i) {
        if (scope == EstimateScope::treated_only && treatments[i] == 0) continue;
        ++n;
        const double e = model.predict(features.row(i));
        const double w = treatments[i] != 0 ? 1.0 / e : -1.0 / (1.0 - e);
        total += w * static_cast<double>(labels[i]);
    }
    if (n == 0) throw EmptyScope("no documents in estimator scope");
    return total / static_cast<double>(n);
}

struct OverlapDiagnostic {
    static constexpr std::size_t kBins = 20;
    std::array<std::size_t, kBins> histogram{};
    double fraction_in_overlap = 0.0;
    double eta = 0.05;
};

inline OverlapDiagnostic overlap_diagnostic(const PropensityModel& model, const Matrix& features,
                                            double eta = 0.05) {
    OverlapDiagnostic diag;
    diag.eta = eta;
    std::size_t inside = 0;
    for (std::size_t i = 0; i < features.rows; ++i) {
        const double e = model.raw(features.row(i));
        auto bin = static_cast<std::size_t>(e * OverlapDiagnostic::kBins);
        if (bin >= OverlapDiagnostic::kBins) bin = OverlapDiagnostic::kBins - 1;
        ++diag.histogram[bin];
        if (e >= eta && e <= 1.0 - eta) ++inside;
    }
    diag.fraction_in_overlap =
        features.rows == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(features.rows);
    return diag;
}

}  // namespace causaltext
