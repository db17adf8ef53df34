#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "causaltext/errors.hpp"
#include "causaltext/model.hpp"

namespace causaltext {

struct LossWeights {
    double bce = 1.0;
    double riesz = 1.0;
    double l1 = 0.0;
    double reg = 0.0;
};

struct LossReport {
    double sentiment = 0.0;
    double riesz = 0.0;
    double l1 = 0.0;
    double reg = 0.0;
    double overall = 0.0;
    std::size_t batch_size = 0;

    static LossReport combine(double sentiment, double riesz, double l1, double reg,
                              const LossWeights& w, std::size_t batch_size) {
        LossReport r;
        r.sentiment = sentiment;
        r.riesz = riesz;
        r.l1 = l1;
        r.reg = reg;
        r.overall = w.bce * sentiment + w.riesz * riesz + w.l1 * l1 + w.reg * reg;
        r.batch_size = batch_size;
        return r;
    }
};

// Mean binary cross entropy; probabilities are clamped away from {0,1}
// before the logs.
inline double sentiment_loss(std::span<const double> probs, std::span<const int> labels) {
    double total = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double g = clamp_prob(probs[i]);
        total += labels[i] == 1 ? -std::log(g) : -std::log(1.0 - g);
    }
    return probs.empty() ? 0.0 : total / static_cast<double>(probs.size());
}

// Mean of -2(alpha(X,1) - alpha(X,0)) + alpha(Z)^2, where alpha(Z) is the
// factual evaluation.
inline double riesz_loss(std::span<const double> alpha_factual,
                         std::span<const double> alpha_treated,
                         std::span<const double> alpha_control) {
    double total = 0;
    for (std::size_t i = 0; i < alpha_factual.size(); ++i) {
        total += -2.0 * (alpha_treated[i] - alpha_control[i]) +
                 alpha_factual[i] * alpha_factual[i];
    }
    return alpha_factual.empty() ? 0.0 : total / static_cast<double>(alpha_factual.size());
}

// Sum of |theta| over both heads and the adapter when enabled, biases
// included.
inline double l1_loss(const ModelParams& params) {
    double total = 0;
    for_each_tensor(const_cast<ModelParams&>(params),
                    [&](ParamGroup, std::vector<double>& t) {
                        for (double v : t) total += std::abs(v);
                    });
    return total;
}

// Mean of (g(X,1) - g(X,0) - tau_hat)^2; tau_hat is a constant for the step.
inline double reg_loss(std::span<const double> g_treated, std::span<const double> g_control,
                       double tau_hat) {
    double total = 0;
    for (std::size_t i = 0; i < g_treated.size(); ++i) {
        const double diff = g_treated[i] - g_control[i] - tau_hat;
        total += diff * diff;
    }
    return g_treated.empty() ? 0.0 : total / static_cast<double>(g_treated.size());
}

inline LossReport overall_loss(double sentiment, double riesz, double l1, double reg,
                               const LossWeights& weights, std::size_t batch_size) {
    return LossReport::combine(sentiment, riesz, l1, reg, weights, batch_size);
}

}  // namespace causaltext
