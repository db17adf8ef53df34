#pragma once

#include <span>
#include <vector>

#include "causaltext/data.hpp"
#include "causaltext/losses.hpp"
#include "causaltext/model.hpp"

namespace causaltext {

struct BatchResult {
    ModelParams grads;  // same shapes as the model, gradient values
    LossReport report;
};

namespace detail {

struct PathTrace {
    AdapterTrace adapter;
    HeadTrace head;
    std::span<const double> input;       // raw features
    std::span<const double> head_input;  // adapter output or raw features
};

inline double eval_path(const ModelParams& params, const Head& head, bool use_adapter,
                        std::span<const double> x, PathTrace& trace) {
    trace.input = x;
    trace.head_input = use_adapter ? adapter_forward(params, x, trace.adapter) : x;
    return head_forward(head, trace.head_input, &trace.head);
}

inline void backprop_path(const ModelParams& params, const Head& head, Head& head_grad,
                          bool use_adapter, const PathTrace& trace, double dout,
                          ModelParams& grads) {
    const std::vector<double> dinput =
        head_backward(head, trace.head_input, trace.head, dout, head_grad);
    if (use_adapter) {
        adapter_backward(params, trace.input, dinput, grads.adapter);
    }
}

}  // namespace detail

// Full loss report on a batch; all four components are evaluated regardless
// of the weights so logs stay complete.
inline LossReport compute_losses(const ModelParams& params, const FeaturizedDataset& data,
                                 std::span<const std::size_t> idx, const LossWeights& weights,
                                 double tau_hat) {
    const std::size_t b = idx.size();
    double sent = 0, rz = 0, reg = 0;
    for (const std::size_t i : idx) {
        const double g_f = forward_sentiment(params, data.sent_fact.row(i));
        const double gc = clamp_prob(g_f);
        sent += data.labels[i] == 1 ? -std::log(gc) : -std::log(1.0 - gc);
        const double g_t = forward_sentiment(params, data.sent_cft.row(i));
        const double g_c = forward_sentiment(params, data.sent_cfc.row(i));
        const double diff = g_t - g_c - tau_hat;
        reg += diff * diff;
        const double a_f = forward_riesz(params, data.rz_fact().row(i));
        const double a_t = forward_riesz(params, data.rz_cft().row(i));
        const double a_c = forward_riesz(params, data.rz_cfc().row(i));
        rz += -2.0 * (a_t - a_c) + a_f * a_f;
    }
    const double denom = b == 0 ? 1.0 : static_cast<double>(b);
    return LossReport::combine(sent / denom, rz / denom, l1_loss(params), reg / denom, weights,
                               b);
}

// Analytic gradients of the combined objective with respect to every
// trainable parameter. tau_hat is treated as a constant (no gradient flows
// through it). The L1 subgradient at zero is zero.
inline BatchResult backward(const ModelParams& params, const FeaturizedDataset& data,
                            std::span<const std::size_t> idx, const LossWeights& weights,
                            double tau_hat) {
    BatchResult result;
    result.grads = zeros_like(params);
    ModelParams& grads = result.grads;
    const std::size_t b = idx.size();
    const double inv_b = b == 0 ? 0.0 : 1.0 / static_cast<double>(b);
    const bool riesz_adapter = params.riesz_uses_adapter();

    double sent = 0, rz = 0, reg = 0;
    detail::PathTrace tr_f, tr_t, tr_c, tr_af, tr_at, tr_ac;
    for (const std::size_t i : idx) {
        const int y = data.labels[i];

        const double logit_f =
            detail::eval_path(params, params.sentiment, params.adapter_enabled,
                              data.sent_fact.row(i), tr_f);
        const double g_f = sigmoid(logit_f);
        const double gc = clamp_prob(g_f);
        sent += y == 1 ? -std::log(gc) : -std::log(1.0 - gc);
        if (weights.bce != 0.0) {
            const double dlogit = weights.bce * (g_f - static_cast<double>(y)) * inv_b;
            detail::backprop_path(params, params.sentiment, grads.sentiment,
                                  params.adapter_enabled, tr_f, dlogit, grads);
        }

        const double logit_t =
            detail::eval_path(params, params.sentiment, params.adapter_enabled,
                              data.sent_cft.row(i), tr_t);
        const double logit_c =
            detail::eval_path(params, params.sentiment, params.adapter_enabled,
                              data.sent_cfc.row(i), tr_c);
        const double g_t = sigmoid(logit_t);
        const double g_c = sigmoid(logit_c);
        const double diff = g_t - g_c - tau_hat;
        reg += diff * diff;
        if (weights.reg != 0.0) {
            const double base = weights.reg * 2.0 * diff * inv_b;
            detail::backprop_path(params, params.sentiment, grads.sentiment,
                                  params.adapter_enabled, tr_t, base * g_t * (1.0 - g_t),
                                  grads);
            detail::backprop_path(params, params.sentiment, grads.sentiment,
                                  params.adapter_enabled, tr_c, -base * g_c * (1.0 - g_c),
                                  grads);
        }

        const double a_f =
            detail::eval_path(params, params.riesz, riesz_adapter, data.rz_fact().row(i), tr_af);
        const double a_t =
            detail::eval_path(params, params.riesz, riesz_adapter, data.rz_cft().row(i), tr_at);
        const double a_c =
            detail::eval_path(params, params.riesz, riesz_adapter, data.rz_cfc().row(i), tr_ac);
        rz += -2.0 * (a_t - a_c) + a_f * a_f;
        if (weights.riesz != 0.0) {
            detail::backprop_path(params, params.riesz, grads.riesz, riesz_adapter, tr_af,
                                  weights.riesz * 2.0 * a_f * inv_b, grads);
            detail::backprop_path(params, params.riesz, grads.riesz, riesz_adapter, tr_at,
                                  weights.riesz * -2.0 * inv_b, grads);
            detail::backprop_path(params, params.riesz, grads.riesz, riesz_adapter, tr_ac,
                                  weights.riesz * 2.0 * inv_b, grads);
        }
    }

    const double l1 = l1_loss(params);
    if (weights.l1 != 0.0) {
        ModelParams& p = const_cast<ModelParams&>(params);
        std::vector<std::vector<double>*> ptensors, gtensors;
        for_each_tensor(p, [&](ParamGroup, std::vector<double>& t) { ptensors.push_back(&t); });
        for_each_tensor(grads,
                        [&](ParamGroup, std::vector<double>& t) { gtensors.push_back(&t); });
        for (std::size_t t = 0; t < ptensors.size(); ++t) {
            const std::vector<double>& pv = *ptensors[t];
            std::vector<double>& gv = *gtensors[t];
            for (std::size_t k = 0; k < pv.size(); ++k) {
                if (pv[k] > 0) {
                    gv[k] += weights.l1;
                } else if (pv[k] < 0) {
                    gv[k] -= weights.l1;
                }
            }
        }
    }

    const double denom = b == 0 ? 1.0 : static_cast<double>(b);
    result.report =
        LossReport::combine(sent / denom, rz / denom, l1, reg / denom, weights, b);
    return result;
}

}  // namespace causaltext
