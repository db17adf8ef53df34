#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "causaltext/errors.hpp"
#include "causaltext/rng.hpp"

namespace causaltext {

inline constexpr double kProbClamp = 1e-7;  // BCE log guard, loss evaluation only

enum class HeadType { linear, fcn };
enum class ArchKind { shared_backbone, two_backbone };

struct HeadConfig {
    HeadType type = HeadType::linear;
    std::vector<std::size_t> hidden = {64};  // used when type == fcn
};

struct LinearLayer {
    std::size_t in = 0, out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out

    void forward(std::span<const double> x, std::span<double> y) const {
        for (std::size_t o = 0; o < out; ++o) {
            double acc = b[o];
            const double* row = w.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
    }
};

struct Head {
    HeadType type = HeadType::linear;
    std::vector<LinearLayer> layers;  // last layer has out == 1
};

// Two scalar heads over frozen features, with an optional trainable linear
// adapter standing in for backbone unfreezing. In shared mode both heads read
// the adapter output; in two-backbone mode the Riesz side stays frozen and
// reads its features directly.
struct ModelParams {
    ArchKind arch = ArchKind::shared_backbone;
    bool adapter_enabled = false;
    std::size_t dim_sentiment = 0;
    std::size_t dim_riesz = 0;
    Head sentiment;
    Head riesz;
    LinearLayer adapter;  // dim_sentiment x dim_sentiment when enabled

    bool riesz_uses_adapter() const {
        return adapter_enabled && arch == ArchKind::shared_backbone;
    }
};

namespace detail {

inline LinearLayer make_layer(std::size_t in, std::size_t out, Rng* rng) {
    LinearLayer layer;
    layer.in = in;
    layer.out = out;
    layer.w.resize(in * out, 0.0);
    layer.b.resize(out, 0.0);
    if (rng != nullptr) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& v : layer.w) v = rng->next_double(-bound, bound);
    }
    return layer;
}

inline Head make_head(const HeadConfig& cfg, std::size_t dim, Rng& rng) {
    Head head;
    head.type = cfg.type;
    if (cfg.type == HeadType::linear) {
        head.layers.push_back(make_layer(dim, 1, &rng));
        return head;
    }
    if (cfg.hidden.empty()) {
        throw ConfigError("fcn head needs at least one hidden layer");
    }
    std::size_t in = dim;
    for (std::size_t h : cfg.hidden) {
        if (h == 0) throw ConfigError("hidden layer sizes must be positive");
        head.layers.push_back(make_layer(in, h, &rng));
        in = h;
    }
    head.layers.push_back(make_layer(in, 1, &rng));
    return head;
}

}  // namespace detail

// Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)) from the seeded generator,
// biases zero, adapter at identity. Draw order: sentiment head, then Riesz
// head; the adapter draws nothing.
inline ModelParams init_model(std::uint64_t seed, ArchKind arch, const HeadConfig& sentiment_cfg,
                              const HeadConfig& riesz_cfg, std::size_t dim_sentiment,
                              std::size_t dim_riesz, bool adapter_enabled) {
    if (dim_sentiment == 0 || dim_riesz == 0) {
        throw ConfigError("feature dimension must be >= 1");
    }
    Rng rng(seed);
    ModelParams params;
    params.arch = arch;
    params.adapter_enabled = adapter_enabled;
    params.dim_sentiment = dim_sentiment;
    params.dim_riesz = dim_riesz;
    params.sentiment = detail::make_head(sentiment_cfg, dim_sentiment, rng);
    params.riesz = detail::make_head(riesz_cfg, dim_riesz, rng);
    if (adapter_enabled) {
        if (arch == ArchKind::shared_backbone && dim_sentiment != dim_riesz) {
            throw ConfigError("shared backbone requires equal feature dims");
        }
        params.adapter = detail::make_layer(dim_sentiment, dim_sentiment, nullptr);
        for (std::size_t i = 0; i < dim_sentiment; ++i) {
            params.adapter.w[i * dim_sentiment + i] = 1.0;
        }
    }
    return params;
}

inline ModelParams init_model(std::uint64_t seed, ArchKind arch, const HeadConfig& sentiment_cfg,
                              const HeadConfig& riesz_cfg, std::size_t dim,
                              bool adapter_enabled) {
    return init_model(seed, arch, sentiment_cfg, riesz_cfg, dim, dim, adapter_enabled);
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double clamp_prob(double p) {
    if (p < kProbClamp) return kProbClamp;
    if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return p;
}

// Activations of one head evaluation, kept for backprop.
struct HeadTrace {
    std::vector<std::vector<double>> pre;   // per layer, before ReLU
    std::vector<std::vector<double>> post;  // per layer, after ReLU (last = pre)
    double output = 0.0;
};

inline double head_forward(const Head& head, std::span<const double> x, HeadTrace* trace) {
    std::vector<double> cur(x.begin(), x.end());
    if (trace != nullptr) {
        trace->pre.clear();
        trace->post.clear();
    }
    for (std::size_t l = 0; l < head.layers.size(); ++l) {
        const LinearLayer& layer = head.layers[l];
        std::vector<double> z(layer.out);
        layer.forward(cur, z);
        const bool last = l + 1 == head.layers.size();
        if (trace != nullptr) trace->pre.push_back(z);
        if (!last) {
            for (double& v : z) v = v > 0 ? v : 0.0;  // ReLU
        }
        if (trace != nullptr) trace->post.push_back(z);
        cur = std::move(z);
    }
    const double out = cur[0];
    if (trace != nullptr) trace->output = out;
    return out;
}

// Accumulates dL/dparams of one head evaluation into `grad` (same shape as
// `head`) given dL/doutput, and returns dL/dinput for the adapter chain.
inline std::vector<double> head_backward(const Head& head, std::span<const double> x,
                                         const HeadTrace& trace, double dout, Head& grad) {
    std::vector<double> delta{dout};  // dL/d(pre-activation) of current layer
    for (std::size_t l = head.layers.size(); l-- > 0;) {
        const LinearLayer& layer = head.layers[l];
        LinearLayer& glayer = grad.layers[l];
        const std::vector<double> input_vec =
            l == 0 ? std::vector<double>(x.begin(), x.end()) : trace.post[l - 1];
        for (std::size_t o = 0; o < layer.out; ++o) {
            glayer.b[o] += delta[o];
            double* grow = glayer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) {
                grow[i] += delta[o] * input_vec[i];
            }
        }
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* row = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) {
                prev[i] += delta[o] * row[i];
            }
        }
        if (l > 0) {
            // ReLU gate; subgradient 0 at exactly 0
            for (std::size_t i = 0; i < layer.in; ++i) {
                if (trace.pre[l - 1][i] <= 0) prev[i] = 0.0;
            }
        }
        delta = std::move(prev);
    }
    return delta;  // dL/dx
}

struct AdapterTrace {
    std::vector<double> output;
};

inline std::span<const double> adapter_forward(const ModelParams& params,
                                               std::span<const double> x, AdapterTrace& trace) {
    if (!params.adapter_enabled) return x;
    trace.output.resize(params.adapter.out);
    params.adapter.forward(x, trace.output);
    return trace.output;
}

// dL/dadapter params given dL/d(adapter output).
inline void adapter_backward(const ModelParams& params, std::span<const double> x,
                             std::span<const double> dout, LinearLayer& grad) {
    const LinearLayer& ad = params.adapter;
    for (std::size_t o = 0; o < ad.out; ++o) {
        grad.b[o] += dout[o];
        double* grow = grad.w.data() + o * ad.in;
        for (std::size_t i = 0; i < ad.in; ++i) {
            grow[i] += dout[o] * x[i];
        }
    }
}

inline double sentiment_logit(const ModelParams& params, std::span<const double> features) {
    AdapterTrace trace;
    const std::span<const double> z =
        params.adapter_enabled ? adapter_forward(params, features, trace) : features;
    return head_forward(params.sentiment, z, nullptr);
}

// g(Z) in (0,1); unclamped, the clamp applies in loss evaluation only.
inline double forward_sentiment(const ModelParams& params, std::span<const double> features) {
    return sigmoid(sentiment_logit(params, features));
}

// alpha(Z), unbounded.
inline double forward_riesz(const ModelParams& params, std::span<const double> features) {
    if (params.riesz_uses_adapter()) {
        AdapterTrace trace;
        const std::span<const double> z = adapter_forward(params, features, trace);
        return head_forward(params.riesz, z, nullptr);
    }
    return head_forward(params.riesz, features, nullptr);
}

// --- parameter traversal -------------------------------------------------

enum class ParamGroup { sentiment, riesz, adapter };

// Calls fn(group, tensor) over every trainable tensor, in a fixed order.
template <typename Params, typename Fn>
void for_each_tensor(Params& params, Fn&& fn) {
    for (auto& layer : params.sentiment.layers) {
        fn(ParamGroup::sentiment, layer.w);
        fn(ParamGroup::sentiment, layer.b);
    }
    for (auto& layer : params.riesz.layers) {
        fn(ParamGroup::riesz, layer.w);
        fn(ParamGroup::riesz, layer.b);
    }
    if (params.adapter_enabled) {
        fn(ParamGroup::adapter, params.adapter.w);
        fn(ParamGroup::adapter, params.adapter.b);
    }
}

inline ModelParams zeros_like(const ModelParams& params) {
    ModelParams z = params;
    for_each_tensor(z, [](ParamGroup, std::vector<double>& t) {
        std::fill(t.begin(), t.end(), 0.0);
    });
    return z;
}

inline bool all_finite(const ModelParams& params) {
    bool ok = true;
    for_each_tensor(const_cast<ModelParams&>(params),
                    [&](ParamGroup, std::vector<double>& t) {
                        for (double v : t) {
                            if (!std::isfinite(v)) ok = false;
                        }
                    });
    return ok;
}

}  // namespace causaltext
