#pragma once

#include <span>

#include "causaltext/errors.hpp"

namespace causaltext {

struct ClassificationMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;  // positive class = 1; zero when precision+recall is zero
};

inline ClassificationMetrics classification_metrics(std::span<const double> probs,
                                                    std::span<const int> labels,
                                                    double threshold = 0.5) {
    if (probs.size() != labels.size()) {
        throw ConfigError("classification_metrics: probs and labels differ in length");
    }
    std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const int pred = probs[i] > threshold ? 1 : 0;
        correct += pred == labels[i];
        tp += pred == 1 && labels[i] == 1;
        fp += pred == 1 && labels[i] == 0;
        fn += pred == 0 && labels[i] == 1;
    }
    ClassificationMetrics m;
    m.accuracy =
        probs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(probs.size());
    const double denom = static_cast<double>(2 * tp + fp + fn);
    m.f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
    return m;
}

}  // namespace causaltext
