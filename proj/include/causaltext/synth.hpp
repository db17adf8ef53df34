#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "causaltext/corpus.hpp"
#include "causaltext/errors.hpp"
#include "causaltext/rng.hpp"

namespace causaltext {

inline constexpr const char* kMaskToken = "[MASK]";

enum class AppendPosition { front, back };

struct SynthConfig {
    std::string phrase;
    double proportion_treated = 0.5;   // in (0,1)
    double target_ate = 0.0;           // in [-1,1]
    AppendPosition append_position = AppendPosition::front;
    std::uint64_t seed = 0;
    bool exact = true;                 // flip chosen indices instead of Bernoulli flipping
    std::size_t max_seq_len = 0;       // 0 = keep current lengths
    // Keeping natural occurrences as treatment would leave the treatment
    // correlated with the surrounding text; only mask-and-prepend is valid.
    bool keep_natural_occurrences = false;
};

// How many labels to flip in each group, and in which direction.
struct FlipPlan {
    std::size_t k1 = 0;          // flips in the treated group
    std::size_t k0 = 0;          // flips in the untreated group
    int treated_flip_from = 0;   // treated labels flip from this value
    int untreated_flip_from = 1; // untreated labels flip from this value
    double delta_tau = 0.0;
    double achieved_delta = 0.0; // signed ATE change the plan realizes
};

// Solves k1/n_T + k0/n_U = |delta_tau| over the availability box. Among
// residual-minimal pairs prefers fewest total flips, then the most balanced
// split across groups, then smallest k1.
inline FlipPlan flip_counts(double initial_ate, double target_ate, std::size_t n_T,
                            std::size_t n_U, std::size_t available_treated,
                            std::size_t available_untreated) {
    if (n_T == 0 || n_U == 0) {
        throw DegenerateGroups("flip_counts needs nonempty treated and untreated groups");
    }
    FlipPlan plan;
    plan.delta_tau = target_ate - initial_ate;
    const bool raise = plan.delta_tau >= 0;
    plan.treated_flip_from = raise ? 0 : 1;
    plan.untreated_flip_from = raise ? 1 : 0;
    const double mag = std::abs(plan.delta_tau);
    const double nT = static_cast<double>(n_T);
    const double nU = static_cast<double>(n_U);

    const double max_achievable =
        static_cast<double>(available_treated) / nT + static_cast<double>(available_untreated) / nU;
    if (mag > max_achievable + 1e-12) {
        throw InfeasibleTarget(
            "target ATE change of " + std::to_string(plan.delta_tau) +
                " exceeds the achievable " + std::to_string(max_achievable) +
                " given the flippable labels",
            raise ? max_achievable : -max_achievable);
    }

    double best_residual = std::numeric_limits<double>::infinity();
    std::size_t best_total = 0;
    double best_balance = 0;
    bool have_best = false;
    auto consider = [&](std::size_t k1, std::size_t k0) {
        const double step = static_cast<double>(k1) / nT + static_cast<double>(k0) / nU;
        const double residual = std::abs(step - mag);
        const std::size_t total = k1 + k0;
        const double balance =
            std::abs(static_cast<double>(k1) / nT - static_cast<double>(k0) / nU);
        const double eps = 1e-12;
        bool better = false;
        if (!have_best || residual < best_residual - eps) {
            better = true;
        } else if (residual < best_residual + eps) {
            if (total < best_total) {
                better = true;
            } else if (total == best_total) {
                if (balance < best_balance - eps) {
                    better = true;
                } else if (balance < best_balance + eps && k1 < plan.k1) {
                    better = true;
                }
            }
        }
        if (better) {
            have_best = true;
            best_residual = residual;
            best_total = total;
            best_balance = balance;
            plan.k1 = k1;
            plan.k0 = k0;
        }
    };
    for (std::size_t k1 = 0; k1 <= available_treated; ++k1) {
        const double rem = mag - static_cast<double>(k1) / nT;
        if (rem < -1.0 / nT) break;
        const double ideal = rem * nU;
        const long lo = static_cast<long>(std::floor(ideal));
        for (long c = lo - 1; c <= lo + 2; ++c) {
            if (c < 0 || c > static_cast<long>(available_untreated)) continue;
            consider(k1, static_cast<std::size_t>(c));
        }
        consider(k1, 0);
        consider(k1, available_untreated);
    }
    const double signed_step =
        static_cast<double>(plan.k1) / nT + static_cast<double>(plan.k0) / nU;
    plan.achieved_delta = raise ? signed_step : -signed_step;
    return plan;
}

struct SynthResult {
    std::vector<Document> docs;
    double achieved_ate = 0.0;
    double initial_ate = 0.0;
    FlipPlan plan;
    std::size_t n_treated = 0;
    std::size_t n_untreated = 0;
};

namespace detail {

inline void add_phrase(TokenList& tokens, const std::string& phrase, AppendPosition pos,
                       std::size_t max_seq_len) {
    if (pos == AppendPosition::front) {
        tokens.insert(tokens.begin(), phrase);
        if (max_seq_len > 0 && tokens.size() > max_seq_len) {
            tokens.resize(max_seq_len);
        }
    } else {
        // dropping the last token first keeps the phrase inside the limit
        if (max_seq_len > 0 && tokens.size() >= max_seq_len) {
            tokens.resize(max_seq_len - 1);
        }
        tokens.push_back(phrase);
    }
}

inline double group_mean(const std::vector<Document>& docs, const std::vector<char>& treated,
                         char want) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (treated[i] == want) {
            sum += docs[i].label;
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

}  // namespace detail

// Appendix-style semi-synthetic generation: assign treatment by a seeded
// shuffle (independent of text), force phrase presence/absence to match, and
// flip labels until the difference in group means meets the target.
inline SynthResult synthesize(std::vector<Document> docs, const SynthConfig& config) {
    if (docs.size() < 4) {
        throw ConfigError("synthesize needs at least 4 documents");
    }
    if (!(config.proportion_treated > 0.0 && config.proportion_treated < 1.0)) {
        throw ConfigError("proportion_treated must be in (0,1)");
    }
    if (std::abs(config.target_ate) > 1.0) {
        throw ConfigError("target ATE must be in [-1,1]");
    }
    if (config.phrase.empty()) {
        throw ConfigError("treatment phrase must be nonempty");
    }
    if (config.keep_natural_occurrences) {
        throw ConfigError(
            "keeping natural treatment occurrences is unsupported: the treatment would stay "
            "correlated with the surrounding text, so flipping labels to a target "
            "difference-in-means would not produce that causal effect; use the default "
            "mask-and-prepend mode");
    }
    if (token_matches_phrase(kMaskToken, config.phrase)) {
        throw ConfigError("mask token contains the treatment phrase; pick another phrase");
    }

    const std::size_t n = docs.size();
    const std::size_t n_treat =
        static_cast<std::size_t>(std::llround(config.proportion_treated * static_cast<double>(n)));
    if (n_treat == 0 || n_treat == n) {
        throw DegenerateGroups("proportion_treated leaves a treatment group empty");
    }

    Rng rng(config.seed);
    std::vector<std::size_t> order = shuffled_indices(n, rng);
    std::vector<char> treat(n, 0);
    for (std::size_t i = 0; i < n_treat; ++i) treat[order[i]] = 1;

    for (std::size_t i = 0; i < n; ++i) {
        Document& doc = docs[i];
        if (treat[i]) {
            if (!contains_phrase(doc.tokens, config.phrase)) {
                detail::add_phrase(doc.tokens, config.phrase, config.append_position,
                                   config.max_seq_len);
            }
        } else {
            for (auto& tok : doc.tokens) {
                if (token_matches_phrase(tok, config.phrase)) {
                    tok = kMaskToken;
                }
            }
        }
        refresh_treated(doc, config.phrase);
    }

    SynthResult result;
    result.n_treated = n_treat;
    result.n_untreated = n - n_treat;
    result.initial_ate =
        detail::group_mean(docs, treat, 1) - detail::group_mean(docs, treat, 0);

    std::vector<std::size_t> cand_treated, cand_untreated;
    const bool raise = config.target_ate >= result.initial_ate;
    const int treated_from = raise ? 0 : 1;
    const int untreated_from = raise ? 1 : 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (treat[i] && docs[i].label == treated_from) cand_treated.push_back(i);
        if (!treat[i] && docs[i].label == untreated_from) cand_untreated.push_back(i);
    }
    result.plan = flip_counts(result.initial_ate, config.target_ate, n_treat, n - n_treat,
                              cand_treated.size(), cand_untreated.size());

    if (config.exact) {
        rng.shuffle(cand_treated);
        rng.shuffle(cand_untreated);
        for (std::size_t i = 0; i < result.plan.k1; ++i) {
            docs[cand_treated[i]].label = 1 - treated_from;
        }
        for (std::size_t i = 0; i < result.plan.k0; ++i) {
            docs[cand_untreated[i]].label = 1 - untreated_from;
        }
    } else {
        const double p1 = cand_treated.empty()
                              ? 0.0
                              : static_cast<double>(result.plan.k1) / cand_treated.size();
        const double p0 = cand_untreated.empty()
                              ? 0.0
                              : static_cast<double>(result.plan.k0) / cand_untreated.size();
        for (std::size_t i : cand_treated) {
            if (rng.next_bool(p1)) docs[i].label = 1 - treated_from;
        }
        for (std::size_t i : cand_untreated) {
            if (rng.next_bool(p0)) docs[i].label = 1 - untreated_from;
        }
    }

    result.achieved_ate =
        detail::group_mean(docs, treat, 1) - detail::group_mean(docs, treat, 0);
    result.docs = std::move(docs);
    return result;
}

}  // namespace causaltext
