#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "causaltext/corpus.hpp"
#include "causaltext/rng.hpp"

namespace causaltext {

// Seeded review-like corpus for demos and offline tests. Sentiment-bearing
// words carry the label signal (with noise, so classifiers top out well below
// 1.0), and the "love" family appears more often in positive reviews with a
// raw association of roughly +0.19 that is partly spurious by construction.
namespace demo {

inline const std::vector<std::string>& neutral_words() {
    static const std::vector<std::string> words = {
        "the",      "a",        "of",       "and",      "to",       "in",
        "movie",    "film",     "scene",    "plot",     "story",    "actor",
        "actress",  "director", "script",   "dialogue", "camera",   "screen",
        "series",   "sequel",   "character", "ending",  "beginning", "middle",
        "music",    "score",    "effects",  "budget",   "studio",   "cast",
        "crew",     "minutes",  "hours",    "night",    "watch",    "watched",
        "seen",     "saw",      "time",     "year",     "first",    "second",
        "people",   "audience", "theater",  "ticket",   "review",   "critic",
        "book",     "novel",    "version",  "original", "remake",   "genre",
        "drama",    "comedy",   "thriller", "action",   "romance",  "horror",
        "western",  "animation", "documentary", "narrator", "voice", "sound",
        "picture",  "frame",    "shot",     "cut",      "pace",     "tone",
        "idea",     "theme",    "moment",   "part",     "role",     "lead",
        "support",  "line",     "word",     "tale",     "world",    "city",
        "house",    "family",   "friend",   "father",   "mother",   "brother",
        "sister",   "kid",      "man",      "woman",    "girl",     "boy",
        "dog",      "car",      "train",    "war",      "history",  "america",
        "england",  "france",   "japan",    "summer",   "winter",   "again",
        "really",   "quite",    "very",     "almost",   "perhaps",  "maybe",
        "because",  "though",   "however",  "still",    "rather",   "about",
    };
    return words;
}

inline const std::vector<std::string>& positive_words() {
    static const std::vector<std::string> words = {
        "great",     "excellent", "wonderful", "brilliant", "superb",
        "fantastic", "amazing",   "masterpiece", "perfect", "charming",
        "delightful", "gripping", "moving",    "stunning",  "memorable",
        "hilarious", "clever",    "fresh",     "beautiful", "best",
    };
    return words;
}

inline const std::vector<std::string>& negative_words() {
    static const std::vector<std::string> words = {
        "terrible", "awful",    "boring",  "dull",      "weak",
        "mess",     "worst",    "stupid",  "pointless", "annoying",
        "lazy",     "cheap",    "flat",    "predictable", "tedious",
        "clumsy",   "painful",  "forgettable", "bland", "disappointing",
    };
    return words;
}

inline const std::vector<std::string>& love_words() {
    static const std::vector<std::string> words = {
        "love", "loved", "loves", "loving", "lovely", "beloved",
    };
    return words;
}

}  // namespace demo

struct DemoCorpusConfig {
    std::size_t docs = 2000;
    std::uint64_t seed = 13;
    std::size_t max_seq_len = 150;
    std::size_t min_tokens = 60;
    std::size_t max_tokens = 140;
    double p_love_given_positive = 0.30;
    double p_love_given_negative = 0.165;
    double sentiment_noise = 0.15;  // chance an injected cue comes from the wrong pool
    std::string id_prefix = "demo-";
};

inline std::vector<Document> generate_demo_docs(const DemoCorpusConfig& cfg) {
    Rng rng(cfg.seed);
    const auto& neutral = demo::neutral_words();
    const auto& pos = demo::positive_words();
    const auto& neg = demo::negative_words();
    const auto& love = demo::love_words();

    std::vector<Document> docs;
    docs.reserve(cfg.docs);
    for (std::size_t k = 0; k < cfg.docs; ++k) {
        const int y = rng.next_bool(0.5) ? 1 : 0;
        const std::size_t len =
            cfg.min_tokens + static_cast<std::size_t>(rng.next_below(
                                 cfg.max_tokens - cfg.min_tokens + 1));
        std::vector<std::string> tokens(len);
        for (auto& tok : tokens) {
            // squared uniform skews mass toward the head of the vocabulary
            const double u = rng.next_double();
            const auto idx = static_cast<std::size_t>(u * u * static_cast<double>(neutral.size()));
            tok = neutral[std::min(idx, neutral.size() - 1)];
        }
        const std::size_t cues = 2 + rng.next_below(5);
        for (std::size_t c = 0; c < cues; ++c) {
            const bool flip = rng.next_bool(cfg.sentiment_noise);
            const bool use_pos = (y == 1) != flip;
            const auto& pool = use_pos ? pos : neg;
            tokens[rng.next_below(len)] = pool[rng.next_below(pool.size())];
        }
        const double p_love = y == 1 ? cfg.p_love_given_positive : cfg.p_love_given_negative;
        if (rng.next_bool(p_love)) {
            tokens[rng.next_below(len)] = love[rng.next_below(love.size())];
        }
        Document doc;
        doc.id = cfg.id_prefix + std::to_string(k);
        doc.label = y;
        std::string text;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i > 0) text += ' ';
            text += tokens[i];
        }
        doc.text = std::move(text);
        doc.tokens = tokenize(doc.text, cfg.max_seq_len);
        docs.push_back(std::move(doc));
    }
    return docs;
}

}  // namespace causaltext
