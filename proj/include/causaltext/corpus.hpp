#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "causaltext/errors.hpp"
#include "causaltext/rng.hpp"

namespace causaltext {

using TokenList = std::vector<std::string>;

// One labeled text. `treated` is always derived from the tokens; code that
// rewrites tokens must call refresh_treated afterwards.
struct Document {
    std::string id;
    std::string text;
    TokenList tokens;
    int label = 0;       // in {0,1}
    bool treated = false;
};

struct CounterfactualPair {
    TokenList treated_tokens;  // phrase guaranteed present
    TokenList control_tokens;  // every phrase occurrence masked
};

struct DatasetSplit {
    std::vector<Document> train;
    std::vector<Document> validation;
    std::vector<Document> test;
    std::uint64_t seed = 0;
    std::vector<double> fractions;
};

namespace detail {

inline bool is_unicode_space(char32_t c) {
    switch (c) {
        case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
        case U' ': case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

inline bool is_ascii_punct(char c) {
    const unsigned char u = static_cast<unsigned char>(c);
    return (u >= '!' && u <= '/') || (u >= ':' && u <= '@') ||
           (u >= '[' && u <= '`') || (u >= '{' && u <= '~');
}

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// Decodes one UTF-8 code point starting at `i`; on malformed input the single
// byte is returned as-is so tokenization never fails.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if ((b0 & 0x80u) == 0) {
        len = 1;
    } else if ((b0 & 0xE0u) == 0xC0u) {
        len = 2;
        cp = b0 & 0x1Fu;
    } else if ((b0 & 0xF0u) == 0xE0u) {
        len = 3;
        cp = b0 & 0x0Fu;
    } else if ((b0 & 0xF8u) == 0xF0u) {
        len = 4;
        cp = b0 & 0x07u;
    } else {
        ++i;
        return b0;
    }
    if (i + len > s.size()) {
        ++i;
        return b0;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const unsigned char bk = static_cast<unsigned char>(s[i + k]);
        if ((bk & 0xC0u) != 0x80u) {
            ++i;
            return b0;
        }
        cp = (cp << 6) | (bk & 0x3Fu);
    }
    i += len;
    return cp;
}

}  // namespace detail

// Lowercases (ASCII), splits on Unicode whitespace, strips leading/trailing
// ASCII punctuation from each token, drops empty tokens, truncates to the
// first max_seq_len tokens. Empty text gives an empty list.
inline TokenList tokenize(std::string_view text, std::size_t max_seq_len) {
    TokenList out;
    std::string cur;
    std::size_t i = 0;
    auto flush = [&] {
        std::size_t b = 0;
        std::size_t e = cur.size();
        while (b < e && detail::is_ascii_punct(cur[b])) ++b;
        while (e > b && detail::is_ascii_punct(cur[e - 1])) --e;
        if (e > b && out.size() < max_seq_len) {
            out.emplace_back(cur.substr(b, e - b));
        }
        cur.clear();
    };
    while (i < text.size() && out.size() < max_seq_len) {
        const std::size_t start = i;
        const char32_t cp = detail::decode_utf8(text, i);
        if (detail::is_unicode_space(cp)) {
            flush();
        } else {
            for (std::size_t k = start; k < i; ++k) {
                cur.push_back(detail::ascii_lower(text[k]));
            }
        }
    }
    flush();
    return out;
}

// True iff any token contains `phrase` as a case-insensitive substring, so
// "beloved" and "loved" both count as occurrences of "love".
inline bool contains_phrase(const TokenList& tokens, std::string_view phrase) {
    auto lower_contains = [&](const std::string& tok) {
        if (tok.size() < phrase.size()) return false;
        for (std::size_t i = 0; i + phrase.size() <= tok.size(); ++i) {
            std::size_t k = 0;
            while (k < phrase.size() &&
                   detail::ascii_lower(tok[i + k]) == detail::ascii_lower(phrase[k])) {
                ++k;
            }
            if (k == phrase.size()) return true;
        }
        return false;
    };
    return std::any_of(tokens.begin(), tokens.end(), lower_contains);
}

inline bool token_matches_phrase(const std::string& token, std::string_view phrase) {
    return contains_phrase(TokenList{token}, phrase);
}

inline void refresh_treated(Document& doc, std::string_view phrase) {
    doc.treated = contains_phrase(doc.tokens, phrase);
}

// Treated variant: tokens as-is when the phrase is present, otherwise the
// phrase prepended (then re-truncated). Control variant: every
// phrase-containing token replaced with mask_token.
inline CounterfactualPair make_counterfactual_pair(const Document& doc,
                                                   std::string_view phrase,
                                                   const std::string& mask_token,
                                                   std::size_t max_seq_len) {
    CounterfactualPair pair;
    if (contains_phrase(doc.tokens, phrase)) {
        pair.treated_tokens = doc.tokens;
    } else {
        pair.treated_tokens.reserve(doc.tokens.size() + 1);
        pair.treated_tokens.emplace_back(phrase);
        pair.treated_tokens.insert(pair.treated_tokens.end(), doc.tokens.begin(),
                                   doc.tokens.end());
        if (pair.treated_tokens.size() > max_seq_len) {
            pair.treated_tokens.resize(max_seq_len);
        }
    }
    pair.control_tokens = doc.tokens;
    for (auto& tok : pair.control_tokens) {
        if (token_matches_phrase(tok, phrase)) {
            tok = mask_token;
        }
    }
    return pair;
}

// mean(Y | treated) - mean(Y | untreated) over the documents' current
// treated flags.
inline double raw_association(const std::vector<Document>& docs, std::string_view phrase) {
    double sum_t = 0, sum_u = 0;
    std::size_t n_t = 0, n_u = 0;
    for (const auto& doc : docs) {
        if (contains_phrase(doc.tokens, phrase)) {
            sum_t += doc.label;
            ++n_t;
        } else {
            sum_u += doc.label;
            ++n_u;
        }
    }
    if (n_t == 0 || n_u == 0) {
        throw DegenerateGroups("raw_association needs at least one treated and one untreated document");
    }
    return sum_t / static_cast<double>(n_t) - sum_u / static_cast<double>(n_u);
}

struct JsonlOptions {
    std::string text_field = "text";
    std::string label_field = "label";
    std::optional<double> binarize_threshold;
    std::size_t max_seq_len = 150;
    std::string id_prefix;  // prepended to generated ids to keep files disjoint
};

// One JSON object per line. Real-valued labels are binarized as
// label > threshold when a threshold is supplied; otherwise labels must
// already be 0/1.
inline std::vector<Document> load_jsonl(const std::string& path, const JsonlOptions& opts) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open dataset file: " + path);
    }
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!rec.contains(opts.text_field)) {
            throw ParseError("missing text field '" + opts.text_field + "'", line_no);
        }
        if (!rec.contains(opts.label_field)) {
            throw ParseError("missing label field '" + opts.label_field + "'", line_no);
        }
        if (!rec[opts.text_field].is_string()) {
            throw ParseError("text field '" + opts.text_field + "' is not a string", line_no);
        }
        Document doc;
        doc.text = rec[opts.text_field].get<std::string>();
        const auto& label = rec[opts.label_field];
        if (label.is_boolean()) {
            doc.label = label.get<bool>() ? 1 : 0;
        } else if (label.is_number()) {
            const double v = label.get<double>();
            if (opts.binarize_threshold) {
                doc.label = v > *opts.binarize_threshold ? 1 : 0;
            } else if (v == 0.0 || v == 1.0) {
                doc.label = static_cast<int>(v);
            } else {
                throw LabelError("label " + std::to_string(v) + " outside {0,1} at line " +
                                 std::to_string(line_no) + "; pass a binarize threshold");
            }
        } else {
            throw ParseError("label field '" + opts.label_field + "' is not numeric", line_no);
        }
        doc.id = rec.contains("id") && rec["id"].is_string()
                     ? rec["id"].get<std::string>()
                     : opts.id_prefix + std::to_string(line_no);
        doc.tokens = tokenize(doc.text, opts.max_seq_len);
        docs.push_back(std::move(doc));
    }
    return docs;
}

// Deterministic shuffle by seed, then contiguous slices sized by cumulative
// rounded fractions. Two fractions give train/validation; a third gives test.
inline DatasetSplit split(std::vector<Document> docs, const std::vector<double>& fractions,
                          std::uint64_t seed) {
    if (fractions.empty() || fractions.size() > 3) {
        throw ConfigError("split takes 1..3 fractions");
    }
    double total = 0;
    for (double f : fractions) {
        if (f <= 0) throw ConfigError("split fractions must be positive");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1");
    }
    Rng rng(seed);
    rng.shuffle(docs);
    const std::size_t n = docs.size();
    std::vector<std::size_t> bounds;
    double cum = 0;
    for (double f : fractions) {
        cum += f;
        bounds.push_back(static_cast<std::size_t>(std::llround(cum * static_cast<double>(n))));
    }
    bounds.back() = n;
    DatasetSplit out;
    out.seed = seed;
    out.fractions = fractions;
    out.train.assign(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(bounds[0]));
    if (fractions.size() >= 2) {
        out.validation.assign(docs.begin() + static_cast<std::ptrdiff_t>(bounds[0]),
                              docs.begin() + static_cast<std::ptrdiff_t>(bounds[1]));
    }
    if (fractions.size() == 3) {
        out.test.assign(docs.begin() + static_cast<std::ptrdiff_t>(bounds[1]),
                        docs.begin() + static_cast<std::ptrdiff_t>(bounds[2]));
    }
    return out;
}

}  // namespace causaltext
