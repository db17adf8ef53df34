#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "causaltext/corpus.hpp"
#include "causaltext/errors.hpp"

namespace causaltext {

using FeatureVector = std::vector<double>;

enum class CfVariant { factual, cf_treated, cf_control };

inline const char* to_string(CfVariant v) {
    switch (v) {
        case CfVariant::factual: return "factual";
        case CfVariant::cf_treated: return "cf_treated";
        case CfVariant::cf_control: return "cf_control";
    }
    return "?";
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Frozen stand-in for a pooled text-encoder backbone: signed feature hashing
// with mean pooling. Pure function of the token bytes, so features are
// bit-identical across platforms.
struct HashingFeaturizer {
    std::size_t dim = 256;
    std::uint64_t hash_seed = 0;
    bool l2_normalize = true;

    FeatureVector featurize(const TokenList& tokens) const {
        FeatureVector v(dim, 0.0);
        for (const auto& tok : tokens) {
            const std::uint64_t h = fnv1a64(tok) ^ hash_seed;
            const std::size_t bucket = static_cast<std::size_t>(h % dim);
            v[bucket] += (h >> 63) == 0 ? 1.0 : -1.0;
        }
        const double denom = static_cast<double>(std::max<std::size_t>(1, tokens.size()));
        for (double& x : v) x /= denom;
        if (l2_normalize) {
            double norm2 = 0;
            for (double x : v) norm2 += x * x;
            if (norm2 > 0) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (double& x : v) x *= inv;
            }
        }
        return v;
    }
};

inline FeatureVector featurize(const HashingFeaturizer& f, const TokenList& tokens) {
    return f.featurize(tokens);
}

// Precomputed embeddings keyed by (doc id, variant). Counterfactual variants
// are mandatory per doc at lookup time because the Riesz loss evaluates both.
class EmbeddingTable {
public:
    EmbeddingTable() = default;

    static EmbeddingTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open embedding file: " + path);
        EmbeddingTable table;
        std::string line;
        std::size_t line_no = 0;
        if (!std::getline(in, line)) throw ParseError("empty embedding file", 0);
        ++line_no;
        if (line.rfind("dim=", 0) != 0) {
            throw ParseError("embedding file must start with 'dim=<d>'", line_no);
        }
        try {
            table.dim_ = std::stoul(line.substr(4));
        } catch (const std::exception&) {
            throw ParseError("bad dimension header", line_no);
        }
        if (table.dim_ == 0) throw ParseError("embedding dimension must be >= 1", line_no);
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const std::size_t tab1 = line.find('\t');
            const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                               : line.find('\t', tab1 + 1);
            if (tab2 == std::string::npos) {
                throw ParseError("expected <id>\\t<variant>\\t<values>", line_no);
            }
            const std::string id = line.substr(0, tab1);
            const std::string variant = line.substr(tab1 + 1, tab2 - tab1 - 1);
            if (variant != "factual" && variant != "cf_treated" && variant != "cf_control") {
                throw ParseError("unknown variant '" + variant + "'", line_no);
            }
            FeatureVector vec;
            vec.reserve(table.dim_);
            std::stringstream ss(line.substr(tab2 + 1));
            std::string cell;
            while (std::getline(ss, cell, ',')) {
                try {
                    vec.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    throw ParseError("bad value '" + cell + "'", line_no);
                }
            }
            if (vec.size() != table.dim_) {
                throw ParseError("row has " + std::to_string(vec.size()) +
                                     " values, expected " + std::to_string(table.dim_),
                                 line_no);
            }
            table.rows_[key(id, variant)] = std::move(vec);
        }
        return table;
    }

    std::size_t dim() const { return dim_; }

    const FeatureVector& lookup(const std::string& doc_id, CfVariant variant) const {
        const auto it = rows_.find(key(doc_id, to_string(variant)));
        if (it == rows_.end()) {
            throw MissingEmbedding(doc_id, to_string(variant));
        }
        return it->second;
    }

    bool contains(const std::string& doc_id, CfVariant variant) const {
        return rows_.count(key(doc_id, to_string(variant))) > 0;
    }

private:
    static std::string key(const std::string& id, std::string_view variant) {
        return id + "\x1f" + std::string(variant);
    }

    std::size_t dim_ = 0;
    std::unordered_map<std::string, FeatureVector> rows_;
};

inline const FeatureVector& lookup_embedding(const EmbeddingTable& table,
                                             const std::string& doc_id, CfVariant variant) {
    return table.lookup(doc_id, variant);
}

// The treatment phrase and the mask token must land in distinguishable
// buckets, otherwise counterfactual pairs would featurize identically.
inline void verify_phrase_separation(const HashingFeaturizer& f, std::string_view phrase,
                                     const std::string& mask_token) {
    const FeatureVector a = f.featurize(TokenList{std::string(phrase)});
    const FeatureVector b = f.featurize(TokenList{mask_token});
    if (a == b) {
        throw ConfigError("treatment phrase and mask token collide in the hashing featurizer; "
                          "change hash_seed or dim");
    }
}

}  // namespace causaltext
