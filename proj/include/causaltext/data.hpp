#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "causaltext/corpus.hpp"
#include "causaltext/errors.hpp"
#include "causaltext/features.hpp"

namespace causaltext {

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

// Either the hashing featurizer or a table of precomputed embeddings.
struct FeaturizerSpec {
    enum class Kind { hashing, embedding_file } kind = Kind::hashing;
    HashingFeaturizer hashing;
    std::shared_ptr<EmbeddingTable> table;

    std::size_t dim() const {
        return kind == Kind::hashing ? hashing.dim : table->dim();
    }

    FeatureVector features(const Document& doc, const CounterfactualPair& pair,
                           CfVariant variant) const {
        if (kind == Kind::embedding_file) {
            return table->lookup(doc.id, variant);
        }
        switch (variant) {
            case CfVariant::factual: return hashing.featurize(doc.tokens);
            case CfVariant::cf_treated: return hashing.featurize(pair.treated_tokens);
            case CfVariant::cf_control: return hashing.featurize(pair.control_tokens);
        }
        return {};
    }
};

// All model inputs for one split: factual plus both counterfactual feature
// matrices, for the sentiment source and (two-backbone only) the Riesz
// source.
struct FeaturizedDataset {
    Matrix sent_fact, sent_cft, sent_cfc;
    Matrix rz_fact_own, rz_cft_own, rz_cfc_own;
    bool two_backbone = false;
    std::vector<int> labels;
    std::vector<char> treated;
    std::vector<std::string> ids;

    std::size_t size() const { return labels.size(); }
    const Matrix& rz_fact() const { return two_backbone ? rz_fact_own : sent_fact; }
    const Matrix& rz_cft() const { return two_backbone ? rz_cft_own : sent_cft; }
    const Matrix& rz_cfc() const { return two_backbone ? rz_cfc_own : sent_cfc; }
};

inline FeaturizedDataset build_featurized(const std::vector<Document>& docs,
                                          std::string_view phrase, std::size_t max_seq_len,
                                          const FeaturizerSpec& sentiment_source,
                                          const FeaturizerSpec* riesz_source = nullptr) {
    FeaturizedDataset out;
    const std::size_t n = docs.size();
    const std::size_t ds = sentiment_source.dim();
    out.sent_fact = Matrix(n, ds);
    out.sent_cft = Matrix(n, ds);
    out.sent_cfc = Matrix(n, ds);
    out.two_backbone = riesz_source != nullptr;
    if (out.two_backbone) {
        const std::size_t dr = riesz_source->dim();
        out.rz_fact_own = Matrix(n, dr);
        out.rz_cft_own = Matrix(n, dr);
        out.rz_cfc_own = Matrix(n, dr);
    }
    out.labels.resize(n);
    out.treated.resize(n);
    out.ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Document& doc = docs[i];
        const CounterfactualPair pair =
            make_counterfactual_pair(doc, phrase, kMaskToken, max_seq_len);
        auto fill = [&](Matrix& m, const FeaturizerSpec& src, CfVariant v) {
            const FeatureVector vec = src.features(doc, pair, v);
            std::copy(vec.begin(), vec.end(), m.row(i).begin());
        };
        fill(out.sent_fact, sentiment_source, CfVariant::factual);
        fill(out.sent_cft, sentiment_source, CfVariant::cf_treated);
        fill(out.sent_cfc, sentiment_source, CfVariant::cf_control);
        if (out.two_backbone) {
            fill(out.rz_fact_own, *riesz_source, CfVariant::factual);
            fill(out.rz_cft_own, *riesz_source, CfVariant::cf_treated);
            fill(out.rz_cfc_own, *riesz_source, CfVariant::cf_control);
        }
        out.labels[i] = doc.label;
        out.treated[i] = doc.treated ? 1 : 0;
        out.ids[i] = doc.id;
    }
    return out;
}

}  // namespace causaltext
