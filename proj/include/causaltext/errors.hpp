#pragma once

#include <stdexcept>
#include <string>

namespace causaltext {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file; message carries the line number.
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};

// Label outside {0,1} with no binarize threshold configured.
struct LabelError : Error {
    using Error::Error;
};

// A computation that needs both treatment groups found one empty.
struct DegenerateGroups : Error {
    using Error::Error;
};

// Requested synthetic ATE cannot be realized with the available labels.
struct InfeasibleTarget : Error {
    InfeasibleTarget(const std::string& what, double max_achievable_delta)
        : Error(what), max_achievable(max_achievable_delta) {}
    double max_achievable;
};

// Embedding file lacks a required (doc id, variant) row.
struct MissingEmbedding : Error {
    MissingEmbedding(const std::string& doc_id, const std::string& variant)
        : Error("missing embedding for doc '" + doc_id + "' variant '" + variant + "'") {}
};

// A parameter or loss became non-finite during training.
struct NumericalDivergence : Error {
    using Error::Error;
};

// Estimator scope selected no documents.
struct EmptyScope : Error {
    using Error::Error;
};

// Ensemble over reports with differing scopes (or no reports at all).
struct MixedScope : Error {
    using Error::Error;
};

// Config value that is syntactically valid but unsupported or inconsistent.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace causaltext
