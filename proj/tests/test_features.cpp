#include "causaltext/features.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "causaltext/rng.hpp"

using namespace causaltext;

namespace {

// Reference FNV-1a, written independently of the library implementation and
// checked against published test vectors below.
std::uint64_t reference_fnv1a(const std::string& s) {
    const std::uint64_t prime = 1099511628211ULL;          // 2^40 + 2^8 + 0xb3
    std::uint64_t h = 14695981039346656037ULL;             // offset basis
    return std::accumulate(s.begin(), s.end(), h, [&](std::uint64_t acc, char c) {
        return (acc ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c))) * prime;
    });
}

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

double l2_norm(const FeatureVector& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST(Fnv1a, MatchesPublishedVectorsAndReference) {
    EXPECT_EQ(reference_fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(reference_fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(reference_fnv1a("foobar"), 0x85944171f73967e8ULL);
    for (const std::string s : {"", "a", "love", "beloved", "[MASK]", "asparagus"}) {
        EXPECT_EQ(fnv1a64(s), reference_fnv1a(s)) << s;
    }
}

TEST(Featurize, EmptyInputGivesZeroVector) {
    const HashingFeaturizer f{.dim = 16, .hash_seed = 0, .l2_normalize = true};
    const FeatureVector v = featurize(f, {});
    for (double x : v) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(v.size(), 16u);
}

TEST(Featurize, BagPoolingIsPermutationInvariant) {
    const HashingFeaturizer f{.dim = 32, .hash_seed = 9, .l2_normalize = true};
    const TokenList a = {"one", "two", "three", "four", "two"};
    const TokenList b = {"two", "four", "one", "two", "three"};
    EXPECT_EQ(featurize(f, a), featurize(f, b));
}

TEST(Featurize, SingleTokenMatchesReferenceHash) {
    const HashingFeaturizer f{.dim = 8, .hash_seed = 0, .l2_normalize = false};
    const FeatureVector v = featurize(f, {"love"});
    const std::uint64_t h = reference_fnv1a("love");
    const std::size_t bucket = h % 8;
    const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_DOUBLE_EQ(v[i], i == bucket ? sign / 1.0 : 0.0);
    }
}

TEST(Featurize, HashSeedXorChangesBuckets) {
    const HashingFeaturizer f{.dim = 64, .hash_seed = 0xdeadbeef, .l2_normalize = false};
    const std::uint64_t h = reference_fnv1a("love") ^ 0xdeadbeefULL;
    const FeatureVector v = featurize(f, {"love"});
    EXPECT_NE(v[h % 64], 0.0);
}

TEST(Featurize, MeanPoolingDividesByTokenCount) {
    const HashingFeaturizer f{.dim = 64, .hash_seed = 0, .l2_normalize = false};
    // same token twice: the bucket accumulates 2 signs, divided by 2
    const FeatureVector once = featurize(f, {"film"});
    const FeatureVector twice = featurize(f, {"film", "film"});
    EXPECT_EQ(once, twice);
    // two distinct tokens: each contribution halves
    const FeatureVector pair = featurize(f, {"film", "plot"});
    const std::size_t b_film = reference_fnv1a("film") % 64;
    EXPECT_DOUBLE_EQ(pair[b_film], once[b_film] / 2.0);
}

TEST(Featurize, L2NormalizeGivesUnitNorm) {
    const HashingFeaturizer f{.dim = 64, .hash_seed = 1, .l2_normalize = true};
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        TokenList tokens;
        const std::size_t len = 1 + rng.next_below(40);
        for (std::size_t i = 0; i < len; ++i) {
            tokens.push_back("tok" + std::to_string(rng.next_below(200)));
        }
        EXPECT_NEAR(l2_norm(featurize(f, tokens)), 1.0, 1e-12);
    }
}

TEST(Featurize, DeterministicAcrossCalls) {
    const HashingFeaturizer f{.dim = 256, .hash_seed = 7, .l2_normalize = true};
    const TokenList tokens = {"a", "deterministic", "bag", "of", "tokens"};
    EXPECT_EQ(featurize(f, tokens), featurize(f, tokens));
}

TEST(Featurize, PhraseAndMaskSeparate) {
    for (const std::uint64_t seed : {0ULL, 1ULL, 42ULL}) {
        const HashingFeaturizer f{.dim = 256, .hash_seed = seed, .l2_normalize = true};
        EXPECT_NO_THROW(verify_phrase_separation(f, "love", kMaskToken));
        EXPECT_NE(featurize(f, {"love"}), featurize(f, {kMaskToken}));
    }
}

TEST(EmbeddingTable, LookupRoundTrip) {
    const std::string path = write_temp("ct_embed_ok.tsv",
                                        "dim=3\n"
                                        "7\tfactual\t0.5,-1.25,3\n"
                                        "7\tcf_treated\t1,2,3\n"
                                        "7\tcf_control\t0,0,1\n");
    const EmbeddingTable table = EmbeddingTable::load(path);
    EXPECT_EQ(table.dim(), 3u);
    const FeatureVector v = lookup_embedding(table, "7", CfVariant::factual);
    EXPECT_EQ(v, (FeatureVector{0.5, -1.25, 3.0}));
}

TEST(EmbeddingTable, MissingVariantThrows) {
    const std::string path = write_temp("ct_embed_missing.tsv",
                                        "dim=2\n"
                                        "7\tfactual\t1,2\n");
    const EmbeddingTable table = EmbeddingTable::load(path);
    EXPECT_THROW(lookup_embedding(table, "7", CfVariant::cf_control), MissingEmbedding);
    EXPECT_THROW(lookup_embedding(table, "8", CfVariant::factual), MissingEmbedding);
}

TEST(EmbeddingTable, RowLengthMismatchThrows) {
    const std::string path = write_temp("ct_embed_short.tsv",
                                        "dim=3\n"
                                        "7\tfactual\t1,2\n");
    EXPECT_THROW(EmbeddingTable::load(path), ParseError);
}

TEST(EmbeddingTable, BadHeaderOrVariantThrows) {
    EXPECT_THROW(EmbeddingTable::load(write_temp("ct_embed_hdr.tsv", "d=3\n")), ParseError);
    EXPECT_THROW(EmbeddingTable::load(
                     write_temp("ct_embed_var.tsv", "dim=1\n7\tweird\t1\n")),
                 ParseError);
}
