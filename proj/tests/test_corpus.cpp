#include "causaltext/corpus.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "causaltext/rng.hpp"

using namespace causaltext;

namespace {

Document make_doc(std::vector<std::string> tokens, int label = 0, std::string id = "d") {
    Document doc;
    doc.id = std::move(id);
    doc.tokens = std::move(tokens);
    doc.label = label;
    return doc;
}

// brute-force two-group mean difference, independent of raw_association
double assoc_oracle(const std::vector<Document>& docs, const std::string& phrase) {
    std::vector<double> treated, untreated;
    for (const auto& d : docs) {
        (contains_phrase(d.tokens, phrase) ? treated : untreated).push_back(d.label);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    return mean(treated) - mean(untreated);
}

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

}  // namespace

TEST(Tokenize, LowercasesSplitsAndStripsPunctuation) {
    EXPECT_EQ(tokenize("I LOVED this movie!", 150),
              (TokenList{"i", "loved", "this", "movie"}));
}

TEST(Tokenize, EmptyTextGivesEmptyList) {
    EXPECT_TRUE(tokenize("", 150).empty());
    EXPECT_TRUE(tokenize("   \t \n ", 150).empty());
}

TEST(Tokenize, TruncatesToMaxSeqLen) {
    EXPECT_EQ(tokenize("a b c d", 2), (TokenList{"a", "b"}));
}

TEST(Tokenize, UnicodeWhitespaceSplits) {
    // U+00A0 no-break space and U+2003 em space both separate tokens
    EXPECT_EQ(tokenize("one\xc2\xa0two\xe2\x80\x83three", 10),
              (TokenList{"one", "two", "three"}));
}

TEST(Tokenize, InteriorPunctuationSurvives) {
    EXPECT_EQ(tokenize("it's \"great\" -- (really)...", 10),
              (TokenList{"it's", "great", "really"}));
}

TEST(Tokenize, DeterministicAcrossCalls) {
    const std::string text = "Some MIXED case text, with 123 numbers and \xc3\xa9 accents!";
    EXPECT_EQ(tokenize(text, 50), tokenize(text, 50));
}

TEST(ContainsPhrase, SubstringMatchesMorphologicalVariants) {
    EXPECT_TRUE(contains_phrase({"a", "beloved", "film"}, "love"));
    EXPECT_TRUE(contains_phrase({"glove", "store"}, "love"));
    EXPECT_FALSE(contains_phrase({"great", "film"}, "love"));
}

TEST(ContainsPhrase, CaseInsensitive) {
    EXPECT_TRUE(contains_phrase({"LOVED"}, "love"));
}

TEST(CounterfactualPair, MasksExistingPhrase) {
    const Document doc = make_doc({"a", "beloved", "film"});
    const CounterfactualPair pair = make_counterfactual_pair(doc, "love", "[MASK]", 150);
    EXPECT_EQ(pair.treated_tokens, (TokenList{"a", "beloved", "film"}));
    EXPECT_EQ(pair.control_tokens, (TokenList{"a", "[MASK]", "film"}));
}

TEST(CounterfactualPair, PrependsWhenAbsent) {
    const Document doc = make_doc({"great", "film"});
    const CounterfactualPair pair = make_counterfactual_pair(doc, "love", "[MASK]", 150);
    EXPECT_EQ(pair.treated_tokens, (TokenList{"love", "great", "film"}));
    EXPECT_EQ(pair.control_tokens, (TokenList{"great", "film"}));
}

TEST(CounterfactualPair, MasksEveryOccurrence) {
    const Document doc = make_doc({"love", "loved"});
    const CounterfactualPair pair = make_counterfactual_pair(doc, "love", "[MASK]", 150);
    EXPECT_EQ(pair.control_tokens, (TokenList{"[MASK]", "[MASK]"}));
}

TEST(CounterfactualPair, PrependReappliesTruncation) {
    const Document doc = make_doc({"a", "b", "c"});
    const CounterfactualPair pair = make_counterfactual_pair(doc, "love", "[MASK]", 3);
    EXPECT_EQ(pair.treated_tokens, (TokenList{"love", "a", "b"}));
}

TEST(CounterfactualPair, IdempotentOnTreatedTokens) {
    Rng rng(11);
    const std::vector<std::string> vocab = {"a", "b", "lovely", "film", "x", "clover"};
    for (int trial = 0; trial < 50; ++trial) {
        TokenList tokens;
        const std::size_t len = rng.next_below(12);
        for (std::size_t i = 0; i < len; ++i) {
            tokens.push_back(vocab[rng.next_below(vocab.size())]);
        }
        const Document doc = make_doc(tokens);
        const CounterfactualPair first = make_counterfactual_pair(doc, "love", "[MASK]", 20);
        Document treated_doc = make_doc(first.treated_tokens);
        const CounterfactualPair second =
            make_counterfactual_pair(treated_doc, "love", "[MASK]", 20);
        EXPECT_EQ(second.treated_tokens, first.treated_tokens);
        EXPECT_FALSE(contains_phrase(first.control_tokens, "love"));
        EXPECT_TRUE(contains_phrase(first.treated_tokens, "love"));
    }
}

TEST(RawAssociation, MatchesBruteForceOracle) {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Document> docs;
        const std::size_t n = 10 + rng.next_below(90);
        bool has_t = false, has_u = false;
        for (std::size_t i = 0; i < n; ++i) {
            const bool treated = rng.next_bool(0.4);
            has_t |= treated;
            has_u |= !treated;
            docs.push_back(make_doc(treated ? TokenList{"love", "x"} : TokenList{"x"},
                                    rng.next_bool(0.5) ? 1 : 0));
        }
        if (!has_t || !has_u) continue;
        EXPECT_DOUBLE_EQ(raw_association(docs, "love"), assoc_oracle(docs, "love"));
    }
}

TEST(RawAssociation, HandValues) {
    // Y=[1,0], T=[1,0] -> 1.0
    std::vector<Document> docs = {make_doc({"love"}, 1), make_doc({"meh"}, 0)};
    EXPECT_DOUBLE_EQ(raw_association(docs, "love"), 1.0);
    // constant labels -> 0
    docs = {make_doc({"love"}, 1), make_doc({"meh"}, 1)};
    EXPECT_DOUBLE_EQ(raw_association(docs, "love"), 0.0);
}

TEST(RawAssociation, DegenerateGroupsThrow) {
    std::vector<Document> docs = {make_doc({"love"}, 1), make_doc({"lovely"}, 0)};
    EXPECT_THROW(raw_association(docs, "love"), DegenerateGroups);
}

TEST(LoadJsonl, ReadsIntegerLabels) {
    const std::string path = write_temp("ct_corpus_ok.jsonl",
                                        "{\"text\":\"x y\",\"label\":1}\n"
                                        "{\"text\":\"z\",\"label\":0}\n");
    const auto docs = load_jsonl(path, {});
    ASSERT_EQ(docs.size(), 2u);
    EXPECT_EQ(docs[0].label, 1);
    EXPECT_EQ(docs[0].tokens, (TokenList{"x", "y"}));
    EXPECT_EQ(docs[1].label, 0);
}

TEST(LoadJsonl, BinarizesWithThreshold) {
    const std::string path =
        write_temp("ct_corpus_thresh.jsonl", "{\"text\":\"x\",\"label\":0.7}\n");
    JsonlOptions opts;
    opts.binarize_threshold = 0.0;
    const auto docs = load_jsonl(path, opts);
    ASSERT_EQ(docs.size(), 1u);
    EXPECT_EQ(docs[0].label, 1);
}

TEST(LoadJsonl, LabelOutsideBinaryWithoutThresholdThrows) {
    const std::string path =
        write_temp("ct_corpus_bad_label.jsonl", "{\"text\":\"x\",\"label\":2}\n");
    EXPECT_THROW(load_jsonl(path, {}), LabelError);
}

TEST(LoadJsonl, ParseErrorCarriesLineNumber) {
    const std::string path = write_temp("ct_corpus_bad_json.jsonl",
                                        "{\"text\":\"x\",\"label\":1}\n"
                                        "not json\n");
    try {
        load_jsonl(path, {});
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line_number, 2u);
    }
}

TEST(LoadJsonl, MissingFieldThrows) {
    const std::string path = write_temp("ct_corpus_missing.jsonl", "{\"text\":\"x\"}\n");
    EXPECT_THROW(load_jsonl(path, {}), ParseError);
}

TEST(Split, CountsAndDisjointness) {
    std::vector<Document> docs;
    for (int i = 0; i < 10; ++i) docs.push_back(make_doc({"x"}, 0, "id" + std::to_string(i)));
    const DatasetSplit s = split(docs, {0.8, 0.2}, 7);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.validation.size(), 2u);
    std::set<std::string> ids;
    for (const auto& d : s.train) ids.insert(d.id);
    for (const auto& d : s.validation) ids.insert(d.id);
    EXPECT_EQ(ids.size(), 10u);
}

TEST(Split, DeterministicBySeed) {
    std::vector<Document> docs;
    for (int i = 0; i < 50; ++i) docs.push_back(make_doc({"x"}, 0, "id" + std::to_string(i)));
    const DatasetSplit a = split(docs, {0.5, 0.5}, 3);
    const DatasetSplit b = split(docs, {0.5, 0.5}, 3);
    ASSERT_EQ(a.train.size(), b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        EXPECT_EQ(a.train[i].id, b.train[i].id);
    }
}

TEST(Split, PaperSizedSplit) {
    std::vector<Document> docs;
    docs.reserve(25000);
    for (int i = 0; i < 25000; ++i) docs.push_back(make_doc({"x"}, i % 2, std::to_string(i)));
    const DatasetSplit s = split(std::move(docs), {0.8, 0.2}, 1);
    EXPECT_EQ(s.train.size(), 20000u);
    EXPECT_EQ(s.validation.size(), 5000u);
}

TEST(Split, RejectsBadFractions) {
    std::vector<Document> docs(4, make_doc({"x"}));
    EXPECT_THROW(split(docs, {0.5, 0.6}, 0), ConfigError);
    EXPECT_THROW(split(docs, {1.0, -0.0001}, 0), ConfigError);
}
