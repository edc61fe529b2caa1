#include <gtest/gtest.h>

#include <map>
#include <random>

#include "averify/features.hpp"
#include "test_helpers.hpp"

using namespace averify;

namespace {

FeatureSpec only_orders(std::set<int> orders) {
    FeatureSpec s;
    s.char_ngram_orders = std::move(orders);
    s.include_punctuation = false;
    s.include_function_words = false;
    return s;
}

SparseVector random_vector(std::mt19937_64& rng, std::size_t keys) {
    std::vector<SparseVector::Entry> e;
    std::uniform_real_distribution<double> w(0.0, 1.0);
    for (std::size_t i = 0; i < keys; ++i)
        if (rng() % 3) e.emplace_back("k:" + std::to_string(i), w(rng));
    return SparseVector(std::move(e));
}

std::map<std::string, double> family_sums(const SparseVector& v) {
    std::map<std::string, double> s;
    for (const auto& [k, w] : v) s[std::string(family_of(k))] += w;
    return s;
}

}  // namespace

TEST(Extract, SingleBigram) {
    auto v = extract_features("aaa", only_orders({2}));
    ASSERT_EQ(v.size(), 1u);
    EXPECT_DOUBLE_EQ(v.get("char2:aa"), 1.0);
}

TEST(Extract, Abab) {
    auto v = extract_features("abab", only_orders({2}));
    EXPECT_DOUBLE_EQ(v.get("char2:ab"), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(v.get("char2:ba"), 1.0 / 3.0);
    EXPECT_EQ(v.size(), 2u);
}

TEST(Extract, FamilyNormalizationSumsToOnePerFamily) {
    std::mt19937_64 rng(4);
    FeatureSpec spec;
    spec.normalization = FeatureSpec::Normalization::family;
    for (int i = 0; i < 20; ++i) {
        auto v = extract_features(averify::testing::english_like(rng, 200 + rng() % 400), spec);
        auto sums = family_sums(v);
        EXPECT_EQ(sums.size(), 5u);  // char2..4, punct, fw
        for (const auto& [f, s] : sums) EXPECT_NEAR(s, 1.0, 1e-9) << f;
    }
}

TEST(Extract, GlobalNormalizationSumsToOneOverall) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        auto v = extract_features(averify::testing::english_like(rng, 300), FeatureSpec{});
        double total = 0;
        for (const auto& [k, w] : v) total += w;
        EXPECT_NEAR(total, 1.0, 1e-9);
    }
}

TEST(Extract, FamiliesAndCounts) {
    FeatureSpec spec;
    spec.normalization = FeatureSpec::Normalization::family;
    spec.char_ngram_orders = {1};
    auto v = extract_features("The cat, and THE dog!", spec);
    EXPECT_DOUBLE_EQ(v.get("punct:,"), 0.5);
    EXPECT_DOUBLE_EQ(v.get("punct:!"), 0.5);
    EXPECT_DOUBLE_EQ(v.get("fw:the"), 2.0 / 3.0);  // case-insensitive
    EXPECT_DOUBLE_EQ(v.get("fw:and"), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(v.get("char1: "), 4.0 / 21.0);
}

TEST(Extract, CodePointsNotBytes) {
    auto v = extract_features("éé", only_orders({2}));
    EXPECT_DOUBLE_EQ(v.get("char2:éé"), 1.0);
    EXPECT_THROW(extract_features(std::string("\xff\xfe"), only_orders({2})), ValidationError);
}

TEST(Extract, ShortTextUsesApplicableFamilies) {
    auto v = extract_features("ab", only_orders({2, 3, 4}));
    EXPECT_EQ(v.size(), 1u);
    EXPECT_DOUBLE_EQ(v.get("char2:ab"), 1.0);
    EXPECT_THROW(extract_features("a", only_orders({2, 3})), ValidationError);
    EXPECT_THROW(extract_features("", FeatureSpec{}), ValidationError);
}

TEST(Extract, SpecValidation) {
    EXPECT_THROW(extract_features("abc", only_orders({9})), ValidationError);
    EXPECT_THROW(extract_features("abc", only_orders({0})), ValidationError);
    EXPECT_THROW(extract_features("abc", only_orders({})), ValidationError);
}

TEST(Extract, TopKTruncatesPerFamily) {
    FeatureSpec spec = only_orders({1});
    spec.keep_all_features = false;
    spec.top_k = 2;
    auto v = extract_features("aaaabbbcc d", spec);
    EXPECT_EQ(v.size(), 2u);
    EXPECT_GT(v.get("char1:a"), 0.0);
    EXPECT_GT(v.get("char1:b"), 0.0);
}

TEST(Extract, KeepsEveryFeature) {
    std::mt19937_64 rng(6);
    std::string text = averify::testing::english_like(rng, 3000);
    auto v = extract_features(text, only_orders({3}));
    std::set<std::string> distinct;
    for (std::size_t i = 0; i + 3 <= text.size(); ++i) distinct.insert(text.substr(i, 3));
    EXPECT_EQ(v.size(), distinct.size());
}

TEST(Extract, IndependentOfContext) {
    Document a("a", "Some text, with the usual words.");
    Document b("b", "Some text, with the usual words.");
    EXPECT_EQ(extract_features(a, FeatureSpec{}), extract_features(b, FeatureSpec{}));
}

TEST(Measures, Manhattan) {
    SparseVector x{{"x", 1.0}}, y{{"y", 1.0}};
    EXPECT_EQ(manhattan(x, x), 0.0);
    EXPECT_EQ(manhattan(x, y), 2.0);
}

TEST(Measures, Ruzicka) {
    SparseVector x{{"x", 1.0}}, y{{"y", 1.0}};
    EXPECT_EQ(ruzicka(x, x), 1.0);
    EXPECT_EQ(ruzicka(x, y), 0.0);
    EXPECT_DOUBLE_EQ(ruzicka(SparseVector{{"x", 1.0}, {"y", 2.0}}, SparseVector{{"x", 2.0}, {"y", 1.0}}), 0.5);
    EXPECT_THROW(ruzicka(SparseVector{}, SparseVector{}), ValidationError);
    EXPECT_EQ(ruzicka(x, SparseVector{}), 0.0);
}

TEST(Measures, CngProfile) {
    SparseVector a{{"p", 0.5}, {"q", 0.3}, {"r", 0.2}};
    EXPECT_EQ(cng_profile_dissimilarity(a, a, 2), 0.0);
    SparseVector b{{"s", 0.6}, {"t", 0.4}};
    // disjoint top-2 supports: 4 per feature of the union
    EXPECT_DOUBLE_EQ(cng_profile_dissimilarity(a, b, 2), 16.0);
    EXPECT_THROW(cng_profile_dissimilarity(a, b, 0), ValidationError);
}

TEST(Measures, CngProfileMatchesBruteForce) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        auto a = random_vector(rng, 30), b = random_vector(rng, 30);
        const std::size_t L = 1 + rng() % 12;
        // rank by (weight desc, key asc) with a plain pair sort
        auto top = [&](const SparseVector& v) {
            std::vector<std::pair<double, std::string>> r;
            for (const auto& [k, w] : v) r.emplace_back(-w, k);
            std::sort(r.begin(), r.end());
            std::set<std::string> out;
            for (std::size_t i = 0; i < r.size() && i < L; ++i) out.insert(r[i].second);
            return out;
        };
        std::set<std::string> keys = top(a);
        for (const auto& k : top(b)) keys.insert(k);
        double expect = 0;
        for (const auto& k : keys) {
            double x = a.get(k), y = b.get(k);
            expect += std::pow(2 * (x - y) / (x + y), 2);
        }
        EXPECT_NEAR(cng_profile_dissimilarity(a, b, L), expect, 1e-12);
    }
}

TEST(Measures, PropertiesOnRandomVectors) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        auto a = random_vector(rng, 20), b = random_vector(rng, 20), c = random_vector(rng, 20);
        EXPECT_EQ(manhattan(a, b), manhattan(b, a));
        EXPECT_LE(manhattan(a, c), manhattan(a, b) + manhattan(b, c) + 1e-12);
        if (!a.empty() || !b.empty()) {
            double r = ruzicka(a, b);
            EXPECT_EQ(r, ruzicka(b, a));
            EXPECT_GE(r, 0.0);
            EXPECT_LE(r, 1.0);
        }
        if (!a.empty()) {
            EXPECT_EQ(ruzicka(a, a), 1.0);
        }
        EXPECT_EQ(cng_profile_dissimilarity(a, b, 5), cng_profile_dissimilarity(b, a, 5));
        EXPECT_EQ(cosine(a, b), cosine(b, a));
    }
}

TEST(Centroid, Examples) {
    SparseVector v{{"x", 0.25}, {"y", 0.75}};
    std::vector<SparseVector> one{v};
    EXPECT_EQ(centroid(one), v);
    std::vector<SparseVector> two{SparseVector{{"x", 1.0}}, SparseVector{{"y", 1.0}}};
    auto c = centroid(two);
    EXPECT_DOUBLE_EQ(c.get("x"), 0.5);
    EXPECT_DOUBLE_EQ(c.get("y"), 0.5);
    std::vector<SparseVector> copies(4, SparseVector{{"x", 0.5}, {"y", 0.5}});
    EXPECT_EQ(centroid(copies), copies[0]);
    EXPECT_THROW(centroid(std::vector<SparseVector>{}), ValidationError);
}

TEST(SparseVectorType, RejectsBadWeights) {
    EXPECT_THROW((SparseVector{{"x", -1.0}}), ValidationError);
    EXPECT_THROW((SparseVector{{"x", 1.0}, {"x", 2.0}}), ValidationError);
    EXPECT_THROW((SparseVector{{"x", std::nan("")}}), ValidationError);
}

TEST(Similarity, Kinds) {
    EXPECT_EQ(parse_similarity_kind("cng-profile"), SimilarityKind::cng_profile);
    EXPECT_THROW(parse_similarity_kind("jaccard"), ValidationError);
    EXPECT_THROW(parse_distance_kind("euclid"), ValidationError);
    DistanceSpec d{DistanceKind::ruzicka, 300};
    SparseVector x{{"x", 1.0}};
    EXPECT_EQ(d(x, x), 0.0);
}

TEST(Similarity, ParameterValidation) {
    EXPECT_NO_THROW(SimilaritySpec(SimilarityKind::cng_profile, {{"profile_length", 50}}));
    EXPECT_THROW(SimilaritySpec(SimilarityKind::ruzicka, {{"profile_length", 50}}), ValidationError);
    EXPECT_THROW(SimilaritySpec(SimilarityKind::cbc, {{"order", 0}}), ValidationError);
    EXPECT_THROW(SimilaritySpec(SimilarityKind::cbc, {{"order", 2.5}}), ValidationError);
}
