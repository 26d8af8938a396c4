// Copyright 2026 The ceaeval-kit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ceaeval/error.hpp"
#include "ceaeval/metrics.hpp"
#include "oracles.hpp"

using namespace ceaeval;
using namespace ceaeval::metrics;

namespace {

Errc code_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    return Errc::kConfigError;
}

Eigen::MatrixXd random_ratings(std::mt19937_64 &rng, int n, int k) {
    std::uniform_real_distribution<double> u(0.0, 5.0);
    Eigen::MatrixXd m(n, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) m(i, j) = u(rng);
    return m;
}

} // namespace

TEST(Lcc, SmallExampleMatchesOracle) {
    std::vector<double> p{1, 2, 3}, r{1, 2, 4};
    EXPECT_NEAR(lcc(p, r), testkit::pearson_oracle(p, r), 1e-12);
    EXPECT_NEAR(lcc(p, r), 3.0 / std::sqrt(2.0 * 14.0 / 3.0), 1e-12);
}

TEST(Lcc, IdenticalIsOne) {
    std::vector<double> x{0.5, 3.0, 2.2, 4.9};
    EXPECT_EQ(lcc(x, x), 1.0);
}

TEST(Lcc, IndependentUniformsNearZero) {
    std::mt19937_64 rng(20260101);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<double> a(10000), b(10000);
    for (auto &x : a) x = u(rng);
    for (auto &x : b) x = u(rng);
    EXPECT_LT(std::fabs(lcc(a, b)), 0.1);
    EXPECT_NEAR(lcc(a, b), testkit::pearson_oracle(a, b), 1e-12);
}

TEST(Lcc, Errors) {
    std::vector<double> c{2, 2, 2}, x{1, 2, 3}, two{1, 2};
    EXPECT_EQ(code_of([&] { lcc(c, x); }), Errc::kZeroVariance);
    EXPECT_EQ(code_of([&] { lcc(two, x); }), Errc::kLengthMismatch);
}

TEST(Acc, ToleranceBoundaryInclusive) {
    std::vector<double> p{1.0, 2.0, 4.5}, r{2.0, 3.5, 4.0};
    EXPECT_NEAR(tolerance_acc(p, r), 2.0 / 3.0, 1e-15);
    std::vector<double> edge{0.0}, ref{1.0};
    EXPECT_EQ(tolerance_acc(edge, ref), 1.0);
}

TEST(Icc, SmallExampleMatchesOracle) {
    Eigen::MatrixXd m(4, 3);
    m << 9, 2, 5, 6, 1, 3, 8, 4, 6, 7, 1, 2;
    EXPECT_NEAR(icc_2_1(m), testkit::icc_oracle(m), 1e-12);
    auto ms = two_way_anova(m);
    auto o = testkit::anova_oracle(m);
    EXPECT_NEAR(ms.rows, o.msr, 1e-12);
    EXPECT_NEAR(ms.cols, o.msc, 1e-12);
    EXPECT_NEAR(ms.error, o.mse, 1e-12);
}

TEST(Icc, RandomMatricesMatchOracle) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
        auto m = random_ratings(rng, 10, 5);
        EXPECT_NEAR(icc_2_1(m), testkit::icc_oracle(m), 1e-9);
    }
}

TEST(Icc, PerfectAgreementIsOne) {
    Eigen::MatrixXd m(5, 3);
    for (int i = 0; i < 5; ++i) m.row(i).setConstant(i * 0.7);
    EXPECT_NEAR(icc_2_1(m), 1.0, 1e-12);
}

TEST(Icc, Degenerate) {
    Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 3, 2.0);
    EXPECT_EQ(code_of([&] { icc_2_1(flat); }), Errc::kDegenerateAnova);
    Eigen::MatrixXd one(1, 3);
    one << 1, 2, 3;
    EXPECT_EQ(code_of([&] { icc_2_1(one); }), Errc::kInvariantViolation);
}

TEST(Percent, ModalShare) {
    LabelMatrix l{{"sigh", "sigh", "laugh"}, {"a", "b", "a"}};
    EXPECT_NEAR(percent_agreement(l), 2.0 / 3.0, 1e-15);
    LabelMatrix half{{"x", "y"}, {"x", "x"}};
    EXPECT_NEAR(percent_agreement(half), 0.75, 1e-15);
    LabelMatrix tie{{"x", "y"}};
    EXPECT_EQ(percent_agreement(tie), 0.5);
}

TEST(Embedding, TableBackend) {
    TableEmbeddingBackend table({{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 0}}});
    // pairs: a-b 0, a-c 1, b-c 0
    LabelMatrix l{{"a", "b", "c"}};
    EXPECT_NEAR(embedding_agreement(l, table), 1.0 / 3.0, 1e-15);
    LabelMatrix unknown{{"a", "zzz"}};
    EXPECT_EQ(code_of([&] { embedding_agreement(unknown, table); }), Errc::kBackendFailure);
}

TEST(Embedding, HashBackendIdenticalTextsAgree) {
    HashEmbeddingBackend h(64);
    LabelMatrix l{{"soft sigh", "soft sigh"}, {"Laughter", " laughter"}};
    EXPECT_NEAR(embedding_agreement(l, h), 1.0, 1e-12);
}

TEST(Vad, LexiconMapping) {
    auto lex = VadLexicon::parse("term\tvalence\tarousal\tdominance\ncalm\t0.7\t0.1\t0.5\nangry\t0.1\t0.9\t0.7\n");
    EXPECT_EQ(lex.size(), 2u);
    auto v = map_emotion_to_vad("Calm", lex);
    EXPECT_EQ(v.valence, 0.7);
    auto mixed = map_emotion_to_vad("calm but angry", lex);
    EXPECT_NEAR(mixed.arousal, 0.5, 1e-15);
    EXPECT_EQ(code_of([&] { map_emotion_to_vad("bewildered", lex); }), Errc::kTermNotFound);
}

TEST(Vad, IccOverDimensions) {
    auto lex = VadLexicon::parse("calm\t0.7\t0.1\t0.5\nangry\t0.1\t0.9\t0.7\nsad\t0.2\t0.3\t0.2\n");
    LabelMatrix same{{"calm", "calm"}, {"angry", "angry"}, {"sad", "sad"}};
    EXPECT_NEAR(emotion_vad_icc(same, lex), 1.0, 1e-12);
}
