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
#include "ceaeval/judge.hpp"
#include "oracles.hpp"

using namespace ceaeval;
using namespace ceaeval::judge;
using corpus::Intonation;
using corpus::Rhythm;

namespace {

const planner::ExpressivePlan kPlan{"gentle", Rhythm::kRelaxed, Intonation::kRising, "normal speech"};

bool ends_with(const std::string &s, std::string_view tail) {
    return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

Errc verdict_error(std::string_view raw) {
    try {
        parse_verdict(raw, JudgeMode::kWithoutCot);
    } catch (const Error &e) {
        return e.code();
    }
    return Errc::kConfigError;
}

std::vector<std::string> toks(std::initializer_list<const char *> l) { return {l.begin(), l.end()}; }

} // namespace

TEST(JudgePrompt, ModeInstructionAtEnd) {
    auto cot = render_judge_prompt(kPlan, JudgeMode::kWithCot);
    auto plain = render_judge_prompt(kPlan, JudgeMode::kWithoutCot);
    EXPECT_TRUE(ends_with(cot, "Think step by step and explain your analysis before giving the final score.\n"));
    EXPECT_TRUE(ends_with(plain, "Give the final expressive appropriateness score only.\n"));
    EXPECT_EQ(cot.find("score only"), std::string::npos);
    EXPECT_NE(cot.find("emotion: gentle\nrhythm: relaxed\nintonation: rising\nrecording_condition: normal speech"),
              std::string::npos);
    EXPECT_EQ(cot.find("{{"), std::string::npos);
}

TEST(JudgePrompt, ChineseVariantKeepsPlanSlots) {
    auto zh = render_judge_prompt(kPlan, JudgeMode::kWithCot, Language::kZh);
    EXPECT_NE(zh.find("emotion: gentle"), std::string::npos);
    EXPECT_NE(zh.find("请逐步思考"), std::string::npos);
    EXPECT_EQ(zh.find("{{"), std::string::npos);
}

TEST(CotGenPrompt, SoundsSectionOptional) {
    auto actual = testkit::make_annotation(4.0);
    auto with = render_cot_gen_prompt("Hi", kPlan, actual, 4.0, std::string_view("inhalation"));
    auto without = render_cot_gen_prompt("Hi", kPlan, actual, 4.0, std::nullopt);
    EXPECT_NE(with.find("inhalation"), std::string::npos);
    EXPECT_EQ(without.find("Paralinguistic"), std::string::npos);
    EXPECT_EQ(render_cot_gen_prompt("Hi", kPlan, actual, 4.0, std::string_view("  ")), without);
    EXPECT_NE(without.find("Ground-truth expressive score:\n4.0\n"), std::string::npos);
    try {
        render_cot_gen_prompt("Hi", kPlan, actual, 6.0, std::nullopt);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::kScoreOutOfRange);
    }
}

TEST(BaselinePrompt, Modes) {
    auto story = testkit::make_story(20);
    auto w = context::build_context(story, 19, 15);
    auto plain = render_baseline_prompt(w, "T", Language::kEn, JudgeMode::kWithoutCot);
    auto cot = render_baseline_prompt(w, "T", Language::kEn, JudgeMode::kWithCot);
    EXPECT_NE(plain.find("<score>1.5</score>"), std::string::npos);
    EXPECT_EQ(plain.find("# Reasoning Mode"), std::string::npos);
    EXPECT_NE(cot.find("# Reasoning Mode"), std::string::npos);
    auto ctx = context::render_lines(w);
    EXPECT_NE(plain.find("[Context]\n" + ctx + "\n\n[Target Utterance]\nT"), std::string::npos);
}

TEST(BaselinePrompt, ChineseSlotsMatchEnglish) {
    auto story = testkit::make_story(6);
    auto w = context::build_context(story, 5, 3);
    for (auto mode : {JudgeMode::kWithCot, JudgeMode::kWithoutCot}) {
        auto en = render_baseline_prompt(w, "TARGET", Language::kEn, mode);
        auto zh = render_baseline_prompt(w, "TARGET", Language::kZh, mode);
        EXPECT_NE(zh.find(context::render_lines(w)), std::string::npos);
        EXPECT_NE(zh.find("TARGET"), std::string::npos);
        EXPECT_EQ(en.find("{{"), std::string::npos);
        EXPECT_EQ(zh.find("{{"), std::string::npos);
    }
}

TEST(ParseVerdict, CaseStudyTranscript) {
    auto v = parse_verdict(testkit::casestudy::kJudgeOutput, JudgeMode::kWithCot);
    EXPECT_EQ(v.final_score, 4.0);
    std::map<std::string, double> want{
        {"emotion", 4.2}, {"rhythm", 4.0}, {"intonation", 4.0}, {"recording_condition", 4.0}};
    EXPECT_EQ(v.dimension_scores, want);
    ASSERT_TRUE(v.cot_text);
    EXPECT_NE(v.cot_text->find("emotion score of 4.2"), std::string::npos);
    EXPECT_EQ(v.cot_text->find("<score>"), std::string::npos);
}

TEST(ParseVerdict, PlainTag) {
    auto v = parse_verdict("<s>2.5</s>", JudgeMode::kWithoutCot);
    EXPECT_EQ(v.final_score, 2.5);
    EXPECT_FALSE(v.cot_text);
    EXPECT_TRUE(v.dimension_scores.empty());
}

TEST(ParseVerdict, LastSpanWins) {
    EXPECT_EQ(parse_verdict("draft <s>1.0</s> revised <score>3.5</score>", JudgeMode::kWithCot).final_score, 3.5);
}

TEST(ParseVerdict, Rejects) {
    EXPECT_EQ(verdict_error("<s>7.0</s>"), Errc::kScoreOutOfRange);
    EXPECT_EQ(verdict_error("<s>-0.1</s>"), Errc::kScoreOutOfRange);
    EXPECT_EQ(verdict_error("<s>high</s>"), Errc::kUnparsableNumber);
    EXPECT_EQ(verdict_error("<s>nan</s>"), Errc::kUnparsableNumber);
    EXPECT_EQ(verdict_error("score 4"), Errc::kNoScoreFound);
}

TEST(ParseVerdict, RoundTripTenthGrid) {
    for (int i = 0; i <= 50; ++i) {
        double s = i / 10.0;
        EXPECT_EQ(parse_verdict(format_score_tag(s), JudgeMode::kWithoutCot).final_score, s) << s;
        auto cot = "<t>fine</t>" + format_score_tag(s);
        EXPECT_EQ(parse_verdict(cot, JudgeMode::kWithCot).final_score, s);
    }
}

TEST(Annotate, HandExample) {
    auto prompt = toks({"<bos>", "rate", "this", "<a>", "a1", "a2", "a3", "a4", "</a>"});
    auto out = toks({"<t>", "x", "<f>", "y", "</f>", "z", "</t>", "<s>", "4.0", "</s>", "<eos>"});
    auto seq = annotate_regions(prompt, Span{3, 8}, out);
    ASSERT_EQ(seq.size(), 20u);
    EXPECT_EQ(seq.prompt_length, 9u);
    std::map<Region, int> count;
    for (const auto &t : seq.tokens) ++count[t.region];
    EXPECT_EQ(count[Region::kPrompt], 3);
    EXPECT_EQ(count[Region::kAudio], 6);
    EXPECT_EQ(count[Region::kCot] + count[Region::kFocus], 7);
    EXPECT_EQ(count[Region::kFocus], 3);
    EXPECT_EQ(count[Region::kScore], 3);
    EXPECT_EQ(count[Region::kBase], 1);
}

TEST(Annotate, DelimitersOptionallyBase) {
    auto prompt = toks({"p", "<a>", "a", "</a>"});
    auto out = toks({"<s>", "1", "</s>"});
    auto seq = annotate_regions(prompt, std::nullopt, out, {.delimiters_in_region = false});
    EXPECT_EQ(seq.tokens[1].region, Region::kBase);
    EXPECT_EQ(seq.tokens[2].region, Region::kAudio);
    EXPECT_EQ(seq.tokens[5].region, Region::kScore);
    EXPECT_EQ(seq.tokens[6].region, Region::kBase);
}

TEST(Annotate, NoMarkersAllBase) {
    auto prompt = toks({"a", "b"});
    auto out = toks({"c"});
    auto seq = annotate_regions(prompt, std::nullopt, out);
    for (const auto &t : seq.tokens) EXPECT_EQ(t.region, Region::kBase);
}

TEST(Annotate, Errors) {
    auto prompt = toks({"p"});
    auto expect = [&](std::vector<std::string> p, std::vector<std::string> o, Errc code) {
        try {
            annotate_regions(p, std::nullopt, o);
            ADD_FAILURE() << "no throw";
        } catch (const Error &e) {
            EXPECT_EQ(e.code(), code) << errc_name(e.code());
        }
    };
    expect(prompt, toks({"<t>", "<f>", "x", "</t>"}), Errc::kUnbalancedDelimiter);
    expect(prompt, toks({"<t>", "<f>", "x"}), Errc::kUnbalancedDelimiter);
    expect(prompt, toks({"</s>"}), Errc::kUnbalancedDelimiter);
    expect(toks({"<a>", "<a>"}), {}, Errc::kNestedAudio);
    expect(prompt, toks({"<a>", "x", "</a>"}), Errc::kNestedAudio);
    try {
        annotate_regions(toks({"<a>", "x", "</a>"}), Span{0, 1}, {});
        ADD_FAILURE();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::kInvariantViolation);
    }
}

TEST(Annotate, FuzzAgainstOracle) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 500; ++i) {
        auto f = testkit::fuzz_sequence(rng);
        auto seq = annotate_regions(f.prompt, f.audio, f.output);
        ASSERT_EQ(seq.size(), f.expected.size());
        for (std::size_t k = 0; k < seq.size(); ++k) {
            ASSERT_EQ(seq.tokens[k].region, f.expected[k]) << "case " << i << " pos " << k;
        }
    }
}
