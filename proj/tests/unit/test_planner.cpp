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

#include <algorithm>
#include <random>

#include "ceaeval/error.hpp"
#include "ceaeval/planner.hpp"
#include "oracles.hpp"

using namespace ceaeval;
using namespace ceaeval::planner;
using corpus::Intonation;
using corpus::Rhythm;

namespace {

ExpressivePlan plan(std::string emotion, Rhythm r, Intonation i, std::string rec) {
    return {std::move(emotion), r, i, std::move(rec)};
}

const ExpressivePlan kX = plan("angry", Rhythm::kTense, Intonation::kFalling, "normal speech");
const ExpressivePlan kY = plan("gentle", Rhythm::kRelaxed, Intonation::kRising, "normal speech");

std::vector<PlanBallot> ballots(const std::vector<int> &x_cts, const std::vector<int> &y_cts) {
    std::vector<PlanBallot> out;
    for (int c : x_cts) out.push_back({c, kX});
    for (int c : y_cts) out.push_back({c, kY});
    return out;
}

Errc parse_error(std::string_view raw, std::string *field = nullptr) {
    try {
        parse_plan(raw);
    } catch (const Error &e) {
        if (field) *field = e.field();
        return e.code();
    }
    return Errc::kConfigError;
}

} // namespace

TEST(PlannerPrompt, EmptyWindow) {
    context::ContextWindow w;
    auto p = render_planner_prompt(w, "Hello");
    EXPECT_NE(p.find("Narrative Context:\n\n\nTarget Utterance:\nHello\n"), std::string::npos);
    EXPECT_EQ(p.find("{{"), std::string::npos);
}

TEST(PlannerPrompt, CaseStudyContextInStoryOrder) {
    const auto &lines = testkit::casestudy::kLines;
    auto w = context::build_context(lines, 4, 4);
    auto p = render_planner_prompt(w, context::render_line(w.target));
    auto ctx_start = p.find("Narrative Context:\n") + std::string("Narrative Context:\n").size();
    auto ctx_end = p.find("\n\nTarget Utterance:");
    auto block = p.substr(ctx_start, ctx_end - ctx_start);
    EXPECT_EQ(std::count(block.begin(), block.end(), '\n'), 3);
    std::size_t last = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        auto pos = block.find(context::render_line(lines[i]));
        ASSERT_NE(pos, std::string::npos);
        EXPECT_GE(pos, last);
        last = pos;
    }
    EXPECT_NE(p.find("Target Utterance:\nLin Nianlei said: \"Cheer up."), std::string::npos);
}

TEST(PlannerPrompt, Deterministic) {
    auto story = testkit::make_story(20);
    auto w = context::build_context(story, 18, 15);
    EXPECT_EQ(w.lines.size(), 15u);
    EXPECT_EQ(render_planner_prompt(w, "x"), render_planner_prompt(w, "x"));
}

TEST(ParsePlan, CaseStudyOutputNormalises) {
    auto p = parse_plan(testkit::casestudy::kPlannerOutput);
    EXPECT_EQ(p, plan("gentle", Rhythm::kRelaxed, Intonation::kRising, "normal speech"));
}

TEST(ParsePlan, CanonicalObject) {
    auto p = parse_plan(
        R"({"emotion":"gentle","rhythm":"relaxed","intonation":"rising","recording condition":"normal speech"})");
    EXPECT_EQ(p, plan("gentle", Rhythm::kRelaxed, Intonation::kRising, "normal speech"));
}

TEST(ParsePlan, ToleratesProseAndFences) {
    const std::string obj =
        R"({"emotion":"sad","rhythm":"Low-Paced","intonation":"FLAT","recording_condition":"whisper"})";
    auto alone = parse_plan(obj);
    EXPECT_EQ(parse_plan("Sure! Here is the plan:\n" + obj + "\nHope it helps."), alone);
    EXPECT_EQ(parse_plan("```json\n" + obj + "\n```"), alone);
    // a brace inside a string value must not confuse extraction
    EXPECT_EQ(parse_plan(R"(note {"x": "}"} then )" + obj).emotion, "sad");
}

TEST(ParsePlan, Errors) {
    std::string field;
    EXPECT_EQ(parse_error(R"({"emotion":"a","rhythm":"brisk","recording condition":"b"})", &field),
              Errc::kMissingField);
    EXPECT_EQ(field, "intonation");
    EXPECT_EQ(parse_error(R"({"emotion":"a","rhythm":"wobbly","intonation":"flat","recording condition":"b"})",
                          &field),
              Errc::kUnknownCategory);
    EXPECT_EQ(field, "rhythm");
    EXPECT_EQ(parse_error("no json here"), Errc::kNoPlanFound);
    EXPECT_EQ(parse_error(""), Errc::kNoPlanFound);
}

TEST(ParsePlan, CustomAliasTable) {
    auto table = AliasTable::parse("rhythm\tbouncy\tbrisk\nintonation\twavy\tcurved\n");
    auto p = parse_plan(R"({"emotion":"a","rhythm":"Bouncy","intonation":"wavy","recording condition":"b"})", table);
    EXPECT_EQ(p.rhythm, Rhythm::kBrisk);
    EXPECT_EQ(p.intonation, Intonation::kCurved);
}

TEST(ParsePlan, SerializeRoundTripAllCategories) {
    for (int r = 0; r < 6; ++r) {
        for (int i = 0; i < 4; ++i) {
            ExpressivePlan p = plan("warm, slightly teasing", static_cast<Rhythm>(r), static_cast<Intonation>(i),
                                    "phone speech \"muffled\"");
            EXPECT_EQ(parse_plan(serialize_plan(p)), p);
        }
    }
}

TEST(Vote, Unanimity) {
    std::vector<PlanBallot> b;
    for (int c = 1; c <= 15; ++c) b.push_back({c, kX});
    EXPECT_EQ(vote_plans(b), kX);
}

TEST(Vote, MajorityWins) {
    // X on 1-7, Y on 8-15
    auto b = ballots({1, 2, 3, 4, 5, 6, 7}, {8, 9, 10, 11, 12, 13, 14, 15});
    auto out = tally_plans(b);
    EXPECT_EQ(out.plan, kY);
    EXPECT_EQ(out.votes, 8);
    EXPECT_EQ(out.groups, 2u);
    // strict majority wins regardless of labels
    auto b2 = ballots({9, 10, 11, 12, 13, 14, 15, 1}, {2, 3, 4, 5, 6, 7, 8});
    EXPECT_EQ(vote_plans(b2), kX);
}

TEST(Vote, TieGoesToLongestContext) {
    auto b = ballots({1, 2, 3, 4, 5, 6, 14}, {7, 8, 9, 10, 11, 12, 15});
    auto out = tally_plans(b);
    EXPECT_EQ(out.plan, kY);
    EXPECT_EQ(out.votes, 7);
    EXPECT_EQ(out.max_cts, 15);
}

TEST(Vote, PermutationInvariant) {
    std::mt19937_64 rng(5);
    auto b = ballots({1, 2, 3, 4, 5, 6, 14}, {7, 8, 9, 10, 11, 12, 15});
    for (int i = 0; i < 50; ++i) {
        std::shuffle(b.begin(), b.end(), rng);
        EXPECT_EQ(vote_plans(b), kY);
    }
}

TEST(Vote, CanonicalisesFreeText) {
    std::vector<PlanBallot> b = {{1, kX}, {2, kX}, {3, kY}, {4, kY}, {5, kY}};
    b[0].plan.emotion = "  ANGRY ";
    b[1].plan.recording_condition = "normal   speech";
    b.push_back({6, kX});
    b.push_back({7, kX});
    EXPECT_EQ(tally_plans(b).votes, 4);
    // verbatim comparison splits the X group
    VoteOptions strict{.strict_equality = true};
    EXPECT_EQ(vote_plans(b, strict), kY);
}

TEST(Vote, Errors) {
    try {
        vote_plans({});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::kEmptyBallots);
    }
    try {
        vote_plans(ballots({3}, {3}));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::kInvariantViolation);
    }
}
