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

#include <sstream>

#include <nlohmann/json.hpp>

#include "ceaeval/corpus.hpp"
#include "ceaeval/error.hpp"
#include "ceaeval/reward.hpp"
#include "oracles.hpp"

using namespace ceaeval;
using namespace ceaeval::corpus;
using nlohmann::json;

namespace {

json line_json(const std::string &sid, int idx, bool target, double score = 3.0, std::optional<double> dur = 2.0) {
    json j = {{"story_id", sid}, {"line_index", idx}, {"speaker_role", target ? "A" : ""},
              {"text", "line " + std::to_string(idx)}, {"is_target_capable", target}};
    if (target) {
        j.update({{"expressive_score", score}, {"tts_difficulty", 1.0}, {"intonation", "flat"},
                  {"rhythm", "brisk"}, {"emotion", " calm "}, {"recording_condition", "normal speech"},
                  {"bgm_present", false}, {"speaker_gender", "male"}, {"speaker_age", "adult"},
                  {"refined_context", "c"}, {"utterance_boundaries", {{"start", 0.0}, {"end", 1.0}}},
                  {"audio_ref", "x.wav"}});
        if (dur) j["duration"] = *dur;
    }
    return j;
}

Corpus parse_lines(const std::vector<json> &lines) {
    std::stringstream ss;
    for (const auto &l : lines) ss << l.dump() << '\n';
    return parse_corpus(ss);
}

Errc code_of(const std::vector<json> &lines) {
    try {
        parse_lines(lines);
    } catch (const Error &e) {
        return e.code();
    }
    return Errc::kConfigError;  // sentinel: no error
}

Corpus scored_corpus(const std::vector<double> &scores, const std::vector<double> &durations) {
    Corpus c;
    Story s;
    s.story_id = "s";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        s.lines.push_back({static_cast<int>(i), "A", "t" + std::to_string(i), true});
        s.annotations.push_back(testkit::make_annotation(scores[i], durations[i]));
    }
    c.stories.push_back(std::move(s));
    return c;
}

} // namespace

TEST(Corpus, LoadsAndRoundTrips) {
    auto c = parse_lines({line_json("a", 1, true), line_json("a", 0, false), line_json("b", 0, true, 4.5)});
    ASSERT_EQ(c.stories.size(), 2u);
    EXPECT_EQ(c.line_count(), 3u);
    EXPECT_EQ(c.annotated_count(), 2u);
    EXPECT_EQ(c.stories[0].lines[0].line_index, 0);
    // free text is trimmed, nothing else
    EXPECT_EQ(c.stories[0].annotations[1]->emotion, "calm");

    std::stringstream out;
    save_corpus(c, out);
    std::stringstream in(out.str());
    EXPECT_EQ(parse_corpus(in), c);
}

TEST(Corpus, ToyCorpusIsValid) {
    auto c = load_corpus(std::filesystem::path(CEAEVAL_DATA_DIR) / "toy_corpus.jsonl");
    EXPECT_EQ(c.stories.size(), 3u);
    EXPECT_EQ(c.line_count(), 40u);
    EXPECT_NO_THROW(validate(c));
}

TEST(Corpus, RejectsBadRecords) {
    EXPECT_EQ(code_of({line_json("a", 0, true, 5.5)}), Errc::kInvariantViolation);
    auto bad_enum = line_json("a", 0, true);
    bad_enum["rhythm"] = "wobbly";
    EXPECT_EQ(code_of({bad_enum}), Errc::kInvariantViolation);
    auto missing = line_json("a", 0, true);
    missing.erase("emotion");
    EXPECT_EQ(code_of({missing}), Errc::kMalformedRecord);
    auto extra = line_json("a", 0, false);
    extra["expressive_score"] = 1.0;
    EXPECT_EQ(code_of({extra}), Errc::kMalformedRecord);
    // gap in line indices
    EXPECT_EQ(code_of({line_json("a", 0, false), line_json("a", 2, false)}), Errc::kInvariantViolation);
    // story split across the file
    EXPECT_EQ(code_of({line_json("a", 0, false), line_json("b", 0, false), line_json("a", 1, false)}),
              Errc::kInvariantViolation);
    EXPECT_EQ(code_of({line_json("a", 0, true, 3.0, -1.0)}), Errc::kInvariantViolation);
}

TEST(Corpus, MalformedJsonReportsLine) {
    std::stringstream ss(line_json("a", 0, false).dump() + "\n{not json\n");
    try {
        parse_corpus(ss);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::kMalformedRecord);
        ASSERT_TRUE(e.line);
        EXPECT_EQ(*e.line, 2u);
    }
}

TEST(Corpus, FilterKeepsInclusiveRange) {
    auto c = scored_corpus({1, 2, 3, 4, 5, 1}, {0.999, 1.0, 20.0, 45.0, 45.001, 60.0});
    auto f = filter_for_rl(c, 1.0, 45.0);
    std::vector<bool> kept;
    for (const auto &a : f.stories[0].annotations) kept.push_back(a.has_value());
    EXPECT_EQ(kept, (std::vector<bool>{false, true, true, true, false, false}));
    EXPECT_FALSE(f.stories[0].lines[0].is_target_capable);
    EXPECT_NO_THROW(validate(f));
}

TEST(Corpus, FilterNeedsDuration) {
    auto c = scored_corpus({1.0}, {2.0});
    c.stories[0].annotations[0]->duration.reset();
    try {
        filter_for_rl(c);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::kMissingDuration);
    }
}

TEST(Corpus, RebalanceIsUniformAndDeterministic) {
    std::vector<double> scores, durs;
    // heavily skewed: many 4.x, few of the rest
    for (int i = 0; i < 40; ++i) scores.push_back(4.0 + (i % 10) * 0.09);
    for (double s : {0.5, 1.5, 1.7, 2.2, 3.9, 5.0}) scores.push_back(s);
    durs.assign(scores.size(), 3.0);
    auto c = scored_corpus(scores, durs);

    for (std::size_t size : {46u, 60u, 7u}) {
        auto r = rebalance_by_score(c, 99, size);
        EXPECT_EQ(r.annotated_count(), size);
        auto hist = testkit::bucket_histogram(r);
        const double uniform = static_cast<double>(size) / 6.0;
        for (auto h : hist) EXPECT_LE(std::abs(static_cast<double>(h) - uniform), 1.0);
        EXPECT_EQ(r, rebalance_by_score(c, 99, size));
        EXPECT_NO_THROW(validate(r));
    }
    EXPECT_NE(rebalance_by_score(c, 1), rebalance_by_score(c, 2));
}

TEST(Corpus, RebalanceEmptyThrows) {
    Corpus c;
    try {
        rebalance_by_score(c, 0);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::kEmptyCorpus);
    }
}
