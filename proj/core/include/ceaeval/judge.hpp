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

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ceaeval/context.hpp"
#include "ceaeval/corpus.hpp"
#include "ceaeval/planner.hpp"

namespace ceaeval::judge {

enum class JudgeMode { kWithCot, kWithoutCot };
enum class Language { kEn, kZh };

std::string_view to_string(JudgeMode mode);
std::string_view to_string(Language lang);
// Accepts "with_cot"/"cot" and "without_cot"/"plain".
std::optional<JudgeMode> parse_mode(std::string_view s);
std::optional<Language> parse_language(std::string_view s);

struct JudgeVerdict {
    std::optional<std::string> cot_text;
    // Keys: emotion, rhythm, intonation, recording_condition.
    std::map<std::string, double> dimension_scores;
    double final_score = 0.0;
    std::string raw;
};

// Judge system prompt conditioned on a voted plan.
std::string render_judge_prompt(const planner::ExpressivePlan &plan, JudgeMode mode,
                                Language lang = Language::kEn);

// Prompt that asks a teacher model for a CoT explaining a known score.
// Throws ScoreOutOfRange when score is outside [0, 5].
std::string render_cot_gen_prompt(std::string_view target_line,
                                  const planner::ExpressivePlan &ideal,
                                  const corpus::AnnotationRecord &actual,
                                  double score,
                                  std::optional<std::string_view> sounds);

// Planner-free baseline prompt over raw context.
std::string render_baseline_prompt(const context::ContextWindow &window,
                                   std::string_view target_line,
                                   Language lang,
                                   JudgeMode mode,
                                   const context::RenderOptions &opts = {});

/// Reads the final score from the last <s>...</s> or <score>...</score> span.
/// Per-dimension sub-scores ("an emotion score of 4.2") are collected from the
/// text before that span on a best-effort basis.
/// Throws NoScoreFound, UnparsableNumber or ScoreOutOfRange.
JudgeVerdict parse_verdict(std::string_view raw, JudgeMode mode);

// "<s>3.5</s>", one decimal.
std::string format_score_tag(double score);
// One decimal when that is exact, shortest round-trip form otherwise.
std::string format_score(double score);

// ---------------------------------------------------------------------------
// Region annotation

namespace tokens {
inline constexpr std::string_view kAudioOpen = "<a>";
inline constexpr std::string_view kAudioClose = "</a>";
inline constexpr std::string_view kCotOpen = "<t>";
inline constexpr std::string_view kCotClose = "</t>";
inline constexpr std::string_view kFocusOpen = "<f>";
inline constexpr std::string_view kFocusClose = "</f>";
inline constexpr std::string_view kScoreOpen = "<s>";
inline constexpr std::string_view kScoreClose = "</s>";
inline constexpr std::string_view kBos = "<bos>";
} // namespace tokens

enum class Region { kPrompt, kAudio, kCot, kFocus, kScore, kBase };
std::string_view to_string(Region r);

struct TaggedToken {
    std::string text;
    Region region = Region::kBase;
};

struct AnnotatedSequence {
    std::vector<TaggedToken> tokens;
    // Number of leading positions that came from the prompt side; decoding
    // starts right after them.
    std::size_t prompt_length = 0;

    std::size_t size() const { return tokens.size(); }
};

// Inclusive token positions.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;
};

struct AnnotateOptions {
    // Delimiter tokens belong to the region they enclose; false tags them base.
    bool delimiters_in_region = true;
};

/// Tags every position of prompt_tokens ++ output_tokens with one region.
///
/// Prompt tokens ahead of the audio span are the system prompt; a sequence
/// without an audio span therefore has no prompt region. Focus spans must sit
/// inside a CoT span. When `audio_span` is given it has to coincide with the
/// <a>...</a> delimiters. Throws UnbalancedDelimiter, NestedAudio or
/// InvariantViolation("audio_span").
AnnotatedSequence annotate_regions(std::span<const std::string> prompt_tokens,
                                   std::optional<Span> audio_span,
                                   std::span<const std::string> output_tokens,
                                   const AnnotateOptions &opts = {});

} // namespace ceaeval::judge
