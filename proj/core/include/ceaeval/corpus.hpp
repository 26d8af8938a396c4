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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ceaeval::corpus {

enum class Intonation { kFlat, kRising, kCurved, kFalling };
enum class Rhythm { kBrisk, kHeavy, kLowPaced, kHighEnergy, kRelaxed, kTense };
enum class Gender { kMale, kFemale, kUnknown };

std::string_view to_string(Intonation v);
std::string_view to_string(Rhythm v);
std::string_view to_string(Gender v);

// Exact canonical spelling only ("low-paced", "high-energy", ...).
std::optional<Intonation> parse_intonation(std::string_view s);
std::optional<Rhythm> parse_rhythm(std::string_view s);
std::optional<Gender> parse_gender(std::string_view s);

struct UtteranceBoundaries {
    double start = 0.0;
    double end = 0.0;

    bool operator==(const UtteranceBoundaries &) const = default;
};

/// Per-utterance human annotation.
struct AnnotationRecord {
    double expressive_score = 0.0;  // [0, 5]
    double tts_difficulty = 0.0;    // [0, 5]
    Intonation intonation = Intonation::kFlat;
    Rhythm rhythm = Rhythm::kRelaxed;
    std::string emotion;
    std::string recording_condition;
    std::optional<std::string> paralinguistic_vocalizations;
    std::optional<std::string> sound_events;
    bool bgm_present = false;
    Gender speaker_gender = Gender::kUnknown;
    std::string speaker_age;
    std::string refined_context;
    UtteranceBoundaries utterance_boundaries;
    std::string audio_ref;
    // Seconds. Required only by the RL curation step.
    std::optional<double> duration;

    bool operator==(const AnnotationRecord &) const = default;
};

struct StoryLine {
    int line_index = 0;
    std::string speaker_role;
    std::string text;
    bool is_target_capable = false;

    bool operator==(const StoryLine &) const = default;
};

struct Story {
    std::string story_id;
    std::vector<StoryLine> lines;
    // Parallel to `lines`; engaged exactly where lines[i].is_target_capable.
    std::vector<std::optional<AnnotationRecord>> annotations;

    std::size_t annotated_count() const;
    bool operator==(const Story &) const = default;
};

struct Corpus {
    std::vector<Story> stories;

    std::size_t line_count() const;
    std::size_t annotated_count() const;
    const Story *find(std::string_view story_id) const;
    bool operator==(const Corpus &) const = default;
};

/// Reference to one annotated line inside a corpus.
struct TargetRef {
    std::size_t story = 0;
    std::size_t line = 0;
};
std::vector<TargetRef> annotated_targets(const Corpus &corpus);

/// Parses line-delimited JSON records. Blank lines are skipped.
/// Throws MalformedRecord (with `line` set), InvariantViolation or IoFailure.
Corpus load_corpus(const std::filesystem::path &path);
Corpus parse_corpus(std::istream &in);

/// Writes the canonical form: stories in order, lines by line_index, keys sorted.
void save_corpus(const Corpus &corpus, std::ostream &out);
void save_corpus(const Corpus &corpus, const std::filesystem::path &path);

/// Checks every Corpus/StoryLine/AnnotationRecord invariant.
void validate(const Corpus &corpus);

/// Drops the annotation of every line whose duration is outside [min_s, max_s].
/// Story structure is kept so context windows stay intact.
Corpus filter_for_rl(const Corpus &corpus, double min_s = 1.0, double max_s = 45.0);

/// Score-balanced resampling with replacement over integer score buckets.
///
/// Each output sample becomes its own story "<story_id>#<n>" holding the
/// full source story with only the sampled line annotated, so the result is
/// a valid corpus with exactly `size` annotated lines (default: input count).
Corpus rebalance_by_score(const Corpus &corpus, std::uint64_t seed,
                          std::optional<std::size_t> size = std::nullopt);

} // namespace ceaeval::corpus
