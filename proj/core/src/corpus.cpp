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

#include "ceaeval/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ceaeval/error.hpp"
#include "ceaeval/reward.hpp"
#include "ceaeval/text.hpp"

namespace ceaeval::corpus {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kIntonationNames = {"flat", "rising", "curved", "falling"};
constexpr std::array<std::string_view, 6> kRhythmNames = {"brisk", "heavy", "low-paced",
                                                          "high-energy", "relaxed", "tense"};
constexpr std::array<std::string_view, 3> kGenderNames = {"male", "female", "unknown"};

const std::set<std::string, std::less<>> kLineKeys = {
    "story_id", "line_index", "speaker_role", "text", "is_target_capable"};
const std::set<std::string, std::less<>> kRequiredAnnotationKeys = {
    "expressive_score", "tts_difficulty", "intonation", "rhythm", "emotion",
    "recording_condition", "bgm_present", "speaker_gender", "speaker_age",
    "refined_context", "utterance_boundaries", "audio_ref"};
const std::set<std::string, std::less<>> kOptionalAnnotationKeys = {
    "paralinguistic_vocalizations", "sound_events", "duration"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N> &names, std::string_view s) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == s) return static_cast<Enum>(i);
    }
    return std::nullopt;
}

Error malformed(std::size_t line_no, std::string reason) {
    Error e(Errc::kMalformedRecord, fmt::format("line {}: {}", line_no, reason));
    e.line = line_no;
    return e;
}

// Typed accessors: any type mismatch is a malformed record.
const json &require(const json &obj, std::string_view key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw malformed(line_no, fmt::format("missing key '{}'", key));
    return *it;
}

std::string get_string(const json &obj, std::string_view key, std::size_t line_no) {
    const json &v = require(obj, key, line_no);
    if (!v.is_string()) throw malformed(line_no, fmt::format("'{}' must be a string", key));
    return std::string(text::trim(v.get_ref<const std::string &>()));
}

double get_number(const json &obj, std::string_view key, std::size_t line_no) {
    const json &v = require(obj, key, line_no);
    if (!v.is_number()) throw malformed(line_no, fmt::format("'{}' must be a number", key));
    return v.get<double>();
}

bool get_bool(const json &obj, std::string_view key, std::size_t line_no) {
    const json &v = require(obj, key, line_no);
    if (!v.is_boolean()) throw malformed(line_no, fmt::format("'{}' must be a boolean", key));
    return v.get<bool>();
}

std::optional<std::string> get_optional_string(const json &obj, std::string_view key,
                                               std::size_t line_no) {
    if (!obj.contains(key) || obj.at(std::string(key)).is_null()) return std::nullopt;
    return get_string(obj, key, line_no);
}

void check_score(std::string_view field, double v) {
    if (!(v >= 0.0 && v <= 5.0)) throw invariant_violation(std::string(field), v);
}

struct ParsedRecord {
    std::string story_id;
    StoryLine line;
    std::optional<AnnotationRecord> annotation;
    std::size_t file_line = 0;
};

ParsedRecord parse_record(const json &obj, std::size_t line_no) {
    if (!obj.is_object()) throw malformed(line_no, "record is not a JSON object");
    for (const auto &[key, _] : obj.items()) {
        if (!kLineKeys.contains(key) && !kRequiredAnnotationKeys.contains(key) &&
            !kOptionalAnnotationKeys.contains(key)) {
            throw malformed(line_no, fmt::format("unknown key '{}'", key));
        }
    }

    ParsedRecord rec;
    rec.file_line = line_no;
    rec.story_id = get_string(obj, "story_id", line_no);
    const json &idx = require(obj, "line_index", line_no);
    if (!idx.is_number_integer()) throw malformed(line_no, "'line_index' must be an integer");
    rec.line.line_index = idx.get<int>();
    rec.line.speaker_role = get_string(obj, "speaker_role", line_no);
    rec.line.text = get_string(obj, "text", line_no);
    rec.line.is_target_capable = get_bool(obj, "is_target_capable", line_no);

    if (!rec.line.is_target_capable) {
        for (const auto &[key, _] : obj.items()) {
            if (kRequiredAnnotationKeys.contains(key) || kOptionalAnnotationKeys.contains(key)) {
                throw malformed(line_no, fmt::format("annotation key '{}' on a non-target line", key));
            }
        }
        return rec;
    }

    AnnotationRecord a;
    a.expressive_score = get_number(obj, "expressive_score", line_no);
    a.tts_difficulty = get_number(obj, "tts_difficulty", line_no);

    std::string intonation = get_string(obj, "intonation", line_no);
    auto into = parse_intonation(intonation);
    if (!into) throw invariant_violation("intonation", intonation);
    a.intonation = *into;

    std::string rhythm = get_string(obj, "rhythm", line_no);
    auto rh = parse_rhythm(rhythm);
    if (!rh) throw invariant_violation("rhythm", rhythm);
    a.rhythm = *rh;

    a.emotion = get_string(obj, "emotion", line_no);
    a.recording_condition = get_string(obj, "recording_condition", line_no);
    a.paralinguistic_vocalizations = get_optional_string(obj, "paralinguistic_vocalizations", line_no);
    a.sound_events = get_optional_string(obj, "sound_events", line_no);
    a.bgm_present = get_bool(obj, "bgm_present", line_no);

    std::string gender = get_string(obj, "speaker_gender", line_no);
    auto g = parse_gender(gender);
    if (!g) throw invariant_violation("speaker_gender", gender);
    a.speaker_gender = *g;

    a.speaker_age = get_string(obj, "speaker_age", line_no);
    a.refined_context = get_string(obj, "refined_context", line_no);

    const json &bounds = require(obj, "utterance_boundaries", line_no);
    if (!bounds.is_object()) throw malformed(line_no, "'utterance_boundaries' must be an object");
    a.utterance_boundaries.start = get_number(bounds, "start", line_no);
    a.utterance_boundaries.end = get_number(bounds, "end", line_no);

    a.audio_ref = get_string(obj, "audio_ref", line_no);
    if (obj.contains("duration") && !obj.at("duration").is_null()) {
        a.duration = get_number(obj, "duration", line_no);
    }
    rec.annotation = std::move(a);
    return rec;
}

void validate_annotation(const AnnotationRecord &a) {
    check_score("expressive_score", a.expressive_score);
    check_score("tts_difficulty", a.tts_difficulty);
    const auto &b = a.utterance_boundaries;
    if (!std::isfinite(b.start) || !std::isfinite(b.end) || !(b.end > b.start)) {
        throw invariant_violation("utterance_boundaries", b.end);
    }
    if (a.duration && !(*a.duration > 0.0 && std::isfinite(*a.duration))) {
        throw invariant_violation("duration", *a.duration);
    }
}

json to_json(const std::string &story_id, const StoryLine &line,
             const std::optional<AnnotationRecord> &annotation) {
    json obj = {
        {"story_id", story_id},
        {"line_index", line.line_index},
        {"speaker_role", line.speaker_role},
        {"text", line.text},
        {"is_target_capable", line.is_target_capable},
    };
    if (!annotation) return obj;
    const AnnotationRecord &a = *annotation;
    obj["expressive_score"] = a.expressive_score;
    obj["tts_difficulty"] = a.tts_difficulty;
    obj["intonation"] = to_string(a.intonation);
    obj["rhythm"] = to_string(a.rhythm);
    obj["emotion"] = a.emotion;
    obj["recording_condition"] = a.recording_condition;
    if (a.paralinguistic_vocalizations) obj["paralinguistic_vocalizations"] = *a.paralinguistic_vocalizations;
    if (a.sound_events) obj["sound_events"] = *a.sound_events;
    obj["bgm_present"] = a.bgm_present;
    obj["speaker_gender"] = to_string(a.speaker_gender);
    obj["speaker_age"] = a.speaker_age;
    obj["refined_context"] = a.refined_context;
    obj["utterance_boundaries"] = {{"start", a.utterance_boundaries.start},
                                   {"end", a.utterance_boundaries.end}};
    obj["audio_ref"] = a.audio_ref;
    if (a.duration) obj["duration"] = *a.duration;
    return obj;
}

} // namespace

std::string_view to_string(Intonation v) { return kIntonationNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Rhythm v) { return kRhythmNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Gender v) { return kGenderNames[static_cast<std::size_t>(v)]; }

std::optional<Intonation> parse_intonation(std::string_view s) {
    return lookup<Intonation>(kIntonationNames, s);
}
std::optional<Rhythm> parse_rhythm(std::string_view s) { return lookup<Rhythm>(kRhythmNames, s); }
std::optional<Gender> parse_gender(std::string_view s) { return lookup<Gender>(kGenderNames, s); }

std::size_t Story::annotated_count() const {
    return static_cast<std::size_t>(
        std::count_if(annotations.begin(), annotations.end(), [](const auto &a) { return a.has_value(); }));
}

std::size_t Corpus::line_count() const {
    std::size_t n = 0;
    for (const auto &s : stories) n += s.lines.size();
    return n;
}

std::size_t Corpus::annotated_count() const {
    std::size_t n = 0;
    for (const auto &s : stories) n += s.annotated_count();
    return n;
}

const Story *Corpus::find(std::string_view story_id) const {
    for (const auto &s : stories) {
        if (s.story_id == story_id) return &s;
    }
    return nullptr;
}

std::vector<TargetRef> annotated_targets(const Corpus &corpus) {
    std::vector<TargetRef> out;
    for (std::size_t s = 0; s < corpus.stories.size(); ++s) {
        const auto &story = corpus.stories[s];
        for (std::size_t l = 0; l < story.lines.size(); ++l) {
            if (story.annotations[l]) out.push_back({s, l});
        }
    }
    return out;
}

void validate(const Corpus &corpus) {
    std::set<std::string, std::less<>> seen;
    for (const auto &story : corpus.stories) {
        if (story.story_id.empty()) throw invariant_violation("story_id", story.story_id);
        if (!seen.insert(story.story_id).second) throw invariant_violation("story_id", story.story_id);
        if (story.annotations.size() != story.lines.size()) {
            throw Error(Errc::kInvariantViolation, "annotations",
                        "annotation vector does not match the story lines");
        }
        for (std::size_t i = 0; i < story.lines.size(); ++i) {
            const StoryLine &line = story.lines[i];
            if (line.line_index != static_cast<int>(i)) {
                throw invariant_violation("line_index", static_cast<double>(line.line_index));
            }
            if (text::trim(line.text).empty()) throw invariant_violation("text", line.text);
            if (line.is_target_capable != story.annotations[i].has_value()) {
                throw Error(Errc::kInvariantViolation, "is_target_capable",
                            fmt::format("{}:{} target flag does not match annotation presence",
                                        story.story_id, line.line_index));
            }
            if (story.annotations[i]) validate_annotation(*story.annotations[i]);
        }
    }
}

Corpus parse_corpus(std::istream &in) {
    std::vector<ParsedRecord> records;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (text::trim(raw).empty()) continue;
        json obj;
        try {
            obj = json::parse(raw);
        } catch (const json::parse_error &e) {
            throw malformed(line_no, e.what());
        }
        try {
            auto rec = parse_record(obj, line_no);
            if (rec.annotation) validate_annotation(*rec.annotation);
            records.push_back(std::move(rec));
        } catch (Error &e) {
            if (!e.line) e.line = line_no;
            throw;
        }
    }
    if (in.bad()) throw Error(Errc::kIoFailure, "read error");

    Corpus corpus;
    std::set<std::string, std::less<>> closed;
    for (std::size_t i = 0; i < records.size();) {
        const std::string &sid = records[i].story_id;
        if (closed.contains(sid)) {
            Error e = invariant_violation("story_id", sid);
            e.line = records[i].file_line;
            throw e;
        }
        std::size_t j = i;
        while (j < records.size() && records[j].story_id == sid) ++j;

        std::vector<ParsedRecord *> group;
        for (std::size_t k = i; k < j; ++k) group.push_back(&records[k]);
        std::stable_sort(group.begin(), group.end(), [](const ParsedRecord *a, const ParsedRecord *b) {
            return a->line.line_index < b->line.line_index;
        });

        Story story;
        story.story_id = sid;
        for (std::size_t k = 0; k < group.size(); ++k) {
            if (group[k]->line.line_index != static_cast<int>(k)) {
                Error e = invariant_violation("line_index", static_cast<double>(group[k]->line.line_index));
                e.line = group[k]->file_line;
                throw e;
            }
            story.lines.push_back(std::move(group[k]->line));
            story.annotations.push_back(std::move(group[k]->annotation));
        }
        closed.insert(sid);
        corpus.stories.push_back(std::move(story));
        i = j;
    }
    validate(corpus);
    return corpus;
}

Corpus load_corpus(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::kIoFailure, path.string(), "cannot open corpus file");
    return parse_corpus(in);
}

void save_corpus(const Corpus &corpus, std::ostream &out) {
    for (const auto &story : corpus.stories) {
        for (std::size_t i = 0; i < story.lines.size(); ++i) {
            out << to_json(story.story_id, story.lines[i], story.annotations[i]).dump() << '\n';
        }
    }
}

void save_corpus(const Corpus &corpus, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kIoFailure, path.string(), "cannot open file for writing");
    save_corpus(corpus, out);
    if (!out) throw Error(Errc::kIoFailure, path.string(), "write failed");
}

Corpus filter_for_rl(const Corpus &corpus, double min_s, double max_s) {
    Corpus out = corpus;
    for (auto &story : out.stories) {
        for (std::size_t i = 0; i < story.lines.size(); ++i) {
            auto &annotation = story.annotations[i];
            if (!annotation) continue;
            if (!annotation->duration) {
                throw Error(Errc::kMissingDuration, fmt::format("{}:{}", story.story_id, i),
                            "annotated line has no duration");
            }
            double d = *annotation->duration;
            if (d < min_s || d > max_s) {
                annotation.reset();
                story.lines[i].is_target_capable = false;
            }
        }
    }
    return out;
}

Corpus rebalance_by_score(const Corpus &corpus, std::uint64_t seed, std::optional<std::size_t> size) {
    auto targets = annotated_targets(corpus);
    if (targets.empty()) throw Error(Errc::kEmptyCorpus, "no annotated lines to resample");
    const std::size_t n = size.value_or(targets.size());

    std::map<int, std::vector<TargetRef>> buckets;
    for (const auto &t : targets) {
        const auto &a = *corpus.stories[t.story].annotations[t.line];
        buckets[reward::bucket(a.expressive_score)].push_back(t);
    }

    const std::size_t k = buckets.size();
    std::mt19937_64 rng(seed);
    std::vector<TargetRef> samples;
    samples.reserve(n);
    std::size_t ordinal = 0;
    for (const auto &[b, members] : buckets) {
        std::size_t quota = n / k + (ordinal < n % k ? 1 : 0);
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        for (std::size_t i = 0; i < quota; ++i) samples.push_back(members[pick(rng)]);
        ++ordinal;
    }
    std::shuffle(samples.begin(), samples.end(), rng);

    Corpus out;
    out.stories.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Story &src = corpus.stories[samples[i].story];
        Story copy;
        copy.story_id = fmt::format("{}#{}", src.story_id, i);
        copy.lines = src.lines;
        copy.annotations.assign(src.lines.size(), std::nullopt);
        for (auto &line : copy.lines) line.is_target_capable = false;
        copy.lines[samples[i].line].is_target_capable = true;
        copy.annotations[samples[i].line] = src.annotations[samples[i].line];
        out.stories.push_back(std::move(copy));
    }
    return out;
}

} // namespace ceaeval::corpus
