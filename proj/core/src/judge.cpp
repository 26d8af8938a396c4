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

#include "ceaeval/judge.hpp"

#include <cmath>
#include <regex>

#include <fmt/format.h>

#include "ceaeval/error.hpp"
#include "ceaeval/templates.hpp"
#include "ceaeval/text.hpp"

namespace ceaeval::judge {

namespace {

void add_mode_section(TemplateArgs &args, JudgeMode mode) {
    args.sections.insert(mode == JudgeMode::kWithCot ? "with_cot" : "without_cot");
}

void add_plan_values(TemplateArgs &args, const planner::ExpressivePlan &plan, std::string_view prefix,
                     std::string_view recording_key) {
    args.values[fmt::format("{}_emotion", prefix)] = plan.emotion;
    args.values[fmt::format("{}_rhythm", prefix)] = std::string(corpus::to_string(plan.rhythm));
    args.values[fmt::format("{}_intonation", prefix)] = std::string(corpus::to_string(plan.intonation));
    args.values[fmt::format("{}_{}", prefix, recording_key)] = plan.recording_condition;
}

Error score_out_of_range(double v) {
    Error e(Errc::kScoreOutOfRange, "score", fmt::format("score {} outside [0, 5]", v));
    e.value = v;
    return e;
}

struct Dimension {
    const char *key;
    const char *pattern;
};

constexpr Dimension kDimensions[] = {
    {"emotion", "emotion"},
    {"rhythm", "rhythm"},
    {"intonation", "intonation"},
    {"recording_condition", "recording[ _-]?condition"},
};

bool is_delimiter(std::string_view t) {
    return t == tokens::kAudioOpen || t == tokens::kAudioClose || t == tokens::kCotOpen ||
           t == tokens::kCotClose || t == tokens::kFocusOpen || t == tokens::kFocusClose ||
           t == tokens::kScoreOpen || t == tokens::kScoreClose;
}

std::string strip_region_tokens(std::string_view s) {
    std::string out(s);
    for (auto tok : {tokens::kCotOpen, tokens::kCotClose, tokens::kFocusOpen, tokens::kFocusClose}) {
        for (auto pos = out.find(tok); pos != std::string::npos; pos = out.find(tok, pos)) {
            out.erase(pos, tok.size());
        }
    }
    return std::string(text::trim(out));
}

} // namespace

std::string_view to_string(JudgeMode mode) {
    return mode == JudgeMode::kWithCot ? "with_cot" : "without_cot";
}

std::string_view to_string(Language lang) { return lang == Language::kEn ? "en" : "zh"; }

std::optional<JudgeMode> parse_mode(std::string_view s) {
    if (s == "with_cot" || s == "cot") return JudgeMode::kWithCot;
    if (s == "without_cot" || s == "plain") return JudgeMode::kWithoutCot;
    return std::nullopt;
}

std::optional<Language> parse_language(std::string_view s) {
    if (s == "en") return Language::kEn;
    if (s == "zh") return Language::kZh;
    return std::nullopt;
}

std::string_view to_string(Region r) {
    switch (r) {
    case Region::kPrompt: return "prompt";
    case Region::kAudio: return "audio";
    case Region::kCot: return "cot";
    case Region::kFocus: return "focus";
    case Region::kScore: return "score";
    case Region::kBase: return "base";
    }
    return "base";
}

std::string format_score(double score) {
    std::string one = fmt::format("{:.1f}", score);
    if (auto back = text::parse_double(one); back && *back == score) return one;
    return fmt::format("{}", score);
}

std::string format_score_tag(double score) {
    return fmt::format("{}{:.1f}{}", tokens::kScoreOpen, score, tokens::kScoreClose);
}

std::string render_judge_prompt(const planner::ExpressivePlan &plan, JudgeMode mode, Language lang) {
    TemplateArgs args;
    add_plan_values(args, plan, "ideal", "recording_condition");
    add_mode_section(args, mode);
    return render_template(template_source(lang == Language::kEn ? TemplateId::kJudgeEn : TemplateId::kJudgeZh),
                           args);
}

std::string render_cot_gen_prompt(std::string_view target_line,
                                  const planner::ExpressivePlan &ideal,
                                  const corpus::AnnotationRecord &actual,
                                  double score,
                                  std::optional<std::string_view> sounds) {
    if (!(score >= 0.0 && score <= 5.0)) throw score_out_of_range(score);

    TemplateArgs args;
    args.values["target_line"] = std::string(target_line);
    add_plan_values(args, ideal, "ideal", "record_condition");
    args.values["actual_emotion"] = actual.emotion;
    args.values["actual_rhythm"] = std::string(corpus::to_string(actual.rhythm));
    args.values["actual_intonation"] = std::string(corpus::to_string(actual.intonation));
    args.values["actual_record_condition"] = actual.recording_condition;
    args.values["actual_score"] = format_score(score);
    if (sounds && !text::trim(*sounds).empty()) {
        args.sections.insert("sounds");
        args.values["linguistic_sounds"] = std::string(text::trim(*sounds));
    }
    return render_template(template_source(TemplateId::kCotGenEn), args);
}

std::string render_baseline_prompt(const context::ContextWindow &window,
                                   std::string_view target_line,
                                   Language lang,
                                   JudgeMode mode,
                                   const context::RenderOptions &opts) {
    TemplateArgs args;
    args.values["context"] = context::render_lines(window, opts);
    args.values["target_line"] = std::string(target_line);
    add_mode_section(args, mode);
    return render_template(
        template_source(lang == Language::kEn ? TemplateId::kBaselineEn : TemplateId::kBaselineZh), args);
}

JudgeVerdict parse_verdict(std::string_view raw, JudgeMode mode) {
    static const std::regex kScoreSpan(R"(<(s|score)>([^<]*)</\1>)", std::regex::ECMAScript);

    JudgeVerdict verdict;
    verdict.raw = std::string(raw);

    std::match_results<std::string_view::const_iterator> last;
    bool found = false;
    for (std::regex_iterator<std::string_view::const_iterator> it(raw.begin(), raw.end(), kScoreSpan), end;
         it != end; ++it) {
        last = *it;
        found = true;
    }
    if (!found) throw Error(Errc::kNoScoreFound, "no <s> or <score> span in judge output");

    std::string body = last[2].str();
    auto value = text::parse_double(body);
    if (!value || !std::isfinite(*value)) {
        throw Error(Errc::kUnparsableNumber, "score", fmt::format("cannot parse '{}'", body));
    }
    if (!(*value >= 0.0 && *value <= 5.0)) throw score_out_of_range(*value);
    verdict.final_score = *value;

    auto prefix_len = static_cast<std::size_t>(last.position(0));
    std::string cot = strip_region_tokens(raw.substr(0, prefix_len));
    if (mode == JudgeMode::kWithCot || !cot.empty()) verdict.cot_text = cot;

    if (!cot.empty()) {
        for (const auto &dim : kDimensions) {
            std::regex re(fmt::format(R"(\b{}\s+score\s+of\s+([0-9]+(?:\.[0-9]+)?))", dim.pattern),
                          std::regex::ECMAScript | std::regex::icase);
            std::smatch m;
            if (!std::regex_search(cot, m, re)) continue;
            auto v = text::parse_double(m[1].str());
            if (v && *v >= 0.0 && *v <= 5.0) verdict.dimension_scores[dim.key] = *v;
        }
    }
    return verdict;
}

AnnotatedSequence annotate_regions(std::span<const std::string> prompt_tokens,
                                   std::optional<Span> audio_span,
                                   std::span<const std::string> output_tokens,
                                   const AnnotateOptions &opts) {
    AnnotatedSequence seq;
    seq.prompt_length = prompt_tokens.size();
    seq.tokens.reserve(prompt_tokens.size() + output_tokens.size());
    for (const auto &t : prompt_tokens) seq.tokens.push_back({t, Region::kBase});
    for (const auto &t : output_tokens) seq.tokens.push_back({t, Region::kBase});

    enum class Open { kNone, kAudio, kCot, kScore };
    Open open = Open::kNone;
    bool in_focus = false;
    std::optional<std::size_t> audio_open, audio_close;
    std::size_t region_start = 0;
    std::size_t focus_start = 0;

    auto unbalanced = [](std::string_view tok) {
        return Error(Errc::kUnbalancedDelimiter, std::string(tok), "unbalanced region delimiter");
    };
    auto fill = [&](std::size_t from, std::size_t to, Region r) {
        for (std::size_t i = from; i <= to; ++i) seq.tokens[i].region = r;
    };

    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        std::string_view tok = seq.tokens[i].text;
        if (tok == tokens::kAudioOpen) {
            if (open != Open::kNone || audio_open) {
                throw Error(Errc::kNestedAudio, std::string(tok), "audio span nested or repeated");
            }
            if (i >= seq.prompt_length) {
                throw Error(Errc::kNestedAudio, std::string(tok), "audio span must lie in the prompt");
            }
            open = Open::kAudio;
            audio_open = i;
            region_start = i;
        } else if (tok == tokens::kAudioClose) {
            if (open != Open::kAudio) throw unbalanced(tok);
            open = Open::kNone;
            audio_close = i;
            fill(region_start, i, Region::kAudio);
        } else if (tok == tokens::kCotOpen) {
            if (open != Open::kNone) throw unbalanced(tok);
            open = Open::kCot;
            region_start = i;
        } else if (tok == tokens::kCotClose) {
            if (open != Open::kCot) throw unbalanced(tok);
            if (in_focus) throw unbalanced(tokens::kFocusOpen);
            open = Open::kNone;
            // focus spans inside were tagged already
            for (std::size_t k = region_start; k <= i; ++k) {
                if (seq.tokens[k].region != Region::kFocus) seq.tokens[k].region = Region::kCot;
            }
        } else if (tok == tokens::kFocusOpen) {
            if (open != Open::kCot || in_focus) throw unbalanced(tok);
            in_focus = true;
            focus_start = i;
        } else if (tok == tokens::kFocusClose) {
            if (!in_focus) throw unbalanced(tok);
            in_focus = false;
            fill(focus_start, i, Region::kFocus);
        } else if (tok == tokens::kScoreOpen) {
            if (open != Open::kNone) throw unbalanced(tok);
            open = Open::kScore;
            region_start = i;
        } else if (tok == tokens::kScoreClose) {
            if (open != Open::kScore) throw unbalanced(tok);
            open = Open::kNone;
            fill(region_start, i, Region::kScore);
        }
    }

    switch (open) {
    case Open::kAudio: throw unbalanced(tokens::kAudioOpen);
    case Open::kCot: throw unbalanced(in_focus ? tokens::kFocusOpen : tokens::kCotOpen);
    case Open::kScore: throw unbalanced(tokens::kScoreOpen);
    case Open::kNone: break;
    }

    if (audio_span) {
        if (!audio_open || audio_span->start != *audio_open || audio_span->end != *audio_close) {
            throw Error(Errc::kInvariantViolation, "audio_span", "audio span does not match <a>...</a>");
        }
    }
    if (audio_open) {
        for (std::size_t i = 0; i < *audio_open; ++i) {
            if (seq.tokens[i].region == Region::kBase) seq.tokens[i].region = Region::kPrompt;
        }
    }
    if (!opts.delimiters_in_region) {
        for (auto &t : seq.tokens) {
            if (is_delimiter(t.text)) t.region = Region::kBase;
        }
    }
    return seq;
}

} // namespace ceaeval::judge
