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

#include "ceaeval/planner.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ceaeval/error.hpp"
#include "ceaeval/templates.hpp"
#include "ceaeval/text.hpp"

namespace ceaeval::planner {

namespace {

std::string normalize_key(std::string_view key) {
    std::string k = text::to_lower_ascii(key);
    for (char &c : k) {
        if (c == '_' || c == '-') c = ' ';
    }
    return text::collapse_whitespace(k);
}

// Returns the end (one past '}') of the balanced object starting at `open`,
// honouring JSON string literals, or npos when it never closes.
std::size_t match_object(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

constexpr std::string_view kFields[] = {"emotion", "rhythm", "intonation", "recording condition"};

std::string field_value(const std::map<std::string, nlohmann::json> &obj, std::string_view field) {
    auto it = obj.find(std::string(field));
    if (it == obj.end() || !it->second.is_string()) {
        throw Error(Errc::kMissingField, std::string(field), "plan field missing");
    }
    std::string v = text::collapse_whitespace(it->second.get<std::string>());
    if (v.empty()) throw Error(Errc::kMissingField, std::string(field), "plan field empty");
    return v;
}

ExpressivePlan plan_from_object(const std::map<std::string, nlohmann::json> &obj, const AliasTable &aliases) {
    ExpressivePlan plan;
    plan.emotion = field_value(obj, "emotion");
    std::string rhythm = field_value(obj, "rhythm");
    std::string intonation = field_value(obj, "intonation");
    plan.recording_condition = field_value(obj, "recording condition");

    auto rh = aliases.rhythm(rhythm);
    if (!rh) throw Error(Errc::kUnknownCategory, "rhythm", fmt::format("unknown rhythm '{}'", rhythm));
    auto in = aliases.intonation(intonation);
    if (!in) throw Error(Errc::kUnknownCategory, "intonation", fmt::format("unknown intonation '{}'", intonation));
    plan.rhythm = *rh;
    plan.intonation = *in;
    return plan;
}

} // namespace

AliasTable AliasTable::parse(std::string_view tsv) {
    AliasTable table;
    std::size_t line_no = 0;
    for (const auto &raw : text::split(tsv, '\n')) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto cols = text::split(line, '\t');
        if (cols.size() != 3) {
            Error e(Errc::kMalformedRecord, fmt::format("alias table line {}: expected 3 columns", line_no));
            e.line = line_no;
            throw e;
        }
        std::string field = text::canonical(cols[0]);
        std::string alias = text::canonical(cols[1]);
        std::string target = text::canonical(cols[2]);
        if (field == "rhythm") {
            auto v = corpus::parse_rhythm(target);
            if (!v) throw Error(Errc::kUnknownCategory, "rhythm", "alias target " + target);
            table.m_rhythm[alias] = *v;
        } else if (field == "intonation") {
            auto v = corpus::parse_intonation(target);
            if (!v) throw Error(Errc::kUnknownCategory, "intonation", "alias target " + target);
            table.m_intonation[alias] = *v;
        } else {
            throw Error(Errc::kMalformedRecord, field, "alias table field must be rhythm or intonation");
        }
    }
    return table;
}

const AliasTable &AliasTable::builtin() {
    static const AliasTable table = parse(plan_alias_source());
    return table;
}

AliasTable AliasTable::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::kIoFailure, path.string(), "cannot open alias table");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<corpus::Rhythm> AliasTable::rhythm(std::string_view value) const {
    std::string key = text::canonical(value);
    if (auto v = corpus::parse_rhythm(key)) return v;
    if (auto it = m_rhythm.find(key); it != m_rhythm.end()) return it->second;
    return std::nullopt;
}

std::optional<corpus::Intonation> AliasTable::intonation(std::string_view value) const {
    std::string key = text::canonical(value);
    if (auto v = corpus::parse_intonation(key)) return v;
    if (auto it = m_intonation.find(key); it != m_intonation.end()) return it->second;
    return std::nullopt;
}

std::string render_planner_prompt(const context::ContextWindow &window,
                                  std::string_view target_text,
                                  const context::RenderOptions &opts) {
    TemplateArgs args;
    args.values["narrative_context"] = context::render_lines(window, opts);
    args.values["target_utterance"] = std::string(target_text);
    return render_template(template_source(TemplateId::kPlannerEn), args);
}

ExpressivePlan parse_plan(std::string_view raw, const AliasTable &aliases) {
    std::optional<Error> first_incomplete;
    for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
        std::size_t end = match_object(raw, pos);
        if (end == std::string_view::npos) continue;
        auto parsed = nlohmann::json::parse(raw.substr(pos, end - pos), nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) continue;

        std::map<std::string, nlohmann::json> obj;
        for (const auto &[key, value] : parsed.items()) obj.emplace(normalize_key(key), value);

        bool complete = true;
        for (auto field : kFields) {
            auto it = obj.find(std::string(field));
            if (it == obj.end()) {
                complete = false;
                if (!first_incomplete) {
                    first_incomplete.emplace(Errc::kMissingField, std::string(field), "plan field missing");
                }
                break;
            }
        }
        if (complete) return plan_from_object(obj, aliases);
        // an incomplete object may enclose or precede the real plan; keep looking
    }
    if (first_incomplete) throw *first_incomplete;
    throw Error(Errc::kNoPlanFound, "no JSON plan object in planner output");
}

std::string serialize_plan(const ExpressivePlan &plan) {
    nlohmann::ordered_json obj;
    obj["emotion"] = plan.emotion;
    obj["rhythm"] = corpus::to_string(plan.rhythm);
    obj["intonation"] = corpus::to_string(plan.intonation);
    obj["recording condition"] = plan.recording_condition;
    return obj.dump();
}

VoteOutcome tally_plans(std::span<const PlanBallot> ballots, const VoteOptions &opts) {
    if (ballots.empty()) throw Error(Errc::kEmptyBallots, "no ballots to vote on");

    using Key = std::tuple<std::string, int, int, std::string>;
    struct Group {
        int votes = 0;
        int max_cts = 0;
        const PlanBallot *representative = nullptr;
    };
    std::map<Key, Group> groups;
    std::set<int> seen_cts;

    for (const auto &ballot : ballots) {
        if (!seen_cts.insert(ballot.cts).second) {
            throw invariant_violation("cts", static_cast<double>(ballot.cts));
        }
        const auto &p = ballot.plan;
        Key key = opts.strict_equality
                      ? Key{p.emotion, static_cast<int>(p.rhythm), static_cast<int>(p.intonation),
                            p.recording_condition}
                      : Key{text::canonical(p.emotion), static_cast<int>(p.rhythm),
                            static_cast<int>(p.intonation), text::canonical(p.recording_condition)};
        Group &g = groups[key];
        ++g.votes;
        if (!g.representative || ballot.cts > g.max_cts) {
            g.max_cts = ballot.cts;
            g.representative = &ballot;
        }
    }

    const Group *best = nullptr;
    for (const auto &[_, g] : groups) {
        if (!best || g.votes > best->votes || (g.votes == best->votes && g.max_cts > best->max_cts)) {
            best = &g;
        }
    }
    return VoteOutcome{best->representative->plan, best->votes, best->max_cts, groups.size()};
}

ExpressivePlan vote_plans(std::span<const PlanBallot> ballots, const VoteOptions &opts) {
    return tally_plans(ballots, opts).plan;
}

} // namespace ceaeval::planner
