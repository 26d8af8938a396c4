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

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ceaeval/context.hpp"
#include "ceaeval/corpus.hpp"

namespace ceaeval::planner {

/// Ideal delivery of a target utterance as inferred from its text context.
struct ExpressivePlan {
    std::string emotion;
    corpus::Rhythm rhythm = corpus::Rhythm::kRelaxed;
    corpus::Intonation intonation = corpus::Intonation::kFlat;
    std::string recording_condition;

    bool operator==(const ExpressivePlan &) const = default;
};

struct PlanBallot {
    int cts = 0;
    ExpressivePlan plan;
};

/// Maps free-ish planner phrasing ("soothing", "rising intonation") onto the
/// closed rhythm/intonation sets. Matching is case-insensitive with
/// whitespace collapsed.
class AliasTable {
public:
    // The table compiled in from resources/plan_aliases.tsv.
    static const AliasTable &builtin();
    // Lines of "field<TAB>alias<TAB>canonical"; '#' starts a comment.
    static AliasTable parse(std::string_view tsv);
    static AliasTable load(const std::filesystem::path &path);

    std::optional<corpus::Rhythm> rhythm(std::string_view value) const;
    std::optional<corpus::Intonation> intonation(std::string_view value) const;

private:
    std::map<std::string, corpus::Rhythm> m_rhythm;
    std::map<std::string, corpus::Intonation> m_intonation;
};

std::string render_planner_prompt(const context::ContextWindow &window,
                                  std::string_view target_text,
                                  const context::RenderOptions &opts = {});

/// Extracts the first well-formed JSON object carrying the four plan keys.
/// Keys match case-insensitively and accept '_' or '-' for the space in
/// "recording condition". Markdown fences and surrounding prose are ignored.
/// Throws NoPlanFound, MissingField(field) or UnknownCategory(field).
ExpressivePlan parse_plan(std::string_view raw, const AliasTable &aliases = AliasTable::builtin());

/// Compact JSON in the planner output schema; parse_plan inverts it.
std::string serialize_plan(const ExpressivePlan &plan);

struct VoteOptions {
    // Compare free-text fields byte-for-byte instead of after lowercasing
    // and whitespace collapse.
    bool strict_equality = false;
};

struct VoteOutcome {
    ExpressivePlan plan;    // taken from the winning group's largest-cts ballot
    int votes = 0;          // size of the winning group
    int max_cts = 0;        // largest cts inside the winning group
    std::size_t groups = 0; // number of distinct joint plans
};

/// Joint-plan majority vote; frequency ties go to the group whose largest cts
/// is the largest. Throws EmptyBallots, or InvariantViolation("cts") when a
/// context size appears twice.
VoteOutcome tally_plans(std::span<const PlanBallot> ballots, const VoteOptions &opts = {});
ExpressivePlan vote_plans(std::span<const PlanBallot> ballots, const VoteOptions &opts = {});

} // namespace ceaeval::planner
