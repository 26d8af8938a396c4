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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ceaeval/corpus.hpp"
#include "ceaeval/judge.hpp"
#include "ceaeval/llmbackend.hpp"
#include "ceaeval/planner.hpp"

namespace ceaeval::pipeline {

// A backend reference from a run config: either a path to a backend JSON file
// or an inline object. `json_text` holds the resolved document.
struct BackendRef {
    std::string written;  // as it appeared in the config (path or inline dump)
    std::string json_text;
    std::filesystem::path base_dir;

    std::unique_ptr<llm::ChatBackend> make() const;
};

struct AgreementSpec {
    std::string name;
    std::string kind;  // icc | percent | embedding | vad
    std::filesystem::path matrix;
    std::optional<std::filesystem::path> lexicon;  // vad only
    std::string matrix_written;
};

struct RunConfig {
    std::filesystem::path corpus;
    std::string corpus_written;
    std::vector<int> cts{0, 5, 10, 15};
    std::vector<judge::JudgeMode> modes{judge::JudgeMode::kWithCot, judge::JudgeMode::kWithoutCot};
    BackendRef planner_backend;
    BackendRef judge_backend;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs";

    int cts_max = 15;
    judge::Language language = judge::Language::kEn;
    bool use_planner = true;
    bool strict_equality = false;
    bool speaker_roles = true;
    // Fraction of failed (target, cts, mode) units tolerated before exit code 2.
    double failure_threshold = 0.05;
    std::vector<AgreementSpec> agreement;

    // Throws ConfigError. Relative paths resolve against `base_dir`.
    static RunConfig parse(std::string_view json_text, const std::filesystem::path &base_dir);
    static RunConfig load(const std::filesystem::path &path);

    // Sorted-key JSON of everything that affects results. Paths appear as
    // written; backend files are inlined by content; output_dir is left out.
    std::string canonical_json() const;
    std::string config_hash() const;

    void validate() const;
};

struct Target {
    std::string id;  // "<story_id>:<line_index>"
    std::size_t story = 0;
    std::size_t line = 0;
    std::string text;
    std::string audio_ref;
    double human_score = 0.0;
};

std::vector<Target> list_targets(const corpus::Corpus &corpus);

struct LedgerEntry {
    std::string stage;  // plan | judge
    std::string target;
    int cts = 0;
    std::optional<judge::JudgeMode> mode;
    std::string code;
    std::string message;
};

// Ballot cts values feeding an evaluation cell: {0} for cts 0, else 1..min(cts, cts_max).
std::vector<int> ballot_cts_for(int eval_cts, int cts_max);

struct StageOptions {
    std::string config_hash;
    bool resume = false;
    context::RenderOptions render;
    planner::VoteOptions vote;
    judge::Language language = judge::Language::kEn;
};

struct VotedPlan {
    std::string target;
    std::string text;
    std::string audio_ref;
    double human_score = 0.0;
    int cts = 0;
    planner::VoteOutcome outcome;
    std::size_t ballots = 0;
};

struct PlanStageResult {
    std::vector<VotedPlan> plans;
    std::vector<LedgerEntry> errors;
    std::size_t calls = 0;
};

// Requests one planner ballot per (target, ballot cts), then votes per
// (target, eval cts). Writes ballots.jsonl and plans.jsonl into `dir`.
PlanStageResult run_plan_stage(const corpus::Corpus &corpus, const std::vector<Target> &targets,
                               const std::vector<int> &eval_cts, int cts_max, llm::ChatBackend &backend,
                               const StageOptions &opts, const std::filesystem::path &dir);

std::vector<VotedPlan> read_plans(const std::filesystem::path &dir);

struct JudgeJob {
    std::string target;
    int cts = 0;
    judge::JudgeMode mode = judge::JudgeMode::kWithCot;
    std::string system_prompt;
    std::string user_message;
    double human_score = 0.0;
};

std::string judge_user_message(std::string_view text, std::string_view audio_ref);

struct ScoreRecord {
    std::string target;
    int cts = 0;
    judge::JudgeMode mode = judge::JudgeMode::kWithCot;
    double pred = 0.0;
    double ref = 0.0;
};

struct JudgeStageResult {
    std::vector<ScoreRecord> scores;
    std::vector<LedgerEntry> errors;
    std::size_t calls = 0;
};

// Runs every job, writes verdicts.jsonl and scores.jsonl into `dir`.
JudgeStageResult run_judge_stage(const std::vector<JudgeJob> &jobs, llm::ChatBackend &backend,
                                 const StageOptions &opts, const std::filesystem::path &dir);

std::vector<JudgeJob> planner_judge_jobs(const std::vector<VotedPlan> &plans,
                                         const std::vector<judge::JudgeMode> &modes, judge::Language lang);

std::vector<JudgeJob> baseline_judge_jobs(const corpus::Corpus &corpus, const std::vector<Target> &targets,
                                          const std::vector<int> &eval_cts,
                                          const std::vector<judge::JudgeMode> &modes, judge::Language lang,
                                          const context::RenderOptions &render);

// Score records: one JSON object per line with target, cts, mode, pred, ref.
std::vector<ScoreRecord> read_scores(const std::filesystem::path &file);

// ---------------------------------------------------------------------------
// Report

struct CellResult {
    int cts = 0;
    judge::JudgeMode mode = judge::JudgeMode::kWithCot;
    std::optional<double> lcc;  // empty when n < 2 or a side is constant
    double acc = 0.0;
    std::size_t n = 0;
    std::size_t failed = 0;

    bool operator==(const CellResult &) const = default;
};

struct AgreementResult {
    std::string name;
    std::string kind;
    double value = 0.0;

    bool operator==(const AgreementResult &) const = default;
};

struct EvalReport {
    std::string config_hash;
    std::string template_version;
    std::string corpus_hash;
    std::string prompt_path;  // planner | baseline
    std::size_t targets = 0;
    std::size_t units = 0;
    std::size_t failed_units = 0;
    std::vector<CellResult> cells;
    std::vector<AgreementResult> agreement;

    bool operator==(const EvalReport &) const = default;
};

// Groups scores by (cts, mode) and computes LCC / ACC; `cells` lists every
// requested cell even if it ended up empty.
std::vector<CellResult> score_cells(const std::vector<ScoreRecord> &scores, const std::vector<int> &cts,
                                    const std::vector<judge::JudgeMode> &modes);

std::string report_to_json(const EvalReport &report);
EvalReport report_from_json(std::string_view json_text);
// Accepts a run directory or a report.json path.
EvalReport load_report(const std::filesystem::path &path);

enum class ReportFormat { kTable, kCsv, kPlotData };
std::optional<ReportFormat> parse_report_format(std::string_view s);
std::string render_report(const EvalReport &report, ReportFormat format);

// ---------------------------------------------------------------------------
// Runs

struct RunOptions {
    bool resume = false;
    std::optional<std::filesystem::path> output_dir;  // overrides the config
};

struct RunResult {
    EvalReport report;
    std::filesystem::path run_dir;
    std::vector<LedgerEntry> errors;
    int exit_code = 0;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitPartial = 2;

// Config and corpus problems throw; per-utterance failures go to errors.jsonl.
RunResult run_evaluation(const RunConfig &cfg, const RunOptions &opts = {});
RunResult run_evaluation(const RunConfig &cfg, llm::ChatBackend &planner_backend, llm::ChatBackend &judge_backend,
                         const RunOptions &opts = {});

} // namespace ceaeval::pipeline
