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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ceaeval/attnbias.hpp"
#include "ceaeval/context.hpp"
#include "ceaeval/corpus.hpp"
#include "ceaeval/error.hpp"
#include "ceaeval/judge.hpp"
#include "ceaeval/llmbackend.hpp"
#include "ceaeval/metrics.hpp"
#include "ceaeval/pipeline.hpp"
#include "ceaeval/planner.hpp"
#include "ceaeval/reward.hpp"
#include "ceaeval/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ceaeval;

namespace {

void write_corpus(const corpus::Corpus &c, const std::string &out) {
    if (out.empty() || out == "-") corpus::save_corpus(c, std::cout);
    else corpus::save_corpus(c, fs::path(out));
}

std::string summary(const corpus::Corpus &c) {
    return fmt::format("{} stories, {} lines, {} annotated", c.stories.size(), c.line_count(), c.annotated_count());
}

judge::JudgeMode mode_arg(const std::string &s) {
    auto m = judge::parse_mode(s);
    if (!m) throw Error(Errc::kConfigError, "mode", "expected cot|plain, got " + s);
    return *m;
}

judge::Language language_arg(const std::string &s) {
    auto l = judge::parse_language(s);
    if (!l) throw Error(Errc::kConfigError, "language", "expected en|zh, got " + s);
    return *l;
}

// --- bias fixture -----------------------------------------------------------

struct BiasFixture {
    std::vector<std::string> prompt;
    std::optional<judge::Span> audio;
    std::vector<std::string> output;
    Eigen::Index dim = 8;
};

BiasFixture load_fixture(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::kIoFailure, path.string(), "cannot open fixture");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::kMalformedRecord, path.string(), "fixture is not JSON");
    BiasFixture f;
    try {
        f.prompt = j.at("prompt_tokens").get<std::vector<std::string>>();
        f.output = j.at("output_tokens").get<std::vector<std::string>>();
        if (j.contains("audio_span") && !j["audio_span"].is_null()) {
            auto s = j["audio_span"].get<std::vector<std::size_t>>();
            if (s.size() != 2) throw Error(Errc::kMalformedRecord, "audio_span", "expected [start, end]");
            f.audio = judge::Span{s[0], s[1]};
        }
        f.dim = j.value("dim", f.dim);
    } catch (const json::exception &e) {
        throw Error(Errc::kMalformedRecord, path.string(), e.what());
    }
    return f;
}

attnbias::Matrix random_states(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    attnbias::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
    }
    return m;
}

// --- metrics score ----------------------------------------------------------

struct Group {
    std::vector<double> preds, refs;
};

std::map<std::string, double> read_refs(const fs::path &file) {
    std::map<std::string, double> refs;
    std::ifstream in(file);
    if (!in) throw Error(Errc::kIoFailure, file.string(), "cannot open reference file");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("target")) {
            Error e(Errc::kMalformedRecord, fmt::format("{}:{}: expected {{\"target\", \"score\"}}", file.string(), n));
            e.line = n;
            throw e;
        }
        double v = j.contains("score") ? j["score"].get<double>() : j.at("ref").get<double>();
        refs[j["target"].get<std::string>()] = v;
    }
    return refs;
}

std::string fmt_opt(std::optional<double> v) { return v ? fmt::format("{:.4f}", *v) : "NA"; }

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"ceaeval: context-aware expressiveness evaluation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ceaeval 0.1.0");

    // corpus ------------------------------------------------------------------
    auto *corpus_cmd = app.add_subcommand("corpus", "Validate and curate annotated corpora");
    corpus_cmd->require_subcommand(1);

    std::string corpus_path;
    auto *validate_cmd = corpus_cmd->add_subcommand("validate", "Check a corpus file");
    validate_cmd->add_option("path", corpus_path, "Corpus JSONL")->required();

    std::string filter_in, filter_out;
    double min_s = 1.0, max_s = 45.0;
    auto *filter_cmd = corpus_cmd->add_subcommand("filter", "Drop targets outside a duration range");
    filter_cmd->add_option("path", filter_in, "Corpus JSONL")->required();
    filter_cmd->add_option("--min", min_s, "Shortest kept duration in seconds")->capture_default_str();
    filter_cmd->add_option("--max", max_s, "Longest kept duration in seconds")->capture_default_str();
    filter_cmd->add_option("-o,--out", filter_out, "Output file (stdout by default)");

    std::string rebalance_in, rebalance_out;
    std::uint64_t rebalance_seed = 0;
    std::optional<std::size_t> rebalance_size;
    auto *rebalance_cmd = corpus_cmd->add_subcommand("rebalance", "Resample targets uniformly over score buckets");
    rebalance_cmd->add_option("path", rebalance_in, "Corpus JSONL")->required();
    rebalance_cmd->add_option("--seed", rebalance_seed, "RNG seed")->required();
    rebalance_cmd->add_option("--size", rebalance_size, "Number of samples (default: annotated count)");
    rebalance_cmd->add_option("-o,--out", rebalance_out, "Output file (stdout by default)");

    // context -----------------------------------------------------------------
    auto *context_cmd = app.add_subcommand("context", "Context windows");
    context_cmd->require_subcommand(1);
    std::string show_corpus, show_story;
    int show_line = 0, show_cts = 0;
    bool show_no_roles = false;
    auto *show_cmd = context_cmd->add_subcommand("show", "Print the window around a line");
    show_cmd->add_option("--corpus", show_corpus, "Corpus JSONL")->required();
    show_cmd->add_option("--story", show_story, "Story id")->required();
    show_cmd->add_option("--line", show_line, "Target line index")->required();
    show_cmd->add_option("--cts", show_cts, "Context size")->required();
    show_cmd->add_flag("--no-roles", show_no_roles, "Do not prefix speaker roles");

    // plan --------------------------------------------------------------------
    std::string plan_corpus, plan_backend, plan_out = "plans";
    int plan_cts_max = 15;
    std::vector<int> plan_cts;
    bool plan_strict = false;
    auto *plan_cmd = app.add_subcommand("plan", "Collect planner ballots and vote per target");
    plan_cmd->add_option("--corpus", plan_corpus, "Corpus JSONL")->required();
    plan_cmd->add_option("--backend", plan_backend, "Planner backend config")->required();
    plan_cmd->add_option("--cts-max", plan_cts_max, "Largest ballot context size")->capture_default_str();
    plan_cmd->add_option("--cts", plan_cts, "Evaluation context sizes to vote for (default: cts-max)");
    plan_cmd->add_flag("--strict-equality", plan_strict, "Compare free-text plan fields verbatim");
    plan_cmd->add_option("--out", plan_out, "Output directory")->capture_default_str();

    // judge -------------------------------------------------------------------
    std::string judge_plans, judge_backend, judge_mode = "cot", judge_lang = "en", judge_out;
    auto *judge_cmd = app.add_subcommand("judge", "Score voted plans with a judge backend");
    judge_cmd->add_option("--plans", judge_plans, "Directory holding plans.jsonl")->required();
    judge_cmd->add_option("--backend", judge_backend, "Judge backend config")->required();
    judge_cmd->add_option("--mode", judge_mode, "cot|plain")->capture_default_str();
    judge_cmd->add_option("--language", judge_lang, "en|zh")->capture_default_str();
    judge_cmd->add_option("--out", judge_out, "Output directory (default: the plans directory)");

    // bias --------------------------------------------------------------------
    auto *bias_cmd = app.add_subcommand("bias", "Adaptive attention bias kernel");
    bias_cmd->require_subcommand(1);
    std::string trace_fixture, trace_out = "bias_trace";
    std::uint64_t trace_seed = 0;
    auto *trace_cmd = bias_cmd->add_subcommand("trace", "Export the per-step bias trace of a fixture");
    trace_cmd->add_option("--fixture", trace_fixture, "Token fixture JSON")->required();
    trace_cmd->add_option("--seed", trace_seed, "Seed for states and gate weights")->capture_default_str();
    trace_cmd->add_option("--out", trace_out, "Output directory")->capture_default_str();
    bool trace_delims_base = false;
    trace_cmd->add_flag("--delimiters-base", trace_delims_base, "Tag region delimiter tokens as base");

    int gc_length = 12, gc_dim = 6;
    std::uint64_t gc_seed = 7;
    double gc_eps = 1e-5, gc_tol = 1e-4, gc_scale = 1.0;
    bool gc_detached = false;
    auto *gradcheck_cmd = bias_cmd->add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    gradcheck_cmd->add_option("--length", gc_length, "Sequence length")->capture_default_str();
    gradcheck_cmd->add_option("--dim", gc_dim, "Hidden size")->capture_default_str();
    gradcheck_cmd->add_option("--seed", gc_seed, "Probe and weight seed")->capture_default_str();
    gradcheck_cmd->add_option("--eps", gc_eps, "Finite-difference step")->capture_default_str();
    gradcheck_cmd->add_option("--tol", gc_tol, "Pass threshold on max relative error")->capture_default_str();
    gradcheck_cmd->add_option("--scale", gc_scale, "Std-dev of the gate weights")->capture_default_str();
    gradcheck_cmd->add_flag("--detached", gc_detached, "Freeze the bias coefficients");

    // reward ------------------------------------------------------------------
    std::optional<double> reward_pred, reward_ref;
    std::string reward_verdicts;
    double reward_sigma = 1.0;
    auto *reward_cmd = app.add_subcommand("reward", "Score-matching reward");
    reward_cmd->add_option("--pred", reward_pred, "Predicted score");
    reward_cmd->add_option("--ref", reward_ref, "Reference score");
    reward_cmd->add_option("--verdicts", reward_verdicts, "Verdict JSONL for batch mode (raw + human_score)");
    reward_cmd->add_option("--sigma", reward_sigma, "Distance scale")->capture_default_str();
    std::vector<double> obj_ratios, obj_advantages;
    double obj_kl = 0.0, obj_eps = 0.1, obj_beta = 0.01;
    bool obj_standard = false;
    reward_cmd->add_option("--ratios", obj_ratios, "Policy ratios (objective mode)")->delimiter(',');
    reward_cmd->add_option("--advantages", obj_advantages, "Advantages (objective mode)")->delimiter(',');
    reward_cmd->add_option("--kl", obj_kl, "KL estimate")->capture_default_str();
    reward_cmd->add_option("--eps", obj_eps, "Clip half-width")->capture_default_str();
    reward_cmd->add_option("--beta", obj_beta, "KL weight")->capture_default_str();
    reward_cmd->add_flag("--standard-clip", obj_standard, "Clip the ratio around 1 instead of the product");

    // metrics -----------------------------------------------------------------
    auto *metrics_cmd = app.add_subcommand("metrics", "Score and agreement metrics");
    metrics_cmd->require_subcommand(1);
    std::string score_pred, score_ref, score_group = "cts";
    double score_tol = 1.0;
    auto *score_cmd = metrics_cmd->add_subcommand("score", "LCC and tolerance accuracy");
    score_cmd->add_option("--pred", score_pred, "Score records JSONL (target, cts, mode, pred)")->required();
    score_cmd->add_option("--ref", score_ref, "Reference JSONL (target, score); default: the ref field of --pred");
    score_cmd->add_option("--group-by", score_group, "cts|mode|cts,mode|none")->capture_default_str();
    score_cmd->add_option("--tol", score_tol, "Accuracy tolerance")->capture_default_str();

    std::string agree_matrix, agree_kind = "icc", agree_lexicon;
    auto *agree_cmd = metrics_cmd->add_subcommand("agreement", "Inter-rater agreement of a subject x rater matrix");
    agree_cmd->add_option("--matrix", agree_matrix, "Tab-separated matrix, one subject per line")->required();
    agree_cmd->add_option("--kind", agree_kind, "icc|percent|embedding|vad")
        ->check(CLI::IsMember({"icc", "percent", "embedding", "vad"}))
        ->capture_default_str();
    agree_cmd->add_option("--lexicon", agree_lexicon, "VAD lexicon TSV (kind vad)");

    // run / report ------------------------------------------------------------
    std::string run_config, run_out;
    bool run_resume = false, run_no_planner = false;
    auto *run_cmd = app.add_subcommand("run", "Run an end-to-end evaluation");
    run_cmd->add_option("--config", run_config, "Run config JSON")->required();
    run_cmd->add_option("--out", run_out, "Override the output directory");
    run_cmd->add_flag("--resume", run_resume, "Reuse intermediates already on disk");
    run_cmd->add_flag("--no-planner", run_no_planner, "Judge raw context with the baseline prompt");

    std::string report_run, report_format = "table";
    auto *report_cmd = app.add_subcommand("report", "Render a run report");
    report_cmd->add_option("--run", report_run, "Run directory or report.json")->required();
    report_cmd->add_option("--format", report_format, "table|csv|plotdata")
        ->check(CLI::IsMember({"table", "csv", "plotdata"}))
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate_cmd->parsed()) {
            auto c = corpus::load_corpus(corpus_path);
            corpus::validate(c);
            fmt::print("ok: {}\n", summary(c));
            return 0;
        }
        if (filter_cmd->parsed()) {
            auto c = corpus::load_corpus(filter_in);
            auto f = corpus::filter_for_rl(c, min_s, max_s);
            fmt::print(stderr, "kept {} of {} targets\n", f.annotated_count(), c.annotated_count());
            write_corpus(f, filter_out);
            return 0;
        }
        if (rebalance_cmd->parsed()) {
            auto c = corpus::load_corpus(rebalance_in);
            auto r = corpus::rebalance_by_score(c, rebalance_seed, rebalance_size);
            fmt::print(stderr, "resampled {} targets\n", r.annotated_count());
            write_corpus(r, rebalance_out);
            return 0;
        }
        if (show_cmd->parsed()) {
            auto c = corpus::load_corpus(show_corpus);
            const auto *story = c.find(show_story);
            if (!story) throw Error(Errc::kIndexOutOfRange, "story", "no story " + show_story);
            auto it = std::find_if(story->lines.begin(), story->lines.end(),
                                   [&](const corpus::StoryLine &l) { return l.line_index == show_line; });
            if (it == story->lines.end()) {
                throw Error(Errc::kIndexOutOfRange, "line", fmt::format("no line {} in {}", show_line, show_story));
            }
            auto window = context::build_context(story->lines, static_cast<std::size_t>(it - story->lines.begin()),
                                                 show_cts);
            context::RenderOptions opts;
            opts.speaker_roles = !show_no_roles;
            for (const auto &l : window.lines) fmt::print("[{}] {}\n", l.line_index, context::render_line(l, opts));
            fmt::print("target [{}] {}\n", window.target.line_index, context::render_line(window.target, opts));
            return 0;
        }
        if (plan_cmd->parsed()) {
            auto c = corpus::load_corpus(plan_corpus);
            corpus::validate(c);
            auto targets = pipeline::list_targets(c);
            if (targets.empty()) throw Error(Errc::kConfigError, "corpus", "no targets");
            auto backend = llm::load_backend(plan_backend);
            if (plan_cts.empty()) plan_cts = {plan_cts_max};
            pipeline::StageOptions opts;
            opts.config_hash = "cli";
            opts.vote.strict_equality = plan_strict;
            auto res = pipeline::run_plan_stage(c, targets, plan_cts, plan_cts_max, *backend, opts, plan_out);
            for (const auto &e : res.errors) fmt::print(stderr, "{} {} cts={}: {}: {}\n", e.stage, e.target, e.cts, e.code, e.message);
            fmt::print("{} voted plans from {} planner calls -> {}\n", res.plans.size(), res.calls, plan_out);
            return res.plans.empty() ? pipeline::kExitPartial : 0;
        }
        if (judge_cmd->parsed()) {
            auto plans = pipeline::read_plans(judge_plans);
            auto backend = llm::load_backend(judge_backend);
            const auto mode = mode_arg(judge_mode);
            auto jobs = pipeline::planner_judge_jobs(plans, {mode}, language_arg(judge_lang));
            pipeline::StageOptions opts;
            opts.config_hash = "cli";
            fs::path out = judge_out.empty() ? fs::path(judge_plans) : fs::path(judge_out);
            if (!fs::is_directory(judge_plans) && judge_out.empty()) out = fs::path(judge_plans).parent_path();
            auto res = pipeline::run_judge_stage(jobs, *backend, opts, out);
            for (const auto &e : res.errors) fmt::print(stderr, "{} {} cts={}: {}: {}\n", e.stage, e.target, e.cts, e.code, e.message);
            std::set<int> cts;
            for (const auto &p : plans) cts.insert(p.cts);
            pipeline::EvalReport r;
            r.cells = pipeline::score_cells(res.scores, {cts.begin(), cts.end()}, {mode});
            fmt::print("{}", pipeline::render_report(r, pipeline::ReportFormat::kTable));
            return res.errors.empty() ? 0 : pipeline::kExitPartial;
        }
        if (trace_cmd->parsed()) {
            auto f = load_fixture(trace_fixture);
            auto seq = judge::annotate_regions(f.prompt, f.audio, f.output,
                                               {.delimiters_in_region = !trace_delims_base});
            auto hidden = random_states(static_cast<Eigen::Index>(seq.size()), f.dim, trace_seed);
            auto params = attnbias::BiasParams::random(f.dim, trace_seed + 1);
            auto trace = attnbias::dynamic_bias_trace(seq, params, hidden);
            fs::create_directories(trace_out);
            attnbias::export_bias(trace, fs::path(trace_out) / "trace.bias");
            std::ofstream regions(fs::path(trace_out) / "regions.tsv");
            regions << "position\ttoken\tregion\n";
            for (std::size_t i = 0; i < seq.size(); ++i) {
                regions << i << '\t' << seq.tokens[i].text << '\t' << judge::to_string(seq.tokens[i].region) << '\n';
            }
            fmt::print("{} bias matrices over {} positions -> {}\n", trace.size(), seq.size(), trace_out);
            return 0;
        }
        if (gradcheck_cmd->parsed()) {
            auto probe = attnbias::GradProbe::random(gc_length, gc_dim, gc_seed);
            auto params = attnbias::BiasParams::random(gc_dim, gc_seed + 1, gc_scale);
            auto rep = attnbias::grad_check(params, probe, gc_eps, gc_detached);
            const bool ok = rep.max_rel_err <= gc_tol;
            fmt::print("max_rel_err={:.3e} max_abs_err={:.3e} tol={:.1e} {}\n", rep.max_rel_err, rep.max_abs_err,
                       gc_tol, ok ? "PASS" : "FAIL");
            return ok ? 0 : 1;
        }
        if (reward_cmd->parsed()) {
            reward::RewardConfig cfg;
            cfg.sigma = reward_sigma;
            cfg.clip_eps = obj_eps;
            cfg.kl_beta = obj_beta;
            cfg.validate();
            if (!obj_ratios.empty() || !obj_advantages.empty()) {
                auto mode = obj_standard ? reward::ClipMode::kStandard : reward::ClipMode::kPrinted;
                fmt::print("{}\n", text::format_roundtrip(
                                       reward::grpo_surrogate(obj_ratios, obj_advantages, obj_kl, cfg, mode)));
                return 0;
            }
            if (!reward_verdicts.empty()) {
                std::ifstream in(reward_verdicts);
                if (!in) throw Error(Errc::kIoFailure, reward_verdicts, "cannot open verdict file");
                std::string line;
                double total = 0.0;
                std::size_t n = 0;
                while (std::getline(in, line)) {
                    if (text::trim(line).empty()) continue;
                    json j = json::parse(line, nullptr, false);
                    if (j.is_discarded() || !j.contains("human_score")) continue;
                    double r = reward::rollout_reward(j.value("raw", ""), j["human_score"].get<double>(), cfg);
                    fmt::print("{}\t{}\t{}\t{}\n", j.value("target", ""), j.value("cts", 0), j.value("mode", ""),
                               text::format_roundtrip(r));
                    total += r;
                    ++n;
                }
                if (n == 0) throw Error(Errc::kEmptyInput, reward_verdicts, "no verdict records");
                fmt::print("mean\t{}\n", text::format_roundtrip(total / static_cast<double>(n)));
                return 0;
            }
            if (!reward_pred || !reward_ref) throw Error(Errc::kConfigError, "reward", "need --pred and --ref, or --verdicts");
            fmt::print("{}\n", text::format_roundtrip(reward::reward(*reward_pred, *reward_ref, cfg)));
            return 0;
        }
        if (score_cmd->parsed()) {
            auto scores = pipeline::read_scores(score_pred);
            if (!score_ref.empty()) {
                auto refs = read_refs(score_ref);
                for (auto &s : scores) {
                    auto it = refs.find(s.target);
                    if (it == refs.end()) throw Error(Errc::kLengthMismatch, s.target, "no reference score");
                    s.ref = it->second;
                }
            }
            const bool by_cts = score_group.find("cts") != std::string::npos;
            const bool by_mode = score_group.find("mode") != std::string::npos;
            std::map<std::string, Group> groups;
            for (const auto &s : scores) {
                std::string key;
                if (by_cts) key += fmt::format("cts={}", s.cts);
                if (by_mode) key += fmt::format("{}mode={}", key.empty() ? "" : " ", judge::to_string(s.mode));
                if (key.empty()) key = "all";
                groups[key].preds.push_back(s.pred);
                groups[key].refs.push_back(s.ref);
            }
            fmt::print("{:<24}{:>6}{:>9}{:>9}\n", "group", "n", "lcc", "acc");
            for (const auto &[k, g] : groups) {
                std::optional<double> l;
                try {
                    l = metrics::lcc(g.preds, g.refs);
                } catch (const Error &) {
                }
                fmt::print("{:<24}{:>6}{:>9}{:>9}\n", k, g.preds.size(), fmt_opt(l),
                           fmt_opt(metrics::tolerance_acc(g.preds, g.refs, score_tol)));
            }
            return 0;
        }
        if (agree_cmd->parsed()) {
            double v = 0.0;
            if (agree_kind == "icc") {
                v = metrics::icc_2_1(metrics::read_rating_matrix(agree_matrix));
            } else {
                auto labels = metrics::read_label_matrix(agree_matrix);
                if (agree_kind == "percent") {
                    v = metrics::percent_agreement(labels);
                } else if (agree_kind == "embedding") {
                    metrics::HashEmbeddingBackend embed;
                    v = metrics::embedding_agreement(labels, embed);
                } else {
                    if (agree_lexicon.empty()) throw Error(Errc::kConfigError, "lexicon", "--kind vad needs --lexicon");
                    v = metrics::emotion_vad_icc(labels, metrics::VadLexicon::load(agree_lexicon));
                }
            }
            fmt::print("{}\t{}\n", agree_kind, text::format_roundtrip(v));
            return 0;
        }
        if (run_cmd->parsed()) {
            auto cfg = pipeline::RunConfig::load(run_config);
            if (run_no_planner) cfg.use_planner = false;
            pipeline::RunOptions opts;
            opts.resume = run_resume;
            if (!run_out.empty()) opts.output_dir = fs::path(run_out);
            auto res = pipeline::run_evaluation(cfg, opts);
            fmt::print("run {} -> {}\n", res.report.config_hash, res.run_dir.string());
            fmt::print("{}", pipeline::render_report(res.report, pipeline::ReportFormat::kTable));
            if (!res.errors.empty()) {
                fmt::print(stderr, "{} ledger entries in {}\n", res.errors.size(), (res.run_dir / "errors.jsonl").string());
            }
            return res.exit_code;
        }
        if (report_cmd->parsed()) {
            auto r = pipeline::load_report(report_run);
            fmt::print("{}", pipeline::render_report(r, *pipeline::parse_report_format(report_format)));
            return 0;
        }
    } catch (const Error &e) {
        std::string where = e.field().empty() ? "" : fmt::format(" [{}]", e.field());
        if (e.line) where += fmt::format(" (line {})", *e.line);
        fmt::print(stderr, "ceaeval: {}{}: {}\n", errc_name(e.code()), where, e.what());
        return pipeline::kExitConfig;
    } catch (const std::exception &e) {
        fmt::print(stderr, "ceaeval: {}\n", e.what());
        return pipeline::kExitConfig;
    }
    return 0;
}
