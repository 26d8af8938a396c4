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

#include "ceaeval/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ceaeval/context.hpp"
#include "ceaeval/error.hpp"
#include "ceaeval/metrics.hpp"
#include "ceaeval/templates.hpp"
#include "ceaeval/text.hpp"

namespace ceaeval::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::kIoFailure, path.string(), "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string content_hash(const fs::path &path) { return text::hex64(text::fnv1a64(read_file(path))); }

json parse_or_config_error(std::string_view text, std::string_view what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::kConfigError, std::string(what), "not valid JSON");
    return j;
}

void reject_secrets(const json &j) {
    if (j.is_object()) {
        for (const auto &[k, v] : j.items()) {
            if (k == "api_key") {
                throw Error(Errc::kConfigError, "api_key",
                            fmt::format("secrets are read from {} only", llm::kApiKeyEnv));
            }
            reject_secrets(v);
        }
    } else if (j.is_array()) {
        for (const auto &v : j) reject_secrets(v);
    }
}

fs::path resolve(const fs::path &base, const std::string &p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

BackendRef parse_backend_ref(const json &j, const fs::path &base_dir, std::string_view field) {
    BackendRef ref;
    if (j.is_string()) {
        ref.written = j.get<std::string>();
        fs::path file = resolve(base_dir, ref.written);
        ref.json_text = read_file(file);
        ref.base_dir = file.parent_path();
    } else if (j.is_object()) {
        ref.written = j.dump();
        ref.json_text = ref.written;
        ref.base_dir = base_dir;
    } else {
        throw Error(Errc::kConfigError, std::string(field), "must be a path or an object");
    }
    reject_secrets(parse_or_config_error(ref.json_text, field));
    return ref;
}

// Backend document with any mock script file inlined, so the hash follows content.
json canonical_backend(const BackendRef &ref) {
    json j = parse_or_config_error(ref.json_text, "backend");
    if (j.is_object() && j.value("kind", "") == "mock" && j.contains("script") && j["script"].is_string()) {
        fs::path script = resolve(ref.base_dir, j["script"].get<std::string>());
        j["script"] = parse_or_config_error(read_file(script), "mock script");
    }
    return j;
}

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn &&fn) {
    const std::size_t count = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    if (count <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto &t : pool) t.join();
}

// Line-delimited record file; appends are serialised and flushed so a crash
// leaves every completed record on disk.
class RecordLog {
public:
    RecordLog(const fs::path &path, bool append) : m_out(path, append ? std::ios::app : std::ios::trunc) {
        if (!m_out) throw Error(Errc::kIoFailure, path.string(), "cannot open record file");
    }
    void write(const json &rec) {
        std::lock_guard lock(m_mu);
        m_out << rec.dump() << '\n';
        m_out.flush();
    }

private:
    std::mutex m_mu;
    std::ofstream m_out;
};

std::vector<json> read_records(const fs::path &path) {
    std::vector<json> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        // a torn last line from an interrupted run is simply redone
        if (j.is_discarded() || !j.is_object()) continue;
        out.push_back(std::move(j));
    }
    return out;
}

void write_records(const fs::path &path, const std::vector<json> &records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::kIoFailure, path.string(), "cannot write record file");
    for (const auto &r : records) out << r.dump() << '\n';
}

json plan_to_json(const planner::ExpressivePlan &p) {
    return {{"emotion", p.emotion},
            {"rhythm", corpus::to_string(p.rhythm)},
            {"intonation", corpus::to_string(p.intonation)},
            {"recording_condition", p.recording_condition}};
}

planner::ExpressivePlan plan_from_json(const json &j) {
    planner::ExpressivePlan p;
    p.emotion = j.at("emotion").get<std::string>();
    p.recording_condition = j.at("recording_condition").get<std::string>();
    auto r = corpus::parse_rhythm(j.at("rhythm").get<std::string>());
    auto i = corpus::parse_intonation(j.at("intonation").get<std::string>());
    if (!r) throw Error(Errc::kUnknownCategory, "rhythm", j.at("rhythm").get<std::string>());
    if (!i) throw Error(Errc::kUnknownCategory, "intonation", j.at("intonation").get<std::string>());
    p.rhythm = *r;
    p.intonation = *i;
    return p;
}

judge::JudgeMode mode_from(const json &j) {
    auto m = judge::parse_mode(j.get<std::string>());
    if (!m) throw Error(Errc::kMalformedRecord, "mode", j.get<std::string>());
    return *m;
}

LedgerEntry ledger_from_error(std::string stage, std::string target, int cts, std::optional<judge::JudgeMode> mode,
                              const std::exception &e) {
    LedgerEntry l{std::move(stage), std::move(target), cts, mode, "Unknown", e.what()};
    if (auto *ce = dynamic_cast<const Error *>(&e)) l.code = std::string(errc_name(ce->code()));
    return l;
}

json error_json(const LedgerEntry &l) { return {{"code", l.code}, {"message", l.message}}; }

json stamp(const StageOptions &opts) {
    return {{"config_hash", opts.config_hash}, {"template_version", std::string(template_version())}};
}

bool stamped_by(const json &rec, const StageOptions &opts) {
    return rec.value("config_hash", "") == opts.config_hash &&
           rec.value("template_version", "") == template_version();
}

auto ledger_key(const LedgerEntry &l) {
    return std::make_tuple(l.stage, l.target, l.cts, l.mode ? static_cast<int>(*l.mode) : -1, l.code, l.message);
}

std::string now_iso() {
    auto now = std::chrono::system_clock::now();
    return fmt::format("{:%Y-%m-%dT%H:%M:%S}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
}

} // namespace

// ---------------------------------------------------------------------------
// Config

std::unique_ptr<llm::ChatBackend> BackendRef::make() const { return llm::make_backend(json_text, base_dir); }

RunConfig RunConfig::parse(std::string_view json_text, const fs::path &base_dir) {
    json j = parse_or_config_error(json_text, "run config");
    if (!j.is_object()) throw Error(Errc::kConfigError, "run config", "must be a JSON object");
    reject_secrets(j);

    static const std::set<std::string> known = {
        "corpus", "corpus_hash", "cts", "modes", "planner_backend", "judge_backend", "seed", "output_dir",
        "cts_max", "language", "use_planner", "strict_equality", "speaker_roles", "failure_threshold",
        "agreement"};
    for (const auto &[k, _] : j.items()) {
        if (!known.contains(k)) throw Error(Errc::kConfigError, k, "unknown config key");
    }

    RunConfig cfg;
    try {
        if (!j.contains("corpus")) throw Error(Errc::kConfigError, "corpus", "missing");
        cfg.corpus_written = j["corpus"].get<std::string>();
        cfg.corpus = resolve(base_dir, cfg.corpus_written);
        if (j.contains("cts")) cfg.cts = j["cts"].get<std::vector<int>>();
        if (j.contains("modes")) {
            cfg.modes.clear();
            for (const auto &m : j["modes"]) {
                auto mode = judge::parse_mode(m.get<std::string>());
                if (!mode) throw Error(Errc::kConfigError, "modes", "unknown mode " + m.get<std::string>());
                cfg.modes.push_back(*mode);
            }
        }
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
        else cfg.output_dir = base_dir / cfg.output_dir;
        cfg.cts_max = j.value("cts_max", cfg.cts_max);
        if (j.contains("language")) {
            auto lang = judge::parse_language(j["language"].get<std::string>());
            if (!lang) throw Error(Errc::kConfigError, "language", j["language"].get<std::string>());
            cfg.language = *lang;
        }
        cfg.use_planner = j.value("use_planner", cfg.use_planner);
        cfg.strict_equality = j.value("strict_equality", cfg.strict_equality);
        cfg.speaker_roles = j.value("speaker_roles", cfg.speaker_roles);
        cfg.failure_threshold = j.value("failure_threshold", cfg.failure_threshold);

        if (j.contains("judge_backend")) {
            cfg.judge_backend = parse_backend_ref(j["judge_backend"], base_dir, "judge_backend");
        } else {
            throw Error(Errc::kConfigError, "judge_backend", "missing");
        }
        if (j.contains("planner_backend")) {
            cfg.planner_backend = parse_backend_ref(j["planner_backend"], base_dir, "planner_backend");
        } else if (cfg.use_planner) {
            throw Error(Errc::kConfigError, "planner_backend", "missing (set use_planner false for the baseline path)");
        }

        if (j.contains("agreement")) {
            for (const auto &a : j["agreement"]) {
                AgreementSpec spec;
                spec.kind = a.at("kind").get<std::string>();
                spec.matrix_written = a.at("matrix").get<std::string>();
                spec.name = a.value("name", spec.kind);
                spec.matrix = resolve(base_dir, spec.matrix_written);
                if (a.contains("lexicon")) spec.lexicon = resolve(base_dir, a["lexicon"].get<std::string>());
                cfg.agreement.push_back(std::move(spec));
            }
        }
    } catch (const json::exception &e) {
        throw Error(Errc::kConfigError, "run config", e.what());
    }

    if (j.contains("corpus_hash") && j["corpus_hash"].is_string()) {
        if (content_hash(cfg.corpus) != j["corpus_hash"].get<std::string>()) {
            throw Error(Errc::kConfigError, "corpus_hash", "corpus content differs from the recorded hash");
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const fs::path &path) { return parse(read_file(path), path.parent_path()); }

void RunConfig::validate() const {
    if (cts.empty()) throw Error(Errc::kConfigError, "cts", "at least one cts value required");
    for (int c : cts) {
        if (c < 0) throw Error(Errc::kConfigError, "cts", fmt::format("negative cts {}", c));
    }
    if (std::set<int>(cts.begin(), cts.end()).size() != cts.size()) {
        throw Error(Errc::kConfigError, "cts", "duplicate cts value");
    }
    if (modes.empty()) throw Error(Errc::kConfigError, "modes", "at least one mode required");
    if (std::set<judge::JudgeMode>(modes.begin(), modes.end()).size() != modes.size()) {
        throw Error(Errc::kConfigError, "modes", "duplicate mode");
    }
    if (cts_max < 1) throw Error(Errc::kConfigError, "cts_max", "must be >= 1");
    if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0)) {
        throw Error(Errc::kConfigError, "failure_threshold", "must be in [0, 1]");
    }
    for (const auto &a : agreement) {
        static const std::set<std::string> kinds = {"icc", "percent", "embedding", "vad"};
        if (!kinds.contains(a.kind)) throw Error(Errc::kConfigError, "agreement", "unknown kind " + a.kind);
        if (a.kind == "vad" && !a.lexicon) throw Error(Errc::kConfigError, "agreement", "vad needs a lexicon");
    }
}

std::string RunConfig::canonical_json() const {
    json j;
    j["corpus"] = corpus_written;
    j["corpus_hash"] = content_hash(corpus);
    std::vector<int> sorted_cts = cts;
    std::sort(sorted_cts.begin(), sorted_cts.end());
    j["cts"] = sorted_cts;
    std::vector<judge::JudgeMode> sorted_modes = modes;
    std::sort(sorted_modes.begin(), sorted_modes.end());
    j["modes"] = json::array();
    for (auto m : sorted_modes) j["modes"].push_back(std::string(judge::to_string(m)));
    if (use_planner) j["planner_backend"] = canonical_backend(planner_backend);
    j["judge_backend"] = canonical_backend(judge_backend);
    j["seed"] = seed;
    j["cts_max"] = cts_max;
    j["language"] = std::string(judge::to_string(language));
    j["use_planner"] = use_planner;
    j["strict_equality"] = strict_equality;
    j["speaker_roles"] = speaker_roles;
    j["failure_threshold"] = failure_threshold;
    if (!agreement.empty()) {
        j["agreement"] = json::array();
        for (const auto &a : agreement) {
            json s = {{"name", a.name}, {"kind", a.kind}, {"matrix", a.matrix_written}};
            if (a.lexicon) s["lexicon"] = a.lexicon->string();
            j["agreement"].push_back(std::move(s));
        }
    }
    return j.dump();
}

std::string RunConfig::config_hash() const { return text::hex64(text::fnv1a64(canonical_json())); }

// ---------------------------------------------------------------------------
// Targets

std::vector<Target> list_targets(const corpus::Corpus &corpus) {
    std::vector<Target> out;
    for (const auto &ref : corpus::annotated_targets(corpus)) {
        const auto &story = corpus.stories[ref.story];
        const auto &line = story.lines[ref.line];
        const auto &ann = *story.annotations[ref.line];
        out.push_back(Target{fmt::format("{}:{}", story.story_id, line.line_index), ref.story, ref.line, line.text,
                             ann.audio_ref, ann.expressive_score});
    }
    return out;
}

std::vector<int> ballot_cts_for(int eval_cts, int cts_max) {
    if (eval_cts <= 0) return {0};
    std::vector<int> out;
    for (int c = 1; c <= std::min(eval_cts, cts_max); ++c) out.push_back(c);
    return out;
}

std::string judge_user_message(std::string_view text, std::string_view audio_ref) {
    return fmt::format("Target utterance: {}\nAudio: {}", text, audio_ref);
}

// ---------------------------------------------------------------------------
// Plan stage

PlanStageResult run_plan_stage(const corpus::Corpus &corpus, const std::vector<Target> &targets,
                               const std::vector<int> &eval_cts, int cts_max, llm::ChatBackend &backend,
                               const StageOptions &opts, const fs::path &dir) {
    fs::create_directories(dir);
    const fs::path ballots_file = dir / "ballots.jsonl";

    std::set<int> needed;
    for (int c : eval_cts) {
        for (int b : ballot_cts_for(c, cts_max)) needed.insert(b);
    }

    std::map<std::pair<std::string, int>, json> done;
    if (opts.resume) {
        for (auto &rec : read_records(ballots_file)) {
            if (!stamped_by(rec, opts) || !rec.contains("plan")) continue;
            std::pair<std::string, int> key{rec["target"].get<std::string>(), rec["cts"].get<int>()};
            done[key] = std::move(rec);
        }
    }

    struct Unit {
        std::size_t target;
        int cts;
    };
    std::vector<Unit> units;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        for (int c : needed) {
            if (!done.contains({targets[t].id, c})) units.push_back({t, c});
        }
    }

    PlanStageResult result;
    std::mutex mu;
    std::vector<json> fresh;
    {
        RecordLog log(ballots_file, opts.resume);
        parallel_for(units.size(), backend.max_parallel(), [&](std::size_t i) {
            const Unit &u = units[i];
            const Target &tg = targets[u.target];
            const auto &story = corpus.stories[tg.story];
            json rec = stamp(opts);
            rec["target"] = tg.id;
            rec["cts"] = u.cts;
            try {
                auto window = context::build_context(story.lines, tg.line, u.cts);
                llm::ChatRequest req;
                req.messages.push_back({"user", planner::render_planner_prompt(window, context::render_line(window.target, opts.render), opts.render)});
                rec["request_hash"] = llm::request_hash(req);
                auto resp = backend.complete(req);
                rec["raw"] = resp.text;
                rec["plan"] = plan_to_json(planner::parse_plan(resp.text));
            } catch (const std::exception &e) {
                auto l = ledger_from_error("plan", tg.id, u.cts, std::nullopt, e);
                rec["error"] = error_json(l);
                std::lock_guard lock(mu);
                result.errors.push_back(std::move(l));
            }
            log.write(rec);
            std::lock_guard lock(mu);
            fresh.push_back(std::move(rec));
        });
    }
    result.calls = units.size();

    // Final, ordered ballot file: kept records plus this session's.
    std::map<std::pair<std::string, int>, json> all = std::move(done);
    for (auto &rec : fresh) {
        std::pair<std::string, int> key{rec["target"].get<std::string>(), rec["cts"].get<int>()};
        all[key] = std::move(rec);
    }
    std::vector<json> ordered;
    ordered.reserve(all.size());
    for (auto &[_, rec] : all) ordered.push_back(rec);
    write_records(ballots_file, ordered);

    std::vector<json> plan_records;
    for (const auto &tg : targets) {
        for (int c : eval_cts) {
            std::vector<planner::PlanBallot> ballots;
            for (int b : ballot_cts_for(c, cts_max)) {
                auto it = all.find({tg.id, b});
                if (it == all.end() || !it->second.contains("plan")) continue;
                ballots.push_back({b, plan_from_json(it->second["plan"])});
            }
            if (ballots.empty()) {
                result.errors.push_back({"plan", tg.id, c, std::nullopt, std::string(errc_name(Errc::kEmptyBallots)),
                                         "every ballot for this cell failed"});
                continue;
            }
            VotedPlan vp{tg.id, tg.text, tg.audio_ref, tg.human_score, c,
                         planner::tally_plans(ballots, opts.vote), ballots.size()};
            json rec = stamp(opts);
            rec["target"] = vp.target;
            rec["text"] = vp.text;
            rec["audio_ref"] = vp.audio_ref;
            rec["human_score"] = vp.human_score;
            rec["cts"] = vp.cts;
            rec["plan"] = plan_to_json(vp.outcome.plan);
            rec["votes"] = vp.outcome.votes;
            rec["max_cts"] = vp.outcome.max_cts;
            rec["groups"] = vp.outcome.groups;
            rec["ballots"] = vp.ballots;
            plan_records.push_back(std::move(rec));
            result.plans.push_back(std::move(vp));
        }
    }
    write_records(dir / "plans.jsonl", plan_records);
    return result;
}

std::vector<VotedPlan> read_plans(const fs::path &dir) {
    const fs::path file = fs::is_directory(dir) ? dir / "plans.jsonl" : dir;
    if (!fs::exists(file)) throw Error(Errc::kIoFailure, file.string(), "no plans file");
    std::vector<VotedPlan> out;
    try {
        for (const auto &rec : read_records(file)) {
            VotedPlan vp;
            vp.target = rec.at("target").get<std::string>();
            vp.text = rec.at("text").get<std::string>();
            vp.audio_ref = rec.value("audio_ref", "");
            vp.human_score = rec.at("human_score").get<double>();
            vp.cts = rec.at("cts").get<int>();
            vp.outcome.plan = plan_from_json(rec.at("plan"));
            vp.outcome.votes = rec.value("votes", 0);
            vp.outcome.max_cts = rec.value("max_cts", vp.cts);
            vp.outcome.groups = rec.value("groups", std::size_t{1});
            vp.ballots = rec.value("ballots", std::size_t{0});
            out.push_back(std::move(vp));
        }
    } catch (const json::exception &e) {
        throw Error(Errc::kMalformedRecord, file.string(), e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Judge stage

std::vector<JudgeJob> planner_judge_jobs(const std::vector<VotedPlan> &plans,
                                         const std::vector<judge::JudgeMode> &modes, judge::Language lang) {
    std::vector<JudgeJob> jobs;
    for (const auto &vp : plans) {
        for (auto mode : modes) {
            jobs.push_back({vp.target, vp.cts, mode, judge::render_judge_prompt(vp.outcome.plan, mode, lang),
                            judge_user_message(vp.text, vp.audio_ref), vp.human_score});
        }
    }
    return jobs;
}

std::vector<JudgeJob> baseline_judge_jobs(const corpus::Corpus &corpus, const std::vector<Target> &targets,
                                          const std::vector<int> &eval_cts,
                                          const std::vector<judge::JudgeMode> &modes, judge::Language lang,
                                          const context::RenderOptions &render) {
    std::vector<JudgeJob> jobs;
    for (const auto &tg : targets) {
        const auto &story = corpus.stories[tg.story];
        for (int c : eval_cts) {
            auto window = context::build_context(story.lines, tg.line, c);
            for (auto mode : modes) {
                jobs.push_back({tg.id, c, mode, judge::render_baseline_prompt(window, context::render_line(window.target, render), lang, mode, render),
                                judge_user_message(tg.text, tg.audio_ref), tg.human_score});
            }
        }
    }
    return jobs;
}

namespace {
using VerdictKey = std::tuple<int, int, std::string>;  // cts, mode, target

VerdictKey verdict_key(const json &rec) {
    return {rec["cts"].get<int>(), static_cast<int>(mode_from(rec["mode"])), rec["target"].get<std::string>()};
}

ScoreRecord score_from_verdict(const json &rec) {
    return {rec["target"].get<std::string>(), rec["cts"].get<int>(), mode_from(rec["mode"]),
            rec["final_score"].get<double>(), rec["human_score"].get<double>()};
}

json score_json(const ScoreRecord &s) {
    return {{"target", s.target}, {"cts", s.cts}, {"mode", std::string(judge::to_string(s.mode))},
            {"pred", s.pred}, {"ref", s.ref}};
}
} // namespace

JudgeStageResult run_judge_stage(const std::vector<JudgeJob> &jobs, llm::ChatBackend &backend,
                                 const StageOptions &opts, const fs::path &dir) {
    fs::create_directories(dir);
    const fs::path verdicts_file = dir / "verdicts.jsonl";

    std::map<VerdictKey, json> all;
    if (opts.resume) {
        for (auto &rec : read_records(verdicts_file)) {
            if (!stamped_by(rec, opts) || !rec.contains("final_score")) continue;
            auto key = verdict_key(rec);
            all[key] = std::move(rec);
        }
    }
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!all.contains({jobs[i].cts, static_cast<int>(jobs[i].mode), jobs[i].target})) pending.push_back(i);
    }

    JudgeStageResult result;
    std::mutex mu;
    {
        RecordLog log(verdicts_file, opts.resume);
        parallel_for(pending.size(), backend.max_parallel(), [&](std::size_t i) {
            const JudgeJob &job = jobs[pending[i]];
            json rec = stamp(opts);
            rec["target"] = job.target;
            rec["cts"] = job.cts;
            rec["mode"] = std::string(judge::to_string(job.mode));
            rec["human_score"] = job.human_score;
            try {
                llm::ChatRequest req;
                req.messages.push_back({"system", job.system_prompt});
                req.messages.push_back({"user", job.user_message});
                rec["request_hash"] = llm::request_hash(req);
                auto resp = backend.complete(req);
                rec["raw"] = resp.text;
                auto verdict = judge::parse_verdict(resp.text, job.mode);
                rec["final_score"] = verdict.final_score;
                rec["dimension_scores"] = verdict.dimension_scores;
                if (verdict.cot_text) rec["cot_text"] = *verdict.cot_text;
            } catch (const std::exception &e) {
                auto l = ledger_from_error("judge", job.target, job.cts, job.mode, e);
                rec["error"] = error_json(l);
                std::lock_guard lock(mu);
                result.errors.push_back(std::move(l));
            }
            log.write(rec);
            auto key = verdict_key(rec);
            std::lock_guard lock(mu);
            all[key] = std::move(rec);
        });
    }
    result.calls = pending.size();

    std::vector<json> ordered;
    std::vector<json> score_records;
    for (auto &[_, rec] : all) {
        ordered.push_back(rec);
        if (!rec.contains("final_score")) continue;
        ScoreRecord s = score_from_verdict(rec);
        score_records.push_back(score_json(s));
        result.scores.push_back(std::move(s));
    }
    write_records(verdicts_file, ordered);
    write_records(dir / "scores.jsonl", score_records);
    return result;
}

std::vector<ScoreRecord> read_scores(const fs::path &file) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::kIoFailure, file.string(), "cannot open score file");
    std::vector<ScoreRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            json j = json::parse(line);
            ScoreRecord s;
            s.target = j.value("target", "");
            s.cts = j.value("cts", 0);
            s.mode = j.contains("mode") ? mode_from(j["mode"]) : judge::JudgeMode::kWithCot;
            s.pred = j.at("pred").get<double>();
            s.ref = j.value("ref", 0.0);
            out.push_back(std::move(s));
        } catch (const json::exception &e) {
            Error err(Errc::kMalformedRecord, fmt::format("{}:{}: {}", file.string(), line_no, e.what()));
            err.line = line_no;
            throw err;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

double compute_agreement(const AgreementSpec &spec) {
    if (spec.kind == "icc") return metrics::icc_2_1(metrics::read_rating_matrix(spec.matrix));
    auto labels = metrics::read_label_matrix(spec.matrix);
    if (spec.kind == "percent") return metrics::percent_agreement(labels);
    if (spec.kind == "embedding") {
        metrics::HashEmbeddingBackend embed;
        return metrics::embedding_agreement(labels, embed);
    }
    return metrics::emotion_vad_icc(labels, metrics::VadLexicon::load(*spec.lexicon));
}

} // namespace

RunResult run_evaluation(const RunConfig &cfg, const RunOptions &opts) {
    cfg.validate();
    std::unique_ptr<llm::ChatBackend> planner_backend;
    if (cfg.use_planner) planner_backend = cfg.planner_backend.make();
    auto judge_backend = cfg.judge_backend.make();
    return run_evaluation(cfg, planner_backend ? *planner_backend : *judge_backend, *judge_backend, opts);
}

RunResult run_evaluation(const RunConfig &cfg, llm::ChatBackend &planner_backend, llm::ChatBackend &judge_backend,
                         const RunOptions &opts) {
    cfg.validate();
    const std::string started = now_iso();
    corpus::Corpus corpus = corpus::load_corpus(cfg.corpus);
    corpus::validate(corpus);
    const auto targets = list_targets(corpus);
    if (targets.empty()) throw Error(Errc::kConfigError, "corpus", "no targets");

    const std::string hash = cfg.config_hash();
    RunResult result;
    result.run_dir = opts.output_dir.value_or(cfg.output_dir) / ("run-" + hash);
    fs::create_directories(result.run_dir);
    {
        std::ofstream out(result.run_dir / "config.json", std::ios::trunc);
        out << json::parse(cfg.canonical_json()).dump(2) << '\n';
    }

    std::vector<int> eval_cts = cfg.cts;
    std::sort(eval_cts.begin(), eval_cts.end());
    std::vector<judge::JudgeMode> modes = cfg.modes;
    std::sort(modes.begin(), modes.end());

    StageOptions sopts;
    sopts.config_hash = hash;
    sopts.resume = opts.resume;
    sopts.render.speaker_roles = cfg.speaker_roles;
    sopts.vote.strict_equality = cfg.strict_equality;
    sopts.language = cfg.language;

    std::vector<JudgeJob> jobs;
    std::size_t planner_calls = 0;
    if (cfg.use_planner) {
        auto plans = run_plan_stage(corpus, targets, eval_cts, cfg.cts_max, planner_backend, sopts, result.run_dir);
        planner_calls = plans.calls;
        result.errors = std::move(plans.errors);
        jobs = planner_judge_jobs(plans.plans, modes, cfg.language);
    } else {
        jobs = baseline_judge_jobs(corpus, targets, eval_cts, modes, cfg.language, sopts.render);
    }
    auto judged = run_judge_stage(jobs, judge_backend, sopts, result.run_dir);
    result.errors.insert(result.errors.end(), judged.errors.begin(), judged.errors.end());
    std::sort(result.errors.begin(), result.errors.end(),
              [](const LedgerEntry &a, const LedgerEntry &b) { return ledger_key(a) < ledger_key(b); });
    {
        std::vector<json> ledger;
        for (const auto &l : result.errors) {
            json rec = {{"stage", l.stage}, {"target", l.target}, {"cts", l.cts}, {"code", l.code},
                        {"message", l.message}, {"config_hash", hash}};
            if (l.mode) rec["mode"] = std::string(judge::to_string(*l.mode));
            ledger.push_back(std::move(rec));
        }
        write_records(result.run_dir / "errors.jsonl", ledger);
    }

    EvalReport &report = result.report;
    report.config_hash = hash;
    report.template_version = std::string(template_version());
    report.corpus_hash = content_hash(cfg.corpus);
    report.prompt_path = cfg.use_planner ? "planner" : "baseline";
    report.targets = targets.size();
    report.units = targets.size() * eval_cts.size() * modes.size();
    report.cells = score_cells(judged.scores, eval_cts, modes);
    for (auto &c : report.cells) c.failed = targets.size() - c.n;
    for (const auto &c : report.cells) report.failed_units += c.failed;
    for (const auto &spec : cfg.agreement) report.agreement.push_back({spec.name, spec.kind, compute_agreement(spec)});

    {
        std::ofstream out(result.run_dir / "report.json", std::ios::trunc);
        out << report_to_json(report);
    }
    {
        json manifest = {{"config_hash", hash},
                         {"template_version", std::string(template_version())},
                         {"started_at", started},
                         {"finished_at", now_iso()},
                         {"resumed", opts.resume},
                         {"planner_calls", planner_calls},
                         {"judge_calls", judged.calls},
                         {"ledger_entries", result.errors.size()}};
        std::ofstream out(result.run_dir / "manifest.json", std::ios::trunc);
        out << manifest.dump(2) << '\n';
    }

    const double failed_fraction =
        static_cast<double>(report.failed_units) / static_cast<double>(std::max<std::size_t>(1, report.units));
    result.exit_code = failed_fraction > cfg.failure_threshold ? kExitPartial : kExitOk;
    return result;
}

} // namespace ceaeval::pipeline
