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

// Acceptance runner: one line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ceaeval/attnbias.hpp"
#include "ceaeval/context.hpp"
#include "ceaeval/corpus.hpp"
#include "ceaeval/error.hpp"
#include "ceaeval/judge.hpp"
#include "ceaeval/metrics.hpp"
#include "ceaeval/planner.hpp"
#include "ceaeval/reward.hpp"
#include "oracles.hpp"

using namespace ceaeval;
namespace fs = std::filesystem;
namespace ts = ceaeval::testkit;
using Clock = std::chrono::steady_clock;

#ifndef CEAEVAL_CLI
#define CEAEVAL_CLI "ceaeval"
#endif

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const std::string &what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

attnbias::Matrix random_matrix(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> n(0.0, 1.0);
    attnbias::Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

Check mask_partition() {
    Check c;
    auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000 && c.ok; ++i) {
        auto f = ts::fuzz_sequence(rng);
        auto m = attnbias::build_masks(judge::annotate_regions(f.prompt, f.audio, f.output));
        attnbias::Vector sum = m.prompt + m.audio + m.cot + m.base;
        c.expect((sum.array() == 1.0).all(), fmt::format("sequence {} not partitioned", i));
    }
    double t = seconds_since(t0);
    c.expect(t < 5.0, fmt::format("took {:.2f}s", t));
    if (c.ok) c.detail = fmt::format("1000 sequences in {:.3f}s", t);
    return c;
}

Check identity_reduction() {
    Check c;
    std::mt19937_64 rng(2);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Eigen::Index l = 1 + static_cast<Eigen::Index>(rng() % 16), d = 1 + static_cast<Eigen::Index>(rng() % 8);
        auto q = random_matrix(rng, l, d), k = random_matrix(rng, l, d), v = random_matrix(rng, l, d);
        auto diff = (attnbias::biased_attention(q, k, v, attnbias::BiasMatrix::ones(l)) -
                     attnbias::standard_attention(q, k, v))
                        .cwiseAbs()
                        .maxCoeff();
        worst = std::max(worst, diff);
    }
    c.expect(worst <= 1e-12, fmt::format("max diff {:.3e}", worst));
    if (c.ok) c.detail = fmt::format("max abs diff {:.3e}", worst);
    return c;
}

Check coefficient_ranges() {
    Check c;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000 && c.ok; ++i) {
        auto f = ts::fuzz_sequence(rng);
        auto m = attnbias::build_masks(judge::annotate_regions(f.prompt, f.audio, f.output));
        auto params = attnbias::BiasParams::random(6, rng(), 3.0);
        auto b = attnbias::compute_bias(random_matrix(rng, m.size(), 6), m, params);
        for (Eigen::Index j = 0; j < m.size(); ++j) {
            double x = b.coeff[j];
            if (m.audio[j] > 0) c.expect(x > 1.0 && x < 2.0, fmt::format("audio coeff {}", x));
            else if (m.prompt[j] > 0) c.expect(x > 0.0 && x < 2.0, fmt::format("prompt coeff {}", x));
            else if (m.cot[j] > 0) c.expect(x > 0.0 && x < 1.0, fmt::format("cot coeff {}", x));
            else c.expect(x == 1.0, fmt::format("base coeff {}", x));
        }
    }
    if (c.ok) c.detail = "1000 states";
    return c;
}

Check gradient_check() {
    Check c;
    auto t0 = Clock::now();
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto probe = attnbias::GradProbe::random(12, 6, seed);
        auto r = attnbias::grad_check(attnbias::BiasParams::random(6, seed + 1000, 0.5), probe, 1e-5);
        worst = std::max(worst, r.max_rel_err);
    }
    double t = seconds_since(t0);
    c.expect(worst <= 1e-4, fmt::format("max rel err {:.3e}", worst));
    c.expect(t < 60.0, fmt::format("took {:.2f}s", t));
    if (c.ok) c.detail = fmt::format("max rel err {:.3e} in {:.3f}s", worst, t);
    return c;
}

Check reward_closed_form() {
    Check c;
    c.expect(reward::reward(3.3, 3.3) == 2.0, "r(s,s) != 2");
    c.expect(reward::reward(0.0, 0.0) == 2.0, "r(0,0) != 2");
    const double expected = std::exp(-0.1) + std::exp(-1.0);
    const double got = reward::reward(4.9, 5.0);
    c.expect(std::fabs(got - expected) <= 1e-12, fmt::format("r(4.9,5.0)={:.17g}", got));
    c.expect(reward::bucket(-0.3) == 0, "b(-0.3)");
    c.expect(reward::bucket(5.7) == 5, "b(5.7)");
    c.expect(reward::bucket(4.999) == 4, "b(4.999)");
    if (c.ok) c.detail = fmt::format("r(4.9,5.0)={:.16f}", got);
    return c;
}

Check voting() {
    using corpus::Intonation;
    using corpus::Rhythm;
    const planner::ExpressivePlan x{"angry", Rhythm::kTense, Intonation::kFalling, "normal speech"};
    const planner::ExpressivePlan y{"gentle", Rhythm::kRelaxed, Intonation::kRising, "normal speech"};
    auto make = [&](std::vector<int> xs, std::vector<int> ys) {
        std::vector<planner::PlanBallot> b;
        for (int i : xs) b.push_back({i, x});
        for (int i : ys) b.push_back({i, y});
        return b;
    };
    Check c;
    auto majority = make({1, 2, 3, 4, 5, 6, 7}, {8, 9, 10, 11, 12, 13, 14, 15});
    c.expect(planner::vote_plans(majority) == y, "8-vs-7 majority");
    auto minority_long = make({1, 2, 3, 4, 5, 6, 7, 8}, {9, 10, 11, 12, 13, 14, 15});
    c.expect(planner::vote_plans(minority_long) == x, "majority beats longer context");
    auto tie = make({1, 2, 3, 4, 5, 6, 14}, {7, 8, 9, 10, 11, 12, 15});
    auto out = planner::tally_plans(tie);
    c.expect(out.plan == y && out.max_cts == 15, "7-vs-7 tie not resolved by max cts 15");
    std::mt19937_64 rng(6);
    for (int i = 0; i < 200; ++i) {
        std::shuffle(tie.begin(), tie.end(), rng);
        std::shuffle(majority.begin(), majority.end(), rng);
        c.expect(planner::vote_plans(tie) == y && planner::vote_plans(majority) == y, "permutation changed result");
    }
    if (c.ok) c.detail = "majority, tie at cts 15, 200 permutations";
    return c;
}

Check context_builder() {
    Check c;
    auto ten = ts::make_story(10);
    auto idx = [](const context::ContextWindow &w) {
        std::vector<std::size_t> o;
        for (const auto &l : w.lines) o.push_back(static_cast<std::size_t>(l.line_index));
        return o;
    };
    c.expect(idx(context::build_context(ten, 5, 4)) == ts::brute_force_window(10, 5, 4), "mid-story example");
    c.expect(idx(context::build_context(ten, 5, 4)) == std::vector<std::size_t>{1, 2, 3, 4}, "mid-story values");
    c.expect(idx(context::build_context(ten, 1, 4)) == ts::brute_force_window(10, 1, 4), "near-start example");
    c.expect(idx(context::build_context(ten, 1, 4)) == std::vector<std::size_t>{0, 2, 3, 4}, "near-start values");
    std::mt19937_64 rng(7);
    std::map<std::size_t, std::vector<corpus::StoryLine>> stories;
    for (int i = 0; i < 10000 && c.ok; ++i) {
        std::size_t n = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
        std::size_t t = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        int cts = std::uniform_int_distribution<int>(0, 20)(rng);
        auto &story = stories.try_emplace(n, ts::make_story(n)).first->second;
        auto w = context::build_context(story, t, cts);
        c.expect(w.lines.size() == std::min<std::size_t>(static_cast<std::size_t>(cts), n - 1),
                 fmt::format("size for n={} t={} cts={}", n, t, cts));
        c.expect(idx(w) == ts::brute_force_window(n, t, cts), fmt::format("window n={} t={} cts={}", n, t, cts));
    }
    if (c.ok) c.detail = "2 examples, 10000 triples";
    return c;
}

Check metric_suite() {
    Check c;
    std::vector<double> x{0.5, 1.0, 4.0, 2.5};
    c.expect(std::fabs(metrics::lcc(x, x) - 1.0) <= 1e-15, "lcc(x,x) != 1");
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<double> a(10000), b(10000);
    for (auto &v : a) v = u(rng);
    for (auto &v : b) v = u(rng);
    double indep = metrics::lcc(a, b);
    c.expect(std::fabs(indep) < 0.1, fmt::format("independent lcc {}", indep));
    std::vector<double> p{2.0, 0.0}, r{3.0, 1.0};
    c.expect(metrics::tolerance_acc(p, r) == 1.0, "|d|=1 not counted");
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Eigen::MatrixXd m(10, 5);
        for (int s = 0; s < 10; ++s)
            for (int k = 0; k < 5; ++k) m(s, k) = u(rng);
        worst = std::max(worst, std::fabs(metrics::icc_2_1(m) - ts::icc_oracle(m)));
    }
    c.expect(worst <= 1e-9, fmt::format("icc diff {:.3e}", worst));
    Eigen::MatrixXd perfect(4, 3);
    perfect << 1, 1, 1, 2, 2, 2, 4, 4, 4, 3, 3, 3;
    c.expect(metrics::icc_2_1(perfect) == 1.0, "perfect agreement icc");
    if (c.ok) c.detail = fmt::format("independent lcc {:.4f}, icc diff {:.1e}", indep, worst);
    return c;
}

corpus::Corpus scored(const std::vector<double> &scores, const std::vector<double> &durs) {
    corpus::Corpus c;
    corpus::Story s;
    s.story_id = "s";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        s.lines.push_back({static_cast<int>(i), "A", "t" + std::to_string(i), true});
        s.annotations.push_back(ts::make_annotation(scores[i], durs[i]));
    }
    c.stories.push_back(std::move(s));
    return c;
}

Check rl_curation() {
    Check c;
    std::vector<double> durs{0.5, 0.999, 1.0, 1.001, 30.0, 44.999, 45.0, 45.001, 90.0};
    auto f = corpus::filter_for_rl(scored(std::vector<double>(durs.size(), 2.0), durs));
    std::vector<bool> kept;
    for (const auto &a : f.stories[0].annotations) kept.push_back(a.has_value());
    c.expect(kept == std::vector<bool>{false, false, true, true, true, true, true, false, false}, "filter range");

    std::mt19937_64 rng(9);
    std::vector<double> scores;
    for (int i = 0; i < 300; ++i) {
        // skewed towards the top buckets
        double s = 5.0 * std::sqrt(std::uniform_real_distribution<double>()(rng));
        scores.push_back(i % 25 == 0 ? 5.0 : s);
    }
    auto base = scored(scores, std::vector<double>(scores.size(), 3.0));
    auto r = corpus::rebalance_by_score(base, 42);
    auto hist = ts::bucket_histogram(r);
    c.expect(hist.size() == 6, "histogram size");
    const double uniform = static_cast<double>(r.annotated_count()) / 6.0;
    for (auto h : hist) c.expect(std::fabs(static_cast<double>(h) - uniform) <= 1.0, "bucket deviates by > 1");
    c.expect(r == corpus::rebalance_by_score(base, 42), "not deterministic under seed");
    if (c.ok) c.detail = fmt::format("{} rebalanced records", r.annotated_count());
    return c;
}

Check verdict_parsing() {
    Check c;
    auto v = judge::parse_verdict(ts::casestudy::kJudgeOutput, judge::JudgeMode::kWithCot);
    c.expect(v.final_score == 4.0, "final score");
    std::map<std::string, double> want{{"emotion", 4.2}, {"rhythm", 4.0}, {"intonation", 4.0}, {"recording_condition", 4.0}};
    c.expect(v.dimension_scores == want, "sub-scores");
    for (int i = 0; i <= 50; ++i) {
        double s = i / 10.0;
        c.expect(judge::parse_verdict(judge::format_score_tag(s), judge::JudgeMode::kWithoutCot).final_score == s,
                 fmt::format("round trip {}", s));
    }
    for (const char *bad : {"<s>5.1</s>", "<s>-0.5</s>", "<score>7.0</score>"}) {
        try {
            judge::parse_verdict(bad, judge::JudgeMode::kWithoutCot);
            c.expect(false, fmt::format("accepted {}", bad));
        } catch (const Error &e) {
            c.expect(e.code() == Errc::kScoreOutOfRange, fmt::format("wrong code for {}", bad));
        }
    }
    if (c.ok) c.detail = "case study 4.0 {4.2,4.0,4.0,4.0}, 51-point round trip";
    return c;
}

fs::path find_report(const fs::path &out) {
    for (const auto &e : fs::directory_iterator(out)) {
        if (e.is_directory() && fs::exists(e.path() / "report.json")) return e.path() / "report.json";
    }
    return {};
}

Check golden_run() {
    Check c;
    const fs::path data = CEAEVAL_DATA_DIR;
    auto out = ts::temp_dir("acceptance_golden");
    std::string cmd = fmt::format("\"{}\" run --config \"{}\" --out \"{}\" > \"{}\" 2>&1", CEAEVAL_CLI,
                                  (data / "run_toy.json").string(), out.string(), (out / "log.txt").string());
    auto t0 = Clock::now();
    int rc = std::system(cmd.c_str());
    double t = seconds_since(t0);
    c.expect(rc == 0, fmt::format("exit status {}", rc));
    auto report = find_report(out);
    c.expect(!report.empty(), "no report written");
    if (c.ok) {
        c.expect(ts::read_text(report) == ts::read_text(data / "golden/toy_report.json"), "report differs from golden");
    }
    c.expect(t < 30.0, fmt::format("took {:.2f}s", t));
    if (c.ok) c.detail = fmt::format("bit-exact in {:.3f}s", t);
    return c;
}

Check bias_export() {
    Check c;
    std::mt19937_64 rng(12);
    // build the trace from a real annotated sequence with 28 decoding steps
    std::vector<std::string> prompt{"<bos>", "rate", "<a>", "a", "a", "</a>", "ctx"};
    std::vector<std::string> output{"<t>"};
    for (int i = 0; i < 10; ++i) output.push_back("w");
    for (const char *t : {"<f>", "x", "y", "</f>"}) output.push_back(t);
    while (output.size() < 24) output.push_back("w");
    for (const char *t : {"</t>", "<s>", "4.0", "</s>"}) output.push_back(t);
    auto seq = judge::annotate_regions(prompt, judge::Span{2, 5}, output);
    auto hidden = random_matrix(rng, static_cast<Eigen::Index>(seq.size()), 8);
    auto trace = attnbias::dynamic_bias_trace(seq, attnbias::BiasParams::random(8, 13), hidden);
    c.expect(trace.size() == 28, fmt::format("trace has {} matrices", trace.size()));
    auto out = ts::temp_dir("acceptance_bias") / "trace.bias";
    attnbias::export_bias(trace, out);
    auto back = attnbias::import_bias(out);
    c.expect(back.size() == trace.size(), "matrix count");
    for (std::size_t i = 0; i < std::min(back.size(), trace.size()); ++i) {
        c.expect(back[i].size() == trace[i].size() &&
                     std::memcmp(back[i].coeff.data(), trace[i].coeff.data(),
                                 sizeof(double) * static_cast<std::size_t>(trace[i].size())) == 0,
                 fmt::format("matrix {} differs", i));
    }
    if (c.ok) c.detail = "28 matrices bitwise equal";
    return c;
}

} // namespace

int main() {
    const std::vector<std::pair<const char *, std::function<Check()>>> criteria = {
        {"mask partition", mask_partition},
        {"identity reduction", identity_reduction},
        {"coefficient ranges", coefficient_ranges},
        {"gradient check", gradient_check},
        {"reward closed form", reward_closed_form},
        {"voting", voting},
        {"context builder", context_builder},
        {"metrics", metric_suite},
        {"rl curation", rl_curation},
        {"verdict parsing", verdict_parsing},
        {"golden end-to-end", golden_run},
        {"bias export", bias_export},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            c = criteria[i].second();
        } catch (const std::exception &e) {
            c.ok = false;
            c.detail = fmt::format("threw: {}", e.what());
        }
        if (!c.ok) ++failed;
        std::printf("[%s] %zu %s: %s\n", c.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, c.detail.c_str());
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
