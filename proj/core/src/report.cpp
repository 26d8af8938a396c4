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

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ceaeval/error.hpp"
#include "ceaeval/metrics.hpp"
#include "ceaeval/pipeline.hpp"

namespace ceaeval::pipeline {

using ojson = nlohmann::ordered_json;

std::vector<CellResult> score_cells(const std::vector<ScoreRecord> &scores, const std::vector<int> &cts,
                                    const std::vector<judge::JudgeMode> &modes) {
    std::vector<int> cts_sorted = cts;
    std::sort(cts_sorted.begin(), cts_sorted.end());
    std::vector<judge::JudgeMode> modes_sorted = modes;
    std::sort(modes_sorted.begin(), modes_sorted.end());

    std::vector<const ScoreRecord *> ordered;
    for (const auto &s : scores) ordered.push_back(&s);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const ScoreRecord *a, const ScoreRecord *b) { return a->target < b->target; });

    std::vector<CellResult> cells;
    for (int c : cts_sorted) {
        for (auto m : modes_sorted) {
            std::vector<double> preds, refs;
            for (const auto *s : ordered) {
                if (s->cts != c || s->mode != m) continue;
                preds.push_back(s->pred);
                refs.push_back(s->ref);
            }
            CellResult cell;
            cell.cts = c;
            cell.mode = m;
            cell.n = preds.size();
            if (!preds.empty()) cell.acc = metrics::tolerance_acc(preds, refs);
            try {
                cell.lcc = metrics::lcc(preds, refs);
            } catch (const Error &e) {
                if (e.code() != Errc::kZeroVariance && e.code() != Errc::kLengthMismatch) throw;
            }
            cells.push_back(cell);
        }
    }
    return cells;
}

std::string report_to_json(const EvalReport &r) {
    ojson j;
    j["config_hash"] = r.config_hash;
    j["template_version"] = r.template_version;
    j["corpus_hash"] = r.corpus_hash;
    j["prompt_path"] = r.prompt_path;
    j["targets"] = r.targets;
    j["units"] = r.units;
    j["failed_units"] = r.failed_units;
    j["cells"] = ojson::array();
    for (const auto &c : r.cells) {
        ojson cell;
        cell["cts"] = c.cts;
        cell["mode"] = std::string(judge::to_string(c.mode));
        cell["n"] = c.n;
        cell["failed"] = c.failed;
        cell["lcc"] = c.lcc ? ojson(*c.lcc) : ojson(nullptr);
        cell["acc"] = c.acc;
        j["cells"].push_back(std::move(cell));
    }
    j["agreement"] = ojson::array();
    for (const auto &a : r.agreement) {
        j["agreement"].push_back(ojson{{"name", a.name}, {"kind", a.kind}, {"value", a.value}});
    }
    return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view json_text) {
    auto j = ojson::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(Errc::kMalformedRecord, "report", "not a JSON object");
    EvalReport r;
    try {
        r.config_hash = j.at("config_hash").get<std::string>();
        r.template_version = j.at("template_version").get<std::string>();
        r.corpus_hash = j.value("corpus_hash", "");
        r.prompt_path = j.value("prompt_path", "");
        r.targets = j.value("targets", std::size_t{0});
        r.units = j.value("units", std::size_t{0});
        r.failed_units = j.value("failed_units", std::size_t{0});
        for (const auto &c : j.at("cells")) {
            CellResult cell;
            cell.cts = c.at("cts").get<int>();
            auto mode = judge::parse_mode(c.at("mode").get<std::string>());
            if (!mode) throw Error(Errc::kMalformedRecord, "mode", c.at("mode").get<std::string>());
            cell.mode = *mode;
            cell.n = c.at("n").get<std::size_t>();
            cell.failed = c.value("failed", std::size_t{0});
            if (!c.at("lcc").is_null()) cell.lcc = c["lcc"].get<double>();
            cell.acc = c.at("acc").get<double>();
            r.cells.push_back(cell);
        }
        if (j.contains("agreement")) {
            for (const auto &a : j["agreement"]) {
                r.agreement.push_back({a.at("name").get<std::string>(), a.at("kind").get<std::string>(),
                                       a.at("value").get<double>()});
            }
        }
    } catch (const ojson::exception &e) {
        throw Error(Errc::kMalformedRecord, "report", e.what());
    }
    return r;
}

EvalReport load_report(const std::filesystem::path &path) {
    const auto file = std::filesystem::is_directory(path) ? path / "report.json" : path;
    std::ifstream in(file);
    if (!in) throw Error(Errc::kIoFailure, file.string(), "cannot open report");
    std::stringstream ss;
    ss << in.rdbuf();
    return report_from_json(ss.str());
}

std::optional<ReportFormat> parse_report_format(std::string_view s) {
    if (s == "table") return ReportFormat::kTable;
    if (s == "csv") return ReportFormat::kCsv;
    if (s == "plotdata") return ReportFormat::kPlotData;
    return std::nullopt;
}

namespace {

std::string num(std::optional<double> v) { return v ? fmt::format("{:.4f}", *v) : "NA"; }

} // namespace

std::string render_report(const EvalReport &report, ReportFormat format) {
    std::string out;
    switch (format) {
    case ReportFormat::kTable: {
        out += fmt::format("{:>4}  {:<12}{:>6}{:>9}{:>9}\n", "cts", "mode", "n", "lcc", "acc");
        for (const auto &c : report.cells) {
            out += fmt::format("{:>4}  {:<12}{:>6}{:>9}{:>9}\n", c.cts, judge::to_string(c.mode), c.n, num(c.lcc),
                               num(c.acc));
        }
        if (!report.agreement.empty()) {
            out += fmt::format("\n{:<20}{:<11}{:>9}\n", "agreement", "kind", "value");
            for (const auto &a : report.agreement) {
                out += fmt::format("{:<20}{:<11}{:>9}\n", a.name, a.kind, num(a.value));
            }
        }
        break;
    }
    case ReportFormat::kCsv:
        out += "cts,mode,n,lcc,acc\n";
        for (const auto &c : report.cells) {
            out += fmt::format("{},{},{},{},{}\n", c.cts, judge::to_string(c.mode), c.n, num(c.lcc), num(c.acc));
        }
        break;
    case ReportFormat::kPlotData: {
        // one whitespace-separated block per mode, blank-line separated
        std::vector<judge::JudgeMode> modes;
        for (const auto &c : report.cells) {
            if (std::find(modes.begin(), modes.end(), c.mode) == modes.end()) modes.push_back(c.mode);
        }
        for (std::size_t i = 0; i < modes.size(); ++i) {
            if (i > 0) out += "\n\n";
            out += fmt::format("# mode={}\n# cts lcc acc\n", judge::to_string(modes[i]));
            for (const auto &c : report.cells) {
                if (c.mode == modes[i]) out += fmt::format("{} {} {}\n", c.cts, num(c.lcc), num(c.acc));
            }
        }
        break;
    }
    }
    return out;
}

} // namespace ceaeval::pipeline
