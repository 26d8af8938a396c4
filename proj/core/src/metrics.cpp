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

#include "ceaeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ceaeval/error.hpp"
#include "ceaeval/llmbackend.hpp"
#include "ceaeval/text.hpp"

namespace ceaeval::metrics {

namespace {

void check_pairs(std::span<const double> preds, std::span<const double> refs, std::size_t min_n) {
    if (preds.size() != refs.size()) {
        throw Error(Errc::kLengthMismatch,
                    fmt::format("{} predictions vs {} references", preds.size(), refs.size()));
    }
    if (preds.size() < min_n) {
        throw Error(Errc::kLengthMismatch, fmt::format("need at least {} pairs, got {}", min_n, preds.size()));
    }
}

double mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double cosine(const std::vector<double> &a, const std::vector<double> &b) {
    if (a.size() != b.size() || a.empty()) throw Error(Errc::kBackendFailure, "embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) throw Error(Errc::kBackendFailure, "zero-norm embedding");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::vector<std::string>> read_tsv_rows(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::kIoFailure, path.string(), "cannot open matrix file");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        auto cells = text::split(line, '\t');
        for (auto &c : cells) c = std::string(text::trim(c));
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace

double lcc(std::span<const double> preds, std::span<const double> refs) {
    check_pairs(preds, refs, 2);
    const double mp = mean(preds);
    const double mr = mean(refs);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        double dp = preds[i] - mp;
        double dr = refs[i] - mr;
        sxy += dp * dr;
        sxx += dp * dp;
        syy += dr * dr;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(Errc::kZeroVariance, "constant input vector");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double tolerance_acc(std::span<const double> preds, std::span<const double> refs, double tol) {
    check_pairs(preds, refs, 1);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (std::fabs(preds[i] - refs[i]) <= tol) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

AnovaMeanSquares two_way_anova(const Eigen::MatrixXd &ratings) {
    const auto n = ratings.rows();
    const auto k = ratings.cols();
    if (n < 2) throw invariant_violation("n_subjects", static_cast<double>(n));
    if (k < 2) throw invariant_violation("k_raters", static_cast<double>(k));
    if (!ratings.allFinite()) throw Error(Errc::kInvariantViolation, "ratings", "non-finite or missing cell");

    const double grand = ratings.mean();
    const Eigen::VectorXd row_means = ratings.rowwise().mean();
    const Eigen::RowVectorXd col_means = ratings.colwise().mean();

    double ss_rows = 0.0, ss_cols = 0.0, ss_err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ss_rows += (row_means[i] - grand) * (row_means[i] - grand);
    for (Eigen::Index j = 0; j < k; ++j) ss_cols += (col_means[j] - grand) * (col_means[j] - grand);
    ss_rows *= static_cast<double>(k);
    ss_cols *= static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            double e = ratings(i, j) - row_means[i] - col_means[j] + grand;
            ss_err += e * e;
        }
    }

    const double dn = static_cast<double>(n);
    const double dk = static_cast<double>(k);
    return {ss_rows / (dn - 1.0), ss_cols / (dk - 1.0), ss_err / ((dn - 1.0) * (dk - 1.0))};
}

double icc_2_1(const Eigen::MatrixXd &ratings) {
    const AnovaMeanSquares ms = two_way_anova(ratings);
    const double n = static_cast<double>(ratings.rows());
    const double k = static_cast<double>(ratings.cols());
    const double denom = ms.rows + (k - 1.0) * ms.error + (k / n) * (ms.cols - ms.error);
    if (!(std::fabs(denom) > 0.0)) throw Error(Errc::kDegenerateAnova, "ICC denominator is zero");
    return (ms.rows - ms.error) / denom;
}

double percent_agreement(const LabelMatrix &labels) {
    if (labels.empty()) throw Error(Errc::kEmptyInput, "no subjects");
    double total = 0.0;
    for (const auto &row : labels) {
        if (row.empty()) throw Error(Errc::kEmptyInput, "subject without ratings");
        std::map<std::string, std::size_t> counts;
        for (const auto &l : row) ++counts[l];
        // std::map iterates lexicographically, so the first maximum is the smallest mode
        std::size_t best = 0;
        for (const auto &[_, c] : counts) best = std::max(best, c);
        total += static_cast<double>(best) / static_cast<double>(row.size());
    }
    return total / static_cast<double>(labels.size());
}

std::vector<std::vector<double>> HashEmbeddingBackend::embed(std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto &t : texts) {
        std::vector<double> v(m_dim, 0.0);
        std::string padded = "  " + text::canonical(t) + "  ";
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
            std::uint64_t h = text::fnv1a64(std::string_view(padded).substr(i, 3));
            v[h % m_dim] += (h >> 63) ? 1.0 : -1.0;
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<std::vector<double>> TableEmbeddingBackend::embed(std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    for (const auto &t : texts) {
        auto it = m_table.find(t);
        if (it == m_table.end()) throw Error(Errc::kBackendFailure, "no embedding for '" + t + "'");
        out.push_back(it->second);
    }
    return out;
}

namespace {
class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(llm::BackendConfig cfg) : m_cfg(std::move(cfg)) { m_cfg.validate(); }

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        nlohmann::json body = {{"model", m_cfg.model_id}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
        std::string raw;
        try {
            raw = llm::post_json(m_cfg, "/embeddings", body.dump());
        } catch (const Error &e) {
            throw Error(Errc::kBackendFailure, e.what());
        }
        auto j = nlohmann::json::parse(raw, nullptr, false);
        if (j.is_discarded() || !j.contains("data") || !j["data"].is_array() || j["data"].size() != texts.size()) {
            throw Error(Errc::kBackendFailure, "malformed embedding response");
        }
        std::vector<std::vector<double>> out(texts.size());
        for (std::size_t i = 0; i < texts.size(); ++i) {
            const auto &item = j["data"][i];
            std::size_t idx = item.value("index", i);
            if (idx >= texts.size() || !item.contains("embedding")) {
                throw Error(Errc::kBackendFailure, "malformed embedding item");
            }
            out[idx] = item["embedding"].get<std::vector<double>>();
        }
        return out;
    }

private:
    llm::BackendConfig m_cfg;
};
} // namespace

std::unique_ptr<EmbeddingBackend> make_http_embedding_backend(const llm::BackendConfig &cfg) {
    return std::make_unique<HttpEmbeddingBackend>(cfg);
}

double embedding_agreement(const LabelMatrix &texts, EmbeddingBackend &backend) {
    if (texts.empty()) throw Error(Errc::kEmptyInput, "no subjects");
    double total = 0.0;
    for (const auto &row : texts) {
        if (row.size() < 2) throw Error(Errc::kEmptyInput, "need at least two raters per subject");
        auto vecs = backend.embed(row);
        if (vecs.size() != row.size()) throw Error(Errc::kBackendFailure, "embedding count mismatch");
        double sum = 0.0;
        std::size_t pairs = 0;
        for (std::size_t a = 0; a < vecs.size(); ++a) {
            for (std::size_t b = a + 1; b < vecs.size(); ++b) {
                sum += cosine(vecs[a], vecs[b]);
                ++pairs;
            }
        }
        total += sum / static_cast<double>(pairs);
    }
    return total / static_cast<double>(texts.size());
}

VadLexicon::VadLexicon(std::map<std::string, Vad> entries) {
    for (auto &[k, v] : entries) m_entries.emplace(text::canonical(k), v);
}

VadLexicon VadLexicon::parse(std::string_view tsv) {
    std::map<std::string, Vad> entries;
    std::size_t line_no = 0;
    for (const auto &raw : text::split(tsv, '\n')) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto cols = text::split(line, '\t');
        if (cols.size() != 4) {
            Error e(Errc::kMalformedRecord, fmt::format("VAD lexicon line {}: expected 4 columns", line_no));
            e.line = line_no;
            throw e;
        }
        auto v = text::parse_double(cols[1]);
        auto a = text::parse_double(cols[2]);
        auto d = text::parse_double(cols[3]);
        if (!v || !a || !d) {
            if (entries.empty() && line_no == 1) continue; // header row
            Error e(Errc::kMalformedRecord, fmt::format("VAD lexicon line {}: bad number", line_no));
            e.line = line_no;
            throw e;
        }
        entries[cols[0]] = Vad{*v, *a, *d};
    }
    return VadLexicon(std::move(entries));
}

VadLexicon VadLexicon::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::kIoFailure, path.string(), "cannot open VAD lexicon");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

const Vad *VadLexicon::find(std::string_view term) const {
    auto it = m_entries.find(term);
    return it == m_entries.end() ? nullptr : &it->second;
}

Vad map_emotion_to_vad(std::string_view term, const VadLexicon &lexicon) {
    const std::string key = text::canonical(term);
    if (const Vad *hit = lexicon.find(key)) return *hit;

    Vad sum;
    std::size_t matched = 0;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        if (const Vad *hit = lexicon.find(word)) {
            sum.valence += hit->valence;
            sum.arousal += hit->arousal;
            sum.dominance += hit->dominance;
            ++matched;
        }
        word.clear();
    };
    for (char c : key) {
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '-' || c == '\'') word.push_back(c);
        else flush();
    }
    flush();
    if (matched == 0) throw Error(Errc::kTermNotFound, std::string(term), "no lexicon entry");
    const double m = static_cast<double>(matched);
    return Vad{sum.valence / m, sum.arousal / m, sum.dominance / m};
}

double emotion_vad_icc(const LabelMatrix &descriptions, const VadLexicon &lexicon) {
    if (descriptions.empty()) throw Error(Errc::kEmptyInput, "no subjects");
    const auto n = static_cast<Eigen::Index>(descriptions.size());
    const auto k = static_cast<Eigen::Index>(descriptions.front().size());
    Eigen::MatrixXd v(n, k), a(n, k), d(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto &row = descriptions[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != k) throw Error(Errc::kInvariantViolation, "ratings", "ragged matrix");
        for (Eigen::Index j = 0; j < k; ++j) {
            Vad x = map_emotion_to_vad(row[static_cast<std::size_t>(j)], lexicon);
            v(i, j) = x.valence;
            a(i, j) = x.arousal;
            d(i, j) = x.dominance;
        }
    }
    return (icc_2_1(v) + icc_2_1(a) + icc_2_1(d)) / 3.0;
}

LabelMatrix read_label_matrix(const std::filesystem::path &path) {
    auto rows = read_tsv_rows(path);
    if (rows.empty()) throw Error(Errc::kEmptyInput, path.string(), "matrix file has no rows");
    return rows;
}

Eigen::MatrixXd read_rating_matrix(const std::filesystem::path &path) {
    auto rows = read_tsv_rows(path);
    if (rows.empty()) throw Error(Errc::kEmptyInput, path.string(), "matrix file has no rows");
    const std::size_t k = rows.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != k) throw Error(Errc::kInvariantViolation, "ratings", "ragged matrix");
        for (std::size_t j = 0; j < k; ++j) {
            auto v = text::parse_double(rows[i][j]);
            if (!v) {
                Error e(Errc::kMalformedRecord, fmt::format("line {}: '{}' is not a number", i + 1, rows[i][j]));
                e.line = i + 1;
                throw e;
            }
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
        }
    }
    return m;
}

} // namespace ceaeval::metrics
