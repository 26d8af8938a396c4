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
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ceaeval::llm {
struct BackendConfig;
}

namespace ceaeval::metrics {

/// Pearson linear correlation. Throws LengthMismatch (also for n < 2) or
/// ZeroVariance.
double lcc(std::span<const double> preds, std::span<const double> refs);

/// Fraction of pairs with |pred - ref| <= tol.
double tolerance_acc(std::span<const double> preds, std::span<const double> refs, double tol = 1.0);

struct AnovaMeanSquares {
    double rows = 0.0;   // subjects
    double cols = 0.0;   // raters
    double error = 0.0;  // residual
};

/// Two-way ANOVA mean squares of an n_subjects x k_raters matrix.
AnovaMeanSquares two_way_anova(const Eigen::MatrixXd &ratings);

/// ICC(2,1), absolute agreement, single rater:
/// (MSR - MSE) / (MSR + (k-1) MSE + k/n (MSC - MSE)).
/// Throws InvariantViolation for n < 2, k < 2 or non-finite cells, and
/// DegenerateAnova when the denominator vanishes.
double icc_2_1(const Eigen::MatrixXd &ratings);

using LabelMatrix = std::vector<std::vector<std::string>>;

/// Mean over subjects of the fraction of raters that picked the modal label
/// (ties resolved to the lexicographically smallest label).
double percent_agreement(const LabelMatrix &labels);

// ---------------------------------------------------------------------------
// Embedding agreement

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

/// Deterministic bag-of-character-trigram hashing embedder. Identical texts
/// embed identically; unrelated texts land near-orthogonal.
class HashEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit HashEmbeddingBackend(std::size_t dim = 256) : m_dim(dim) {}
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
    std::size_t m_dim;
};

/// Fixed text -> vector table; unknown texts are a BackendFailure.
class TableEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit TableEmbeddingBackend(std::map<std::string, std::vector<double>> table)
        : m_table(std::move(table)) {}
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
    std::map<std::string, std::vector<double>> m_table;
};

/// POST {base_url}/embeddings with {"model", "input": [...]}.
std::unique_ptr<EmbeddingBackend> make_http_embedding_backend(const llm::BackendConfig &cfg);

/// Mean over subjects of the mean pairwise cosine similarity between raters.
/// Throws EmptyInput or BackendFailure.
double embedding_agreement(const LabelMatrix &texts, EmbeddingBackend &backend);

// ---------------------------------------------------------------------------
// VAD mapping

struct Vad {
    double valence = 0.0;
    double arousal = 0.0;
    double dominance = 0.0;
};

class VadLexicon {
public:
    VadLexicon() = default;
    explicit VadLexicon(std::map<std::string, Vad> entries);

    // "term<TAB>valence<TAB>arousal<TAB>dominance" per line; optional header.
    static VadLexicon parse(std::string_view tsv);
    static VadLexicon load(const std::filesystem::path &path);

    const Vad *find(std::string_view term) const;
    std::size_t size() const { return m_entries.size(); }

private:
    std::map<std::string, Vad, std::less<>> m_entries;
};

/// Lowercased exact lookup; otherwise the mean over the description's words
/// that are in the lexicon. Throws TermNotFound when nothing matches.
Vad map_emotion_to_vad(std::string_view term, const VadLexicon &lexicon);

/// Emotion ICC: each description mapped to VAD, ICC(2,1) per axis, averaged.
double emotion_vad_icc(const LabelMatrix &descriptions, const VadLexicon &lexicon);

// Reads a tab-separated subject x rater matrix (one subject per line).
LabelMatrix read_label_matrix(const std::filesystem::path &path);
Eigen::MatrixXd read_rating_matrix(const std::filesystem::path &path);

} // namespace ceaeval::metrics
