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
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ceaeval/judge.hpp"

// Single-head, double-precision reference kernel for region-gated attention
// bias. Bias coefficients are per key position and broadcast over queries.

namespace ceaeval::attnbias {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Mutually exclusive 0/1 indicators over sequence positions.
struct RegionMaskSet {
    Vector prompt;
    Vector audio;
    Vector cot;  // includes focus spans
    Vector base; // everything else, score span included

    Eigen::Index size() const { return base.size(); }
};

RegionMaskSet build_masks(const judge::AnnotatedSequence &seq);

/// Scalar gate projections f(x) = w . x, one per biased region.
struct BiasParams {
    Vector w_prompt;
    Vector w_audio;
    Vector w_cot;
    std::uint64_t seed = 0;

    Eigen::Index dim() const { return w_prompt.size(); }

    static BiasParams zeros(Eigen::Index dim);
    // Deterministic N(0, scale^2) initialisation from `seed`.
    static BiasParams random(Eigen::Index dim, std::uint64_t seed, double scale = 1.0);
};

/// Per-key multiplicative coefficients.
struct BiasMatrix {
    Vector coeff;

    Eigen::Index size() const { return coeff.size(); }
    static BiasMatrix ones(Eigen::Index n);
};

double sigmoid(double z);

/// B = 2 s(f_p(X)) M_p + (1 + s(f_a(X))) M_a + s(f_cot(X)) M_cot + M_base,
/// evaluated per position from that position's row of X (L x d).
/// Throws ShapeMismatch.
BiasMatrix compute_bias(const Matrix &hidden, const RegionMaskSet &masks, const BiasParams &params);

/// Row-wise softmax(Q K^T / sqrt(d)).
Matrix softmax_scores(const Matrix &q, const Matrix &k);

/// Softmax scores scaled by the key-side bias, each row renormalised to sum 1.
Matrix biased_weights(const Matrix &q, const Matrix &k, const BiasMatrix &bias);

/// norm(softmax(Q K^T / sqrt(d)) * B) V. Throws ShapeMismatch, or
/// DegenerateRow if a row loses all mass (impossible for positive B).
Matrix biased_attention(const Matrix &q, const Matrix &k, const Matrix &v, const BiasMatrix &bias);

/// softmax(Q K^T / sqrt(d)) V.
Matrix standard_attention(const Matrix &q, const Matrix &k, const Matrix &v);

/// Bias seen at each autoregressive decode step.
///
/// Step s covers keys 0..s and exists for every output position s >=
/// seq.prompt_length. Gates follow the region the query is decoding:
///   - the prompt and CoT gates are live strictly inside a <t>...</t> span;
///   - the audio gate is live strictly inside a <f>...</f> focus span.
/// A gate opens on the position after its start token and closes when the end
/// token is reached; keys of a closed gate get the base coefficient 1.
std::vector<BiasMatrix> dynamic_bias_trace(const judge::AnnotatedSequence &seq,
                                           const BiasParams &params,
                                           const Matrix &hidden);

// ---------------------------------------------------------------------------
// Gradient verification

struct GradProbe {
    Matrix q, k, v, hidden;
    RegionMaskSet masks;

    // Random probe with a random region partition; L x d.
    static GradProbe random(Eigen::Index length, Eigen::Index dim, std::uint64_t seed);
};

struct Gradients {
    Vector w_prompt;
    Vector w_audio;
    Vector w_cot;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    Gradients analytic;
    Gradients numeric;
};

/// Loss used for the check: sum of all biased attention outputs.
double probe_loss(const GradProbe &probe, const BiasParams &params);

/// Closed-form gradient of probe_loss w.r.t. the three gate weight vectors.
/// With `detached` the bias is treated as a constant and the result is zero.
Gradients analytic_gradients(const GradProbe &probe, const BiasParams &params, bool detached = false);

/// Compares analytic gradients to central finite differences with step eps.
/// Components where both magnitudes are below 1e-10 count as exact agreement.
/// Throws NonFiniteGradient.
GradCheckReport grad_check(const BiasParams &params, const GradProbe &probe, double eps = 1e-5,
                           bool detached = false);

// ---------------------------------------------------------------------------
// Grid export: "CEAEVAL-BIAS v1", "count=<n>", then per matrix "rows cols"
// followed by rows of 17-significant-digit values.

void write_bias(std::span<const BiasMatrix> trace, std::ostream &out);
std::vector<BiasMatrix> read_bias(std::istream &in);
void export_bias(std::span<const BiasMatrix> trace, const std::filesystem::path &path);
std::vector<BiasMatrix> import_bias(const std::filesystem::path &path);

} // namespace ceaeval::attnbias
