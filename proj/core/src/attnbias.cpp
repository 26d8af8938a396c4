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

#include "ceaeval/attnbias.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ceaeval/error.hpp"
#include "ceaeval/text.hpp"

namespace ceaeval::attnbias {

namespace {

Error shape_mismatch(std::string what) { return Error(Errc::kShapeMismatch, std::move(what)); }

void check_masks(const RegionMaskSet &m) {
    const Eigen::Index n = m.base.size();
    if (m.prompt.size() != n || m.audio.size() != n || m.cot.size() != n) {
        throw shape_mismatch("region masks differ in length");
    }
}

void check_qkv(const Matrix &q, const Matrix &k, const Matrix &v, Eigen::Index bias_len) {
    if (q.cols() == 0) throw shape_mismatch("hidden dimension must be positive");
    if (q.cols() != k.cols()) throw shape_mismatch("Q and K differ in width");
    if (k.rows() != v.rows()) throw shape_mismatch("K and V differ in length");
    if (k.rows() != bias_len) throw shape_mismatch("bias length differs from key count");
}

struct Interval {
    std::size_t open = 0;
    std::size_t close = 0; // position of the end token
};

std::vector<Interval> spans_of(const judge::AnnotatedSequence &seq, std::string_view open_tok,
                               std::string_view close_tok) {
    std::vector<Interval> out;
    std::optional<std::size_t> open;
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        if (seq.tokens[i].text == open_tok) open = i;
        else if (seq.tokens[i].text == close_tok && open) {
            out.push_back({*open, i});
            open.reset();
        }
    }
    if (open) out.push_back({*open, seq.tokens.size()}); // still generating
    return out;
}

bool live_at(const std::vector<Interval> &spans, std::size_t step) {
    for (const auto &s : spans) {
        if (s.open < step && step < s.close) return true;
    }
    return false;
}

} // namespace

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

RegionMaskSet build_masks(const judge::AnnotatedSequence &seq) {
    const auto n = static_cast<Eigen::Index>(seq.size());
    RegionMaskSet m{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (seq.tokens[static_cast<std::size_t>(i)].region) {
        case judge::Region::kPrompt: m.prompt[i] = 1.0; break;
        case judge::Region::kAudio: m.audio[i] = 1.0; break;
        case judge::Region::kCot:
        case judge::Region::kFocus: m.cot[i] = 1.0; break;
        case judge::Region::kScore:
        case judge::Region::kBase: m.base[i] = 1.0; break;
        }
    }
    return m;
}

BiasParams BiasParams::zeros(Eigen::Index dim) {
    return BiasParams{Vector::Zero(dim), Vector::Zero(dim), Vector::Zero(dim), 0};
}

BiasParams BiasParams::random(Eigen::Index dim, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    BiasParams p{Vector(dim), Vector(dim), Vector(dim), seed};
    for (Vector *w : {&p.w_prompt, &p.w_audio, &p.w_cot}) {
        for (Eigen::Index i = 0; i < dim; ++i) (*w)[i] = normal(rng);
    }
    return p;
}

BiasMatrix BiasMatrix::ones(Eigen::Index n) { return BiasMatrix{Vector::Ones(n)}; }

BiasMatrix compute_bias(const Matrix &hidden, const RegionMaskSet &masks, const BiasParams &params) {
    check_masks(masks);
    if (hidden.rows() != masks.size()) throw shape_mismatch("hidden states and masks differ in length");
    if (params.w_prompt.size() != hidden.cols() || params.w_audio.size() != hidden.cols() ||
        params.w_cot.size() != hidden.cols()) {
        throw shape_mismatch("gate weights and hidden width differ");
    }

    const Vector zp = hidden * params.w_prompt;
    const Vector za = hidden * params.w_audio;
    const Vector zc = hidden * params.w_cot;

    BiasMatrix b{Vector(masks.size())};
    for (Eigen::Index j = 0; j < masks.size(); ++j) {
        b.coeff[j] = 2.0 * sigmoid(zp[j]) * masks.prompt[j] + (1.0 + sigmoid(za[j])) * masks.audio[j] +
                     sigmoid(zc[j]) * masks.cot[j] + masks.base[j];
    }
    return b;
}

Matrix softmax_scores(const Matrix &q, const Matrix &k) {
    if (q.cols() != k.cols() || q.cols() == 0) throw shape_mismatch("Q and K differ in width");
    Matrix s = (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp().matrix();
        s.row(i) /= s.row(i).sum();
    }
    return s;
}

Matrix biased_weights(const Matrix &q, const Matrix &k, const BiasMatrix &bias) {
    if (k.rows() != bias.size()) throw shape_mismatch("bias length differs from key count");
    Matrix w = softmax_scores(q, k);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w.row(i) = w.row(i).cwiseProduct(bias.coeff.transpose());
        double z = w.row(i).sum();
        if (!(z > 0.0) || !std::isfinite(z)) {
            throw Error(Errc::kDegenerateRow, fmt::format("row {} has no attention mass after biasing", i));
        }
        w.row(i) /= z;
    }
    return w;
}

Matrix biased_attention(const Matrix &q, const Matrix &k, const Matrix &v, const BiasMatrix &bias) {
    check_qkv(q, k, v, bias.size());
    return biased_weights(q, k, bias) * v;
}

Matrix standard_attention(const Matrix &q, const Matrix &k, const Matrix &v) {
    check_qkv(q, k, v, k.rows());
    return softmax_scores(q, k) * v;
}

std::vector<BiasMatrix> dynamic_bias_trace(const judge::AnnotatedSequence &seq,
                                           const BiasParams &params,
                                           const Matrix &hidden) {
    const RegionMaskSet masks = build_masks(seq);
    const BiasMatrix full = compute_bias(hidden, masks, params);
    const auto cot_spans = spans_of(seq, judge::tokens::kCotOpen, judge::tokens::kCotClose);
    const auto focus_spans = spans_of(seq, judge::tokens::kFocusOpen, judge::tokens::kFocusClose);

    std::vector<BiasMatrix> trace;
    for (std::size_t step = seq.prompt_length; step < seq.size(); ++step) {
        const bool cot_live = live_at(cot_spans, step);
        const bool audio_live = live_at(focus_spans, step);
        const auto n = static_cast<Eigen::Index>(step + 1);
        BiasMatrix b = BiasMatrix::ones(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            if ((masks.prompt[j] > 0.0 || masks.cot[j] > 0.0) && cot_live) b.coeff[j] = full.coeff[j];
            if (masks.audio[j] > 0.0 && audio_live) b.coeff[j] = full.coeff[j];
        }
        trace.push_back(std::move(b));
    }
    return trace;
}

GradProbe GradProbe::random(Eigen::Index length, Eigen::Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](Eigen::Index r, Eigen::Index c) {
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
        return m;
    };
    GradProbe p;
    p.q = fill(length, dim);
    p.k = fill(length, dim);
    p.v = fill(length, dim);
    p.hidden = fill(length, dim);
    p.masks = {Vector::Zero(length), Vector::Zero(length), Vector::Zero(length), Vector::Zero(length)};
    std::uniform_int_distribution<int> region(0, 3);
    for (Eigen::Index i = 0; i < length; ++i) {
        switch (region(rng)) {
        case 0: p.masks.prompt[i] = 1.0; break;
        case 1: p.masks.audio[i] = 1.0; break;
        case 2: p.masks.cot[i] = 1.0; break;
        default: p.masks.base[i] = 1.0; break;
        }
    }
    return p;
}

double probe_loss(const GradProbe &probe, const BiasParams &params) {
    BiasMatrix b = compute_bias(probe.hidden, probe.masks, params);
    return biased_attention(probe.q, probe.k, probe.v, b).sum();
}

Gradients analytic_gradients(const GradProbe &probe, const BiasParams &params, bool detached) {
    const Eigen::Index d = probe.hidden.cols();
    Gradients g{Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
    if (detached) return g;

    const BiasMatrix b = compute_bias(probe.hidden, probe.masks, params);
    const Matrix s = softmax_scores(probe.q, probe.k);
    const Matrix w = biased_weights(probe.q, probe.k, b);
    const Vector vsum = probe.v.rowwise().sum();  // loss = sum_i sum_j W_ij vsum_j
    const Vector ybar = w * vsum;
    const Vector z = s * b.coeff;                  // row normalisers

    // dL/db_j = sum_i S_ij / Z_i (vsum_j - ybar_i)
    Vector dl_db = Vector::Zero(b.size());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index j = 0; j < s.cols(); ++j) dl_db[j] += s(i, j) / z[i] * (vsum[j] - ybar[i]);
    }

    const Vector zp = probe.hidden * params.w_prompt;
    const Vector za = probe.hidden * params.w_audio;
    const Vector zc = probe.hidden * params.w_cot;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        auto dsig = [](double x) {
            double sg = sigmoid(x);
            return sg * (1.0 - sg);
        };
        const auto xj = probe.hidden.row(j).transpose();
        g.w_prompt += dl_db[j] * 2.0 * dsig(zp[j]) * probe.masks.prompt[j] * xj;
        g.w_audio += dl_db[j] * dsig(za[j]) * probe.masks.audio[j] * xj;
        g.w_cot += dl_db[j] * dsig(zc[j]) * probe.masks.cot[j] * xj;
    }
    return g;
}

GradCheckReport grad_check(const BiasParams &params, const GradProbe &probe, double eps, bool detached) {
    GradCheckReport report;
    report.analytic = analytic_gradients(probe, params, detached);

    const Eigen::Index d = params.dim();
    report.numeric = Gradients{Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
    // A detached bias is evaluated once at the unperturbed weights.
    const BiasMatrix frozen = compute_bias(probe.hidden, probe.masks, params);
    auto loss = [&](const BiasParams &p) {
        if (detached) return biased_attention(probe.q, probe.k, probe.v, frozen).sum();
        return probe_loss(probe, p);
    };

    Vector BiasParams::*members[] = {&BiasParams::w_prompt, &BiasParams::w_audio, &BiasParams::w_cot};
    Vector *numeric[] = {&report.numeric.w_prompt, &report.numeric.w_audio, &report.numeric.w_cot};
    const Vector *analytic[] = {&report.analytic.w_prompt, &report.analytic.w_audio, &report.analytic.w_cot};

    for (int m = 0; m < 3; ++m) {
        for (Eigen::Index i = 0; i < d; ++i) {
            BiasParams plus = params;
            BiasParams minus = params;
            (plus.*members[m])[i] += eps;
            (minus.*members[m])[i] -= eps;
            double fd = (loss(plus) - loss(minus)) / (2.0 * eps);
            (*numeric[m])[i] = fd;

            double an = (*analytic[m])[i];
            if (!std::isfinite(fd) || !std::isfinite(an)) {
                throw Error(Errc::kNonFiniteGradient, fmt::format("component {} of gate {}", i, m));
            }
            double abs_err = std::fabs(an - fd);
            double scale = std::max(std::fabs(an), std::fabs(fd));
            double rel = scale < 1e-10 ? 0.0 : abs_err / scale;
            report.max_abs_err = std::max(report.max_abs_err, abs_err);
            report.max_rel_err = std::max(report.max_rel_err, rel);
        }
    }
    return report;
}

void write_bias(std::span<const BiasMatrix> trace, std::ostream &out) {
    out << "CEAEVAL-BIAS v1\n";
    out << "count=" << trace.size() << '\n';
    for (const auto &b : trace) {
        out << 1 << ' ' << b.size() << '\n';
        for (Eigen::Index j = 0; j < b.size(); ++j) {
            if (j) out << ' ';
            out << text::format_roundtrip(b.coeff[j]);
        }
        out << '\n';
    }
}

std::vector<BiasMatrix> read_bias(std::istream &in) {
    auto bad = [](std::string why) { return Error(Errc::kMalformedRecord, "bias grid: " + why); };
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "CEAEVAL-BIAS v1") throw bad("missing header");
    if (!std::getline(in, line) || !line.starts_with("count=")) throw bad("missing count");
    auto count = text::parse_double(std::string_view(line).substr(6));
    if (!count || *count < 0 || *count != std::floor(*count)) throw bad("invalid count");

    std::vector<BiasMatrix> out;
    for (std::size_t m = 0; m < static_cast<std::size_t>(*count); ++m) {
        long rows = 0, cols = 0;
        if (!std::getline(in, line)) throw bad("truncated");
        std::istringstream dims(line);
        if (!(dims >> rows >> cols) || rows < 0 || cols < 0) throw bad("invalid dimensions");
        BiasMatrix b{Vector(rows * cols)};
        Eigen::Index idx = 0;
        for (long r = 0; r < rows; ++r) {
            if (!std::getline(in, line)) throw bad("truncated");
            auto cells = text::split(text::trim(line), ' ');
            if (cols == 0) cells.clear();
            if (static_cast<long>(cells.size()) != cols) throw bad("row width mismatch");
            for (const auto &c : cells) {
                auto v = text::parse_double(c);
                if (!v) throw bad("invalid value '" + c + "'");
                b.coeff[idx++] = *v;
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

void export_bias(std::span<const BiasMatrix> trace, const std::filesystem::path &path) {
    if (trace.empty()) throw Error(Errc::kEmptyInput, "bias trace is empty");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kIoFailure, path.string(), "cannot open for writing");
    write_bias(trace, out);
    if (!out) throw Error(Errc::kIoFailure, path.string(), "write failed");
}

std::vector<BiasMatrix> import_bias(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::kIoFailure, path.string(), "cannot open bias grid");
    return read_bias(in);
}

} // namespace ceaeval::attnbias
