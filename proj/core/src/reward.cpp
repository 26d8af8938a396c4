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

#include "ceaeval/reward.hpp"

#include <algorithm>
#include <cmath>

#include "ceaeval/error.hpp"
#include "ceaeval/judge.hpp"

namespace ceaeval::reward {

namespace {
void require_finite(double v, const char *what) {
    if (!std::isfinite(v)) {
        Error e(Errc::kNonFiniteInput, what, "non-finite input");
        e.value = v;
        throw e;
    }
}
} // namespace

void RewardConfig::validate() const {
    if (!(sigma > 0.0)) throw invariant_violation("sigma", sigma);
    if (!(clip_eps > 0.0)) throw invariant_violation("clip_eps", clip_eps);
    if (!(kl_beta >= 0.0)) throw invariant_violation("kl_beta", kl_beta);
}

int bucket(double s) {
    require_finite(s, "s");
    return static_cast<int>(std::min(5.0, std::max(0.0, std::floor(s))));
}

double reward(double s_hat, double s, const RewardConfig &cfg) {
    require_finite(s_hat, "s_hat");
    require_finite(s, "s");
    cfg.validate();
    double regression = std::exp(-std::fabs(s_hat - s) / cfg.sigma);
    double ordinal = std::exp(-static_cast<double>(std::abs(bucket(s_hat) - bucket(s))));
    return regression + ordinal;
}

double grpo_surrogate(std::span<const double> ratios,
                      std::span<const double> advantages,
                      double kl,
                      const RewardConfig &cfg,
                      ClipMode mode) {
    if (ratios.size() != advantages.size() || ratios.empty()) {
        throw Error(Errc::kLengthMismatch, "ratios and advantages must have equal non-zero length");
    }
    require_finite(kl, "kl");
    if (kl < 0.0) throw invariant_violation("kl", kl);
    cfg.validate();

    const double eps = cfg.clip_eps;
    double total = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        double r = ratios[i];
        double a = advantages[i];
        require_finite(r, "ratio");
        require_finite(a, "advantage");
        if (mode == ClipMode::kPrinted) {
            total += std::clamp(r * a, -eps, eps);
        } else {
            total += std::min(r * a, std::clamp(r, 1.0 - eps, 1.0 + eps) * a);
        }
    }
    return total / static_cast<double>(ratios.size()) - cfg.kl_beta * kl;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
    if (rewards.empty()) throw Error(Errc::kEmptyInput, "empty reward group");
    double mean = 0.0;
    for (double r : rewards) {
        require_finite(r, "reward");
        mean += r;
    }
    mean /= static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size());
    double sd = std::max(std::sqrt(var), 1e-8);

    std::vector<double> out;
    out.reserve(rewards.size());
    for (double r : rewards) out.push_back((r - mean) / sd);
    return out;
}

double rollout_reward(std::string_view rollout, double reference, const RewardConfig &cfg) {
    try {
        auto verdict = judge::parse_verdict(rollout, judge::JudgeMode::kWithoutCot);
        return reward(verdict.final_score, reference, cfg);
    } catch (const Error &e) {
        switch (e.code()) {
        case Errc::kNoScoreFound:
        case Errc::kScoreOutOfRange:
        case Errc::kUnparsableNumber:
            return 0.0;
        default:
            throw;
        }
    }
}

} // namespace ceaeval::reward
