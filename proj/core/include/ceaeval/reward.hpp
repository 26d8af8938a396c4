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

#include <span>
#include <string_view>
#include <vector>

namespace ceaeval::reward {

struct RewardConfig {
    double sigma = 1.0;     // distance scale of the regression term
    double clip_eps = 0.1;  // objective clip half-width
    double kl_beta = 0.01;  // KL penalty weight

    // Throws InvariantViolation for sigma <= 0, clip_eps <= 0 or kl_beta < 0.
    void validate() const;
};

/// Integer score bucket: min(5, max(0, floor(s))).
int bucket(double s);

/// exp(-|s_hat - s| / sigma) + exp(-|b(s_hat) - b(s)|), in (0, 2].
double reward(double s_hat, double s, const RewardConfig &cfg = {});

enum class ClipMode {
    // clip(ratio * advantage, -eps, +eps): the clipped form used for the judge
    kPrinted,
    // min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A): PPO/GRPO-style
    kStandard,
};

/// Mean clipped surrogate over samples minus kl_beta * kl.
double grpo_surrogate(std::span<const double> ratios,
                      std::span<const double> advantages,
                      double kl,
                      const RewardConfig &cfg = {},
                      ClipMode mode = ClipMode::kPrinted);

/// Group-standardized advantages (r - mean) / max(std, 1e-8), population std.
std::vector<double> group_advantages(std::span<const double> rewards);

/// Reward of a sampled judge output against the reference score. Rollouts
/// without a parsable in-range score tag earn 0 instead of failing the batch.
double rollout_reward(std::string_view rollout, double reference, const RewardConfig &cfg = {});

} // namespace ceaeval::reward
