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
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ceaeval {

enum class Errc {
    // corpus
    kMalformedRecord,
    kInvariantViolation,
    kIoFailure,
    kMissingDuration,
    kEmptyCorpus,
    // context
    kIndexOutOfRange,
    // planner
    kNoPlanFound,
    kUnknownCategory,
    kMissingField,
    kEmptyBallots,
    // judge
    kScoreOutOfRange,
    kNoScoreFound,
    kUnparsableNumber,
    kUnbalancedDelimiter,
    kNestedAudio,
    // attnbias
    kShapeMismatch,
    kDegenerateRow,
    kNonFiniteGradient,
    // reward / metrics
    kNonFiniteInput,
    kLengthMismatch,
    kZeroVariance,
    kDegenerateAnova,
    kEmptyInput,
    kBackendFailure,
    kTermNotFound,
    // llmbackend
    kTimeout,
    kHttpError,
    kRateLimited,
    kMalformedResponse,
    // pipeline
    kConfigError,
};

std::string_view errc_name(Errc code);

/// The single exception type thrown by the library.
///
/// `field`, `value` and `line` carry the structured payload of the named
/// error kinds, e.g. InvariantViolation("expressive_score", 5.5) or
/// MalformedRecord(line 12, reason).
class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message);
    Error(Errc code, std::string field, std::string message);

    Errc code() const noexcept { return m_code; }
    const std::string &field() const noexcept { return m_field; }

    std::optional<double> value;
    std::optional<std::size_t> line;
    std::optional<int> status;

private:
    Errc m_code;
    std::string m_field;
};

Error invariant_violation(std::string field, double value);
Error invariant_violation(std::string field, std::string_view value);

} // namespace ceaeval
