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

#include "ceaeval/error.hpp"

#include <fmt/format.h>

namespace ceaeval {

std::string_view errc_name(Errc code) {
    switch (code) {
    case Errc::kMalformedRecord: return "MalformedRecord";
    case Errc::kInvariantViolation: return "InvariantViolation";
    case Errc::kIoFailure: return "IoFailure";
    case Errc::kMissingDuration: return "MissingDuration";
    case Errc::kEmptyCorpus: return "EmptyCorpus";
    case Errc::kIndexOutOfRange: return "IndexOutOfRange";
    case Errc::kNoPlanFound: return "NoPlanFound";
    case Errc::kUnknownCategory: return "UnknownCategory";
    case Errc::kMissingField: return "MissingField";
    case Errc::kEmptyBallots: return "EmptyBallots";
    case Errc::kScoreOutOfRange: return "ScoreOutOfRange";
    case Errc::kNoScoreFound: return "NoScoreFound";
    case Errc::kUnparsableNumber: return "UnparsableNumber";
    case Errc::kUnbalancedDelimiter: return "UnbalancedDelimiter";
    case Errc::kNestedAudio: return "NestedAudio";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kDegenerateRow: return "DegenerateRow";
    case Errc::kNonFiniteGradient: return "NonFiniteGradient";
    case Errc::kNonFiniteInput: return "NonFiniteInput";
    case Errc::kLengthMismatch: return "LengthMismatch";
    case Errc::kZeroVariance: return "ZeroVariance";
    case Errc::kDegenerateAnova: return "DegenerateAnova";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kBackendFailure: return "BackendFailure";
    case Errc::kTermNotFound: return "TermNotFound";
    case Errc::kTimeout: return "Timeout";
    case Errc::kHttpError: return "HttpError";
    case Errc::kRateLimited: return "RateLimited";
    case Errc::kMalformedResponse: return "MalformedResponse";
    case Errc::kConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(Errc code, std::string message)
    : std::runtime_error(fmt::format("{}: {}", errc_name(code), message)), m_code(code) {}

Error::Error(Errc code, std::string field, std::string message)
    : std::runtime_error(fmt::format("{}({}): {}", errc_name(code), field, message)),
      m_code(code),
      m_field(std::move(field)) {}

Error invariant_violation(std::string field, double value) {
    Error e(Errc::kInvariantViolation, std::move(field), fmt::format("value {} out of bounds", value));
    e.value = value;
    return e;
}

Error invariant_violation(std::string field, std::string_view value) {
    return Error(Errc::kInvariantViolation, std::move(field), fmt::format("invalid value '{}'", value));
}

} // namespace ceaeval
