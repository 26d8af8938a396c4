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
#include <span>
#include <string>
#include <vector>

#include "ceaeval/corpus.hpp"

namespace ceaeval::context {

/// Context lines selected around a target line. `lines` never contains the
/// target and keeps story order.
struct ContextWindow {
    int cts = 0;
    std::vector<corpus::StoryLine> lines;
    corpus::StoryLine target;
};

/// Selects min(cts, story.size() - 1) context lines for `target_idx`,
/// preferring the lines immediately before the target and extending forward
/// (closest first) when the target sits too close to the story start.
/// Throws IndexOutOfRange for a bad index or a negative cts.
ContextWindow build_context(std::span<const corpus::StoryLine> story, std::size_t target_idx, int cts);

struct RenderOptions {
    // Prefix speaker lines with "<role> said: ". Lines with an empty role
    // (narration) are rendered as-is either way.
    bool speaker_roles = true;
};

std::string render_line(const corpus::StoryLine &line, const RenderOptions &opts = {});

/// One rendered line per context line, joined by '\n'. Empty for cts = 0.
std::string render_lines(const ContextWindow &window, const RenderOptions &opts = {});

} // namespace ceaeval::context
