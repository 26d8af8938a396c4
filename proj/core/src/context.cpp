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

#include "ceaeval/context.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "ceaeval/error.hpp"

namespace ceaeval::context {

ContextWindow build_context(std::span<const corpus::StoryLine> story, std::size_t target_idx, int cts) {
    if (target_idx >= story.size()) {
        Error e(Errc::kIndexOutOfRange, "target_idx",
                fmt::format("index {} outside story of {} lines", target_idx, story.size()));
        e.value = static_cast<double>(target_idx);
        throw e;
    }
    if (cts < 0) {
        Error e(Errc::kIndexOutOfRange, "cts", "context size must be non-negative");
        e.value = cts;
        throw e;
    }

    ContextWindow window;
    window.cts = cts;
    window.target = story[target_idx];

    const std::size_t want = std::min(static_cast<std::size_t>(cts), story.size() - 1);
    const std::size_t preceding = std::min(target_idx, want);
    const std::size_t following = want - preceding;

    window.lines.reserve(want);
    for (std::size_t i = target_idx - preceding; i < target_idx; ++i) window.lines.push_back(story[i]);
    for (std::size_t i = target_idx + 1; i <= target_idx + following; ++i) window.lines.push_back(story[i]);
    return window;
}

std::string render_line(const corpus::StoryLine &line, const RenderOptions &opts) {
    if (!opts.speaker_roles || line.speaker_role.empty()) return line.text;
    return fmt::format("{} said: {}", line.speaker_role, line.text);
}

std::string render_lines(const ContextWindow &window, const RenderOptions &opts) {
    std::string out;
    for (std::size_t i = 0; i < window.lines.size(); ++i) {
        if (i) out.push_back('\n');
        out += render_line(window.lines[i], opts);
    }
    return out;
}

} // namespace ceaeval::context
