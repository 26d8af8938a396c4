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

#include <map>
#include <set>
#include <string>
#include <string_view>

namespace ceaeval {

enum class TemplateId {
    kPlannerEn,
    kJudgeEn,
    kJudgeZh,
    kBaselineEn,
    kBaselineZh,
    kCotGenEn,
};

// Version tag of the compiled-in template set; persisted with every record.
std::string_view template_version();
std::string_view template_source(TemplateId id);
std::string_view plan_alias_source();

struct TemplateArgs {
    std::map<std::string, std::string> values;
    std::set<std::string> sections;
};

/// Renders a template using `{{slot}}` substitution and `{{#name}}...{{/name}}`
/// sections, which are kept only when `name` is listed in `args.sections`.
/// Slots without a value are a programming error and throw ConfigError.
std::string render_template(std::string_view source, const TemplateArgs &args);

} // namespace ceaeval
