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

#include "ceaeval/templates.hpp"

#include "ceaeval/error.hpp"

namespace ceaeval {

namespace {

void render_into(std::string_view src, const TemplateArgs &args, std::string &out) {
    std::size_t pos = 0;
    while (pos < src.size()) {
        auto open = src.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(src.substr(pos));
            return;
        }
        out.append(src.substr(pos, open - pos));
        auto close = src.find("}}", open + 2);
        if (close == std::string_view::npos) {
            throw Error(Errc::kConfigError, "template", "unterminated '{{'");
        }
        std::string_view tag = src.substr(open + 2, close - open - 2);
        pos = close + 2;

        if (!tag.empty() && tag.front() == '#') {
            std::string name(tag.substr(1));
            std::string end_tag = "{{/" + name + "}}";
            auto end = src.find(end_tag, pos);
            if (end == std::string_view::npos) {
                throw Error(Errc::kConfigError, "template", "unterminated section " + name);
            }
            if (args.sections.contains(name)) {
                render_into(src.substr(pos, end - pos), args, out);
            }
            pos = end + end_tag.size();
            continue;
        }

        auto it = args.values.find(std::string(tag));
        if (it == args.values.end()) {
            throw Error(Errc::kConfigError, "template", "no value for slot " + std::string(tag));
        }
        out.append(it->second);
    }
}

} // namespace

std::string render_template(std::string_view source, const TemplateArgs &args) {
    std::string out;
    out.reserve(source.size() + 256);
    render_into(source, args, out);
    return out;
}

} // namespace ceaeval
