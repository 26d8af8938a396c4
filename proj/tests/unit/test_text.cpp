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

#include <gtest/gtest.h>

#include "ceaeval/error.hpp"
#include "ceaeval/templates.hpp"
#include "ceaeval/text.hpp"

using namespace ceaeval;

TEST(Text, CanonicalLowersTrimsAndCollapses) {
    EXPECT_EQ(text::canonical("  Normal \t  Speech \n"), "normal speech");
    EXPECT_EQ(text::canonical(""), "");
}

TEST(Text, SplitKeepsEmptyFields) {
    auto parts = text::split("a\t\tb", '\t');
    ASSERT_EQ(parts.size(), 3u);
    EXPECT_EQ(parts[1], "");
}

TEST(Text, ParseDoubleIsStrict) {
    EXPECT_EQ(text::parse_double("4.0"), 4.0);
    EXPECT_EQ(text::parse_double(" 2.5 "), 2.5);
    EXPECT_FALSE(text::parse_double("4.0x"));
    EXPECT_FALSE(text::parse_double(""));
    EXPECT_FALSE(text::parse_double("abc"));
}

TEST(Text, RoundtripFormattingIsLossless) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e10}) {
        auto back = text::parse_double(text::format_roundtrip(v));
        ASSERT_TRUE(back);
        EXPECT_EQ(*back, v);
    }
}

TEST(Text, Fnv1aKnownVector) {
    // FNV-1a 64 offset basis for the empty string, and the published value for "a"
    EXPECT_EQ(text::fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(text::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(text::hex64(0xabcULL), "0000000000000abc");
}

TEST(Templates, MissingSlotIsConfigError) {
    try {
        render_template("hello {{name}}", {});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::kConfigError);
    }
}

TEST(Templates, SectionsToggle) {
    TemplateArgs args;
    args.values["x"] = "1";
    args.sections.insert("on");
    EXPECT_EQ(render_template("{{#on}}A{{x}}{{/on}}{{#off}}B{{/off}}", args), "A1");
}

TEST(Templates, VersionIsPinned) { EXPECT_EQ(template_version(), "v1"); }
