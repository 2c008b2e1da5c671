// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace asreval::detail {

/// Parses JSON or a Python literal (single-quoted strings, True/False/None,
/// trailing commas, unquoted keys and values) into JSON. Object key order is
/// preserved. Returns nullopt when no value can be read.
std::optional<nlohmann::ordered_json> parse_literal(std::string_view text);

/// Strips surrounding whitespace and one Markdown code fence, if present.
std::string_view strip_code_fence(std::string_view text);

/// Tries, in order: the whole text, the text wrapped in braces (for a bare
/// `"Questions": [...]`), and the span from the first opening bracket to the
/// matching last closing bracket.
std::optional<nlohmann::ordered_json> extract_structured(std::string_view completion);

}  // namespace asreval::detail
