// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <string>
#include <string_view>

namespace asreval {

/// Which wording of the shipped prompts to use. `Verbatim` is the published
/// text including its typographical quirks; `Cleaned` fixes typos only.
enum class PromptVariant { Verbatim, Cleaned };

enum class PromptId { Correction, Questions, Answers, Judge };

std::string_view to_string(PromptVariant variant);
std::string_view to_string(PromptId id);

/// Throws ConfigError on an unknown name.
PromptVariant parse_prompt_variant(std::string_view name);

/// Instruction text of a shipped prompt resource, byte-exact.
std::string_view prompt_template(PromptId id, PromptVariant variant);

/// Hex SHA-256 of prompt_template(id, variant).
std::string prompt_digest(PromptId id, PromptVariant variant);

/// Appended to a prompt when its completion could not be parsed.
inline constexpr std::string_view kFormatReminder =
    "\nRespond only in the required format, with no other text.";

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

}  // namespace asreval
