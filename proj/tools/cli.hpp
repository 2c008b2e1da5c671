// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <ostream>
#include <string_view>

#include "asreval/metrics.hpp"

namespace asreval::cli {

inline constexpr int kExitOk = 0;
/// More record-level failures than the tolerance allows.
inline constexpr int kExitRecordFailures = 1;
/// Bad arguments, unreadable input or an invalid manifest.
inline constexpr int kExitUsage = 2;

/// Entry point of the `asr-eval` tool. Tables go to `out`, diagnostics to
/// `err`; the return value is the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Applies a comma-separated list of policy switches to `policy`:
/// "default", or a rule name ("lowercase", "strip-punctuation",
/// "collapse-whitespace", "intra-word-apostrophes") optionally prefixed
/// with "no-". Short aliases: "punctuation", "whitespace", "apostrophes".
/// Throws ConfigError on an unknown switch.
NormalizationPolicy parse_policy(std::string_view list, NormalizationPolicy policy = {});

}  // namespace asreval::cli
