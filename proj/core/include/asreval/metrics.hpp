// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asreval/errors.hpp"

namespace asreval {

/// Text normalization applied before word-level scoring.
///
/// The default enables every rule: ASCII/Latin/Greek/Cyrillic lowercasing,
/// punctuation removal (punctuation acts as a word separator), whitespace
/// collapsing in the text form, and retention of apostrophes that sit between
/// two word characters ("don't" stays one token).
struct NormalizationPolicy {
  bool lowercase = true;
  bool strip_punctuation = true;
  bool collapse_whitespace = true;
  bool keep_intra_word_apostrophes = true;

  friend bool operator==(const NormalizationPolicy&, const NormalizationPolicy&) = default;

  /// Compact label used in run metadata, e.g. "lower+punct+ws+apos".
  std::string describe() const;
};

/// Ordered normalized word tokens. Tokens are never empty and never contain
/// whitespace.
using TokenSequence = std::vector<std::string>;

/// Applies `policy` to `text` and returns the resulting text form. Tokens are
/// separated by single spaces when collapse_whitespace is set; otherwise the
/// original spacing between surviving characters is kept.
std::string normalize_text(std::string_view text, const NormalizationPolicy& policy = {});

/// Splits the normalized text into word tokens.
TokenSequence normalize(std::string_view text, const NormalizationPolicy& policy = {});

/// Joins tokens with single spaces.
std::string join_tokens(const TokenSequence& tokens);

enum class EditKind : std::uint8_t { Match, Substitute, Delete, Insert };

std::string_view to_string(EditKind kind);

/// One step of an edit script. Match/Substitute carry both indices, Delete
/// only the reference index, Insert only the hypothesis index.
struct AlignmentOp {
  EditKind kind = EditKind::Match;
  std::optional<std::size_t> ref_index;
  std::optional<std::size_t> hyp_index;

  friend bool operator==(const AlignmentOp&, const AlignmentOp&) = default;
};

/// Minimal-edit-distance alignment with unit costs. When several minimal
/// scripts exist the backtrace prefers Match, then Substitute, then Delete,
/// then Insert.
std::vector<AlignmentOp> align(const TokenSequence& ref, const TokenSequence& hyp);

struct WerBreakdown {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t matches = 0;
  std::size_t ref_len = 0;
  double wer = 0.0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  std::size_t hyp_len() const { return substitutions + insertions + matches; }

  friend bool operator==(const WerBreakdown&, const WerBreakdown&) = default;
};

/// Counts the ops in an alignment. `wer` is left at 0 when ref_len is 0.
WerBreakdown tally(const std::vector<AlignmentOp>& ops);

/// Word error rate with per-class counts.
///
/// Throws UndefinedWerError when the reference is empty but the hypothesis
/// is not. Empty reference and empty hypothesis score 0.
WerBreakdown wer(const TokenSequence& ref, const TokenSequence& hyp);

/// Normalizes both strings with `policy` and scores them.
WerBreakdown wer(std::string_view ref, std::string_view hyp, const NormalizationPolicy& policy);

/// Pooled error counts for micro-averaged corpus WER.
struct WerTotals {
  std::uint64_t errors = 0;
  std::uint64_t ref_words = 0;

  void add(const WerBreakdown& b) {
    errors += b.errors();
    ref_words += b.ref_len;
  }
  std::optional<double> rate() const {
    if (ref_words == 0) return std::nullopt;
    return static_cast<double>(errors) / static_cast<double>(ref_words);
  }

  friend bool operator==(const WerTotals&, const WerTotals&) = default;
};

}  // namespace asreval
