// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asreval/aer.hpp"
#include "asreval/corpus.hpp"
#include "asreval/correction.hpp"
#include "asreval/metrics.hpp"

namespace asreval {

/// A rate kept as exact counts. Rendering rounds the rational value, so no
/// floating-point error reaches a table.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  bool defined() const { return den > 0; }
  /// Throws PreconditionError when undefined.
  double value() const;

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// One (dataset_tag, model_tag) row of a results table.
struct GroupSummary {
  std::string dataset_tag;
  std::string model_tag;
  std::uint64_t records = 0;
  Ratio wer;  // baseline over every record with a defined WER
  std::optional<Ratio> wer_corrected;
  std::optional<Ratio> aer;        // micro average
  std::optional<double> aer_macro; // mean of per-record AER
  std::uint64_t wer_failures = 0;
  std::uint64_t correction_failures = 0;
  std::uint64_t aer_failures = 0;

  std::uint64_t failures() const { return wer_failures + correction_failures + aer_failures; }

  friend bool operator==(const GroupSummary&, const GroupSummary&) = default;
};

/// Everything needed to trace a number back to its inputs.
struct RunMetadata {
  std::string command;
  std::string policy;  // NormalizationPolicy::describe()
  std::string prompt_variant;
  std::map<std::string, std::string> prompt_digests;
  /// Role -> provider description (name, kind, model, temperature, identity, ...).
  std::map<std::string, std::map<std::string, std::string>> providers;
  /// Free-form run parameters: seeds, RNG name, workers, retry settings.
  std::map<std::string, std::string> parameters;

  friend bool operator==(const RunMetadata&, const RunMetadata&) = default;
};

struct RunSummary {
  RunMetadata metadata;
  /// Ordered by first appearance of the dataset tag, then of the model tag
  /// within it.
  std::vector<GroupSummary> groups;

  /// Pools every group into one row tagged "*".
  GroupSummary overall() const;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

/// Groups records by (dataset_tag, model_tag) and pools their counts.
/// Baseline WER is computed here from `records` under `policy`; the
/// correction and AER reports are optional. Throws PreconditionError for an
/// empty corpus.
RunSummary summarize(std::span<const EvalRecord> records, const NormalizationPolicy& policy,
                     const CorrectionReport* correction, const CorpusAer* aer, RunMetadata metadata);

enum class TableFormat { Csv, Text, Markdown };

/// Accepts "csv", "text" and "markdown" (alias "md"). Throws ConfigError.
TableFormat parse_table_format(std::string_view name);

/// Percent with two decimals and at least two integer digits, rounded half
/// up from the exact ratio: 1481/10000 -> "14.81%", 854/10000 -> "08.54%".
/// An undefined ratio renders as kAbsent.
std::string format_percent(const Ratio& r);

/// Fraction with four decimals, rounded half up: 1481/10000 -> "0.1481".
/// An undefined ratio renders as kAbsent.
std::string format_fraction(const Ratio& r);

/// Rendered in place of an absent value.
inline constexpr std::string_view kAbsent = "\xE2\x80\x94";

/// Columns: Model Name, Dataset, Records, WER, WER (corrected), AER,
/// Failures. Deterministic for a given summary.
std::string emit_table(const RunSummary& summary, TableFormat format);

struct PairPoint {
  std::string dataset_tag;
  std::string model_tag;
  Ratio wer;
  Ratio aer;
};

struct PairData {
  std::vector<PairPoint> points;
  /// One line per skipped group.
  std::vector<std::string> notes;

  /// "model_tag,dataset_tag,wer,aer" header plus one row per point.
  std::string csv() const;
};

/// WER-vs-AER points for groups carrying both metrics. Throws
/// PreconditionError when no group qualifies.
PairData emit_pairs(const RunSummary& summary);

std::string summary_to_json(const RunSummary& summary);
/// Throws ConfigError on malformed input.
RunSummary summary_from_json(std::string_view text);

/// One JSON line per record with its breakdowns, AER counts and failures.
std::string record_details_jsonl(std::span<const EvalRecord> records, const NormalizationPolicy& policy,
                                 const CorrectionReport* correction, const CorpusAer* aer);

}  // namespace asreval
