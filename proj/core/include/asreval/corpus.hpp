// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asreval/errors.hpp"
#include "asreval/metrics.hpp"
#include "asreval/perturb.hpp"
#include "asreval/prompts.hpp"
#include "asreval/providers.hpp"

namespace asreval {

/// One utterance: a reference transcript and the ASR hypothesis for it.
struct EvalRecord {
  std::string id;
  std::string reference;
  std::string hypothesis;
  std::string dataset_tag;
  std::string model_tag;
  std::optional<std::string> audio_path;  // carried, never opened

  /// Hypotheses with no visible characters are kept but flagged: they score
  /// WER 1.0 and all their answers are absent.
  bool empty_hypothesis() const;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// Parses a JSON-lines corpus (one object per line; blank lines ignored).
/// Required fields: id, reference, hypothesis. Optional: dataset_tag,
/// model_tag, audio_path. Throws CorpusError naming the line.
std::vector<EvalRecord> parse_corpus(std::istream& in, std::string_view source_name = "<corpus>");
std::vector<EvalRecord> load_corpus(const std::filesystem::path& path);

/// Tab-separated import. The first row names the columns; id, reference
/// and hypothesis are required.
std::vector<EvalRecord> import_tsv(std::istream& in, std::string_view source_name = "<tsv>");
std::vector<EvalRecord> import_tsv(const std::filesystem::path& path);

std::string to_jsonl(const EvalRecord& record);
std::string to_jsonl(std::span<const EvalRecord> records);
void write_corpus(const std::filesystem::path& path, std::span<const EvalRecord> records);

/// A record that could not be scored, with the stage and error class that
/// stopped it.
struct RecordFailure {
  std::string record_id;
  std::string stage;
  std::string error_kind;
  std::string message;
};

/// Thrown by corpus-level operations when no record succeeded.
class AllRecordsFailedError : public CorpusError {
 public:
  AllRecordsFailedError(const std::string& what, std::vector<RecordFailure> failures)
      : CorpusError(what), failures_(std::move(failures)) {}

  std::string_view kind() const noexcept override { return "all_records_failed"; }
  const std::vector<RecordFailure>& failures() const { return failures_; }

 private:
  std::vector<RecordFailure> failures_;
};

// ---------------------------------------------------------------------------
// Run manifest

inline constexpr std::string_view kRoleCorrection = "correction";
inline constexpr std::string_view kRoleQuestionGenerator = "llm1";
inline constexpr std::string_view kRoleAnswerer = "llm2";
inline constexpr std::string_view kRoleJudge = "llm3";

struct RunManifest {
  std::filesystem::path corpus;
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;
  NormalizationPolicy policy;
  PromptVariant prompt_variant = PromptVariant::Verbatim;
  std::map<std::string, ProviderConfig> providers;
  /// Role ("correction", "llm1", "llm2", "llm3") -> provider name.
  std::map<std::string, std::string> roles;
  std::optional<PerturbationSpec> perturbation;
  /// Record-level failures tolerated before a command exits nonzero.
  int max_failures = 0;
  /// Records processed concurrently; 0 derives it from the providers.
  int workers = 0;

  /// Throws ConfigError when the role is unassigned.
  const ProviderConfig& provider_for(std::string_view role) const;
};

struct ValidationIssue {
  std::string field;
  std::string message;
};

struct ManifestValidation {
  std::optional<RunManifest> manifest;
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty() && manifest.has_value(); }
  std::string describe() const;
};

/// Validates a manifest document and fills defaults. Relative paths resolve
/// against `base_dir`. Every problem is collected; malformed input never
/// throws.
ManifestValidation validate_manifest(std::string_view text, const std::filesystem::path& base_dir);
ManifestValidation load_manifest(const std::filesystem::path& path);

/// The normalized manifest with every default materialized.
std::string echo_manifest(const RunManifest& manifest);

}  // namespace asreval
