// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/correction.hpp"

#include <optional>

#include "asreval/errors.hpp"
#include "asreval/parallel.hpp"

namespace asreval {
namespace {

constexpr std::string_view kSpace = " \t\r\n\v\f";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(kSpace);
  return s.substr(first, last - first + 1);
}

// One round of scrubbing; scrub_completion iterates to a fixed point.
std::string_view scrub_once(std::string_view s) {
  s = trim(s);
  if (s.size() >= 6 && s.substr(0, 3) == "```" && s.substr(s.size() - 3) == "```") {
    std::string_view inner = s.substr(3, s.size() - 6);
    // The opening fence may carry a language tag up to the first newline.
    if (const auto nl = inner.find('\n'); nl != std::string_view::npos) {
      const auto tag = inner.substr(0, nl);
      if (tag.find_first_of(kSpace) == std::string_view::npos || trim(tag).empty()) inner = inner.substr(nl + 1);
    }
    return trim(inner);
  }
  struct Pair {
    std::string_view open, close;
  };
  static constexpr Pair kQuotes[] = {{"\"", "\""}, {"'", "'"}, {"`", "`"}, {"\xE2\x80\x9C", "\xE2\x80\x9D"},
                                     {"\xE2\x80\x98", "\xE2\x80\x99"}};
  for (const auto& q : kQuotes) {
    if (s.size() >= q.open.size() + q.close.size() && s.substr(0, q.open.size()) == q.open &&
        s.substr(s.size() - q.close.size()) == q.close) {
      return trim(s.substr(q.open.size(), s.size() - q.open.size() - q.close.size()));
    }
  }
  return s;
}

}  // namespace

std::string build_correction_prompt(std::string_view hypothesis, PromptVariant variant) {
  if (trim(hypothesis).empty()) throw PreconditionError("cannot build a correction prompt for an empty hypothesis");
  std::string prompt(prompt_template(PromptId::Correction, variant));
  prompt += "\n\n";
  prompt += hypothesis;
  return prompt;
}

std::string scrub_completion(std::string_view completion) {
  std::string_view s = completion;
  for (;;) {
    const std::string_view next = scrub_once(s);
    if (next == s) return std::string(s);
    s = next;
  }
}

CorrectionOutcome correct_record(const EvalRecord& record, Provider& provider, const NormalizationPolicy& policy,
                                 PromptVariant variant) {
  if (trim(record.reference).empty()) throw PreconditionError("record '" + record.id + "' has an empty reference");
  if (record.empty_hypothesis()) throw PreconditionError("record '" + record.id + "' has an empty hypothesis");

  CorrectionOutcome out;
  out.record_id = record.id;
  out.original_hypothesis = record.hypothesis;
  const TokenSequence ref = normalize(record.reference, policy);
  out.wer_before = wer(ref, normalize(record.hypothesis, policy));

  out.exchange = provider.complete(build_correction_prompt(record.hypothesis, variant));
  out.corrected_hypothesis = scrub_completion(out.exchange.completion);
  if (out.corrected_hypothesis.empty()) {
    throw EmptyCorrectionError("correction for record '" + record.id + "' is empty after scrubbing");
  }
  out.wer_after = wer(ref, normalize(out.corrected_hypothesis, policy));
  return out;
}

CorrectionReport correct_corpus(std::span<const EvalRecord> records, Provider& provider,
                                const NormalizationPolicy& policy, PromptVariant variant, std::size_t workers) {
  if (records.empty()) throw CorpusError("cannot correct an empty corpus");
  if (workers == 0) workers = static_cast<std::size_t>(provider.config().max_parallel);

  std::vector<std::optional<CorrectionOutcome>> slots(records.size());
  std::vector<std::optional<RecordFailure>> failed(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    try {
      slots[i] = correct_record(records[i], provider, policy, variant);
    } catch (const std::exception& e) {
      failed[i] = RecordFailure{records[i].id, "correction", std::string(error_kind(e)), e.what()};
    }
  });

  CorrectionReport report;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (slots[i]) {
      report.before.add(slots[i]->wer_before);
      report.after.add(slots[i]->wer_after);
      report.outcomes.push_back(std::move(*slots[i]));
    } else {
      report.failures.push_back(std::move(*failed[i]));
    }
  }
  if (report.outcomes.empty()) {
    const std::string first = report.failures.front().message;
    throw AllRecordsFailedError(
        "correction failed for all " + std::to_string(records.size()) + " records; first error: " + first,
        std::move(report.failures));
  }
  return report;
}

}  // namespace asreval
