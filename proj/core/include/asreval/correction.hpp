// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asreval/corpus.hpp"
#include "asreval/metrics.hpp"
#include "asreval/prompts.hpp"
#include "asreval/providers.hpp"

namespace asreval {

/// One-shot LLM correction of a single hypothesis, scored against the same
/// reference before and after under one normalization policy.
struct CorrectionOutcome {
  std::string record_id;
  std::string original_hypothesis;
  std::string corrected_hypothesis;
  WerBreakdown wer_before;
  WerBreakdown wer_after;
  ChatExchange exchange;
};

struct CorrectionReport {
  std::vector<CorrectionOutcome> outcomes;  // corpus order, failures removed
  std::vector<RecordFailure> failures;
  WerTotals before;
  WerTotals after;
};

/// Correction instruction, a blank line, then the hypothesis.
/// Throws PreconditionError for an empty hypothesis.
std::string build_correction_prompt(std::string_view hypothesis, PromptVariant variant);

/// Removes decoration LLMs add despite the instructions: surrounding
/// whitespace, a Markdown code fence, and enclosing quotes. Idempotent.
std::string scrub_completion(std::string_view completion);

/// Throws PreconditionError for an empty reference or hypothesis,
/// EmptyCorrectionError when the scrubbed completion is empty, and passes
/// provider errors through.
CorrectionOutcome correct_record(const EvalRecord& record, Provider& provider, const NormalizationPolicy& policy,
                                 PromptVariant variant = PromptVariant::Verbatim);

/// Corrects every record (up to `workers` at a time) and micro-averages WER
/// over the records that succeeded. Throws CorpusError when the corpus is
/// empty or every record failed.
CorrectionReport correct_corpus(std::span<const EvalRecord> records, Provider& provider,
                                const NormalizationPolicy& policy, PromptVariant variant = PromptVariant::Verbatim,
                                std::size_t workers = 0);

}  // namespace asreval
