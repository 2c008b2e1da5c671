// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asreval/corpus.hpp"
#include "asreval/errors.hpp"
#include "asreval/prompts.hpp"
#include "asreval/providers.hpp"

namespace asreval {

// Answer Error Rate: questions are generated from the reference (LLM1),
// answered once with the reference and once with the hypothesis as context
// (LLM2), and each answer pair is judged for equivalence (LLM3). AER is the
// share of questions whose answers differ.

/// Questions generated from one reference, in generation order.
struct QuestionSet {
  std::string record_id;
  std::vector<std::string> questions;
  ChatExchange generator_exchange;
  /// Attempts whose completion could not be parsed.
  std::vector<ChatExchange> rejected;
};

enum class ContextKind { Reference, Hypothesis };

std::string_view to_string(ContextKind kind);

/// nullopt is the absent-answer marker.
using Answer = std::optional<std::string>;

struct AnswerSet {
  std::string record_id;
  ContextKind context_kind = ContextKind::Reference;
  std::vector<Answer> answers;  // aligned with QuestionSet::questions
  /// Empty when no call was made (empty hypothesis context).
  std::optional<ChatExchange> answer_exchange;
  std::vector<ChatExchange> rejected;
};

enum class VerdictSource { Identical, Absent, Judge };

std::string_view to_string(VerdictSource source);

struct JudgeVerdicts {
  std::string record_id;
  std::vector<bool> flags;  // true = answers match
  std::vector<VerdictSource> sources;
  /// Empty when every pair was decided without the judge.
  std::optional<ChatExchange> judge_exchange;
  std::vector<ChatExchange> rejected;
};

/// Exact counts; the ratio is derived, never accumulated.
struct AerResult {
  std::string record_id;  // kCorpusId for corpus aggregates
  std::uint64_t total_questions = 0;
  std::uint64_t mismatches = 0;

  double aer() const {
    return total_questions == 0 ? 0.0 : static_cast<double>(mismatches) / static_cast<double>(total_questions);
  }

  friend bool operator==(const AerResult&, const AerResult&) = default;
};

inline constexpr std::string_view kCorpusId = "*corpus*";

/// Question-generation instruction followed by " " and the reference.
std::string build_question_prompt(std::string_view reference, PromptVariant variant);

/// Answer instruction, one question per line, then "Context:" and the
/// context on its own line.
std::string build_answer_prompt(std::span<const std::string> questions, std::string_view context,
                                PromptVariant variant);

struct JudgePair {
  std::string question;
  std::string answer1;
  std::string answer2;
};

/// Judge instruction followed by the pairs in the shape
/// `question: { Answer1: ..., Answer2: ... }`.
std::string build_judge_prompt(std::span<const JudgePair> pairs, PromptVariant variant);

/// Accepts the numbered-key sample format (with or without outer braces),
/// plain arrays and numbered or bulleted lines. Throws ParseError when
/// nothing list-like is found, ZeroQuestionsError for an empty list.
std::vector<std::string> parse_questions(std::string_view completion);

/// Maps a question -> answer dictionary (or a positional list) onto
/// `questions`. Unmatched questions get the absent marker. Throws ParseError
/// when the completion holds no dictionary or list.
std::vector<Answer> parse_answers(std::string_view completion, std::span<const std::string> questions);

/// Reads a list of True/False flags. Throws ParseError when none are found.
std::vector<bool> parse_flags(std::string_view completion);

/// LLM1 stage. Re-prompts once with a format reminder on a parse failure.
QuestionSet generate_questions(const std::string& record_id, std::string_view reference, Provider& provider,
                               PromptVariant variant = PromptVariant::Verbatim);

/// LLM2 stage: one call with every question listed. Re-prompts once on a
/// parse failure. Throws PreconditionError for an empty question set or
/// context.
AnswerSet answer_questions(const QuestionSet& questions, std::string_view context, ContextKind kind,
                           Provider& provider, PromptVariant variant = PromptVariant::Verbatim);

/// LLM3 stage. Decided without the judge: byte-identical answers match, a
/// pair with one absent answer is a mismatch, and a pair absent on both
/// sides matches. Only the remaining pairs are sent. Re-prompts once when
/// the flag count is wrong.
JudgeVerdicts judge_answers(const QuestionSet& questions, const AnswerSet& reference_answers,
                            const AnswerSet& hypothesis_answers, Provider& provider,
                            PromptVariant variant = PromptVariant::Verbatim);

/// Throws PreconditionError for empty verdicts.
AerResult compute_aer(const JudgeVerdicts& verdicts);

/// Provider handles for the three roles. They may alias.
struct AerRoles {
  Provider* question_generator = nullptr;
  Provider* answerer = nullptr;
  Provider* judge = nullptr;
};

struct AerOptions {
  PromptVariant variant = PromptVariant::Verbatim;
  /// When set, one JSON trace per record is written here atomically.
  std::filesystem::path trace_dir;
  /// Records processed concurrently; 0 derives it from the providers.
  std::size_t workers = 0;
};

/// A pipeline stage failed for one record.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string cause_kind, const std::string& what)
      : Error(what), stage_(std::move(stage)), cause_kind_(std::move(cause_kind)) {}

  std::string_view kind() const noexcept override { return cause_kind_; }
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
  std::string cause_kind_;
};

struct RecordAer {
  AerResult result;
  QuestionSet questions;
  AnswerSet reference_answers;
  AnswerSet hypothesis_answers;
  JudgeVerdicts verdicts;
};

/// Runs the four stages for one record. An empty hypothesis yields absent
/// answers without an LLM2 call. Throws StageError naming the failed stage:
/// "questions", "answers_reference", "answers_hypothesis" or "judge".
RecordAer aer_for_record(const EvalRecord& record, const AerRoles& roles, const AerOptions& options = {});

struct CorpusAer {
  std::vector<RecordAer> records;  // corpus order, failures removed
  std::vector<RecordFailure> failures;
  AerResult corpus;   // pooled counts (micro average)
  double macro = 0.0; // mean of per-record AER

  friend bool operator==(const CorpusAer& a, const CorpusAer& b) {
    if (a.corpus != b.corpus || a.records.size() != b.records.size()) return false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      if (a.records[i].result != b.records[i].result) return false;
    }
    return true;
  }
};

/// Throws CorpusError for an empty corpus and AllRecordsFailedError when no
/// record succeeds.
CorpusAer aer_for_corpus(std::span<const EvalRecord> records, const AerRoles& roles, const AerOptions& options = {});

/// Self-contained audit trace of one record (questions, both answer sets,
/// verdicts and every exchange).
std::string trace_json(const EvalRecord& record, const RecordAer& outcome);

}  // namespace asreval
