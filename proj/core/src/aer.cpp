// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/aer.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <nlohmann/json.hpp>

#include "asreval/parallel.hpp"
#include "fs_util.hpp"
#include "lenient_parse.hpp"

namespace asreval {

using nlohmann::ordered_json;

std::string_view to_string(ContextKind kind) {
  return kind == ContextKind::Reference ? "reference" : "hypothesis";
}

std::string_view to_string(VerdictSource source) {
  switch (source) {
    case VerdictSource::Identical: return "identical";
    case VerdictSource::Absent: return "absent";
    case VerdictSource::Judge: return "judge";
  }
  return "?";
}

namespace {

constexpr std::string_view kSpace = " \t\r\n\v\f";

std::string trimmed(std::string_view s) {
  const auto first = s.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  return std::string(s.substr(first, s.find_last_not_of(kSpace) - first + 1));
}

// Lowercase ASCII letters and digits only; used to match rephrased keys.
std::string match_key(std::string_view s) {
  std::string out;
  for (const char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) out.push_back(static_cast<char>(std::tolower(u)));
    else if (u >= 0x80) out.push_back(c);
  }
  return out;
}

void collect_questions(const ordered_json& v, std::vector<std::string>& out) {
  if (v.is_string()) {
    if (auto q = trimmed(v.get<std::string>()); !q.empty()) out.push_back(std::move(q));
  } else if (v.is_array()) {
    for (const auto& e : v) collect_questions(e, out);
  } else if (v.is_object()) {
    for (const auto& [key, value] : v.items()) {
      if (match_key(key) == "questions") {
        collect_questions(value, out);
        return;
      }
    }
    for (const auto& [key, value] : v.items()) collect_questions(value, out);
  }
}

Answer to_answer(const ordered_json& v) {
  if (v.is_null()) return std::nullopt;
  if (v.is_string()) {
    auto s = trimmed(v.get<std::string>());
    if (s.empty()) return std::nullopt;
    return s;
  }
  return v.dump();
}

std::optional<std::size_t> numeric_key(std::string_view key) {
  static const std::regex re(R"(^\s*(?:q(?:uestion)?\s*)?(\d+)\s*[.):]?\s*$)", std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(key.begin(), key.end(), m, re)) return std::nullopt;
  const auto n = std::stoull(m[1].str());
  if (n == 0) return std::nullopt;
  return static_cast<std::size_t>(n - 1);
}

template <typename T, typename Parse>
T ask_with_retry(Provider& provider, const std::string& prompt, Parse parse, ChatExchange& accepted,
                 std::vector<ChatExchange>& rejected) {
  ChatExchange first = provider.complete(prompt);
  try {
    T value = parse(first.completion);
    accepted = std::move(first);
    return value;
  } catch (const ParseError&) {
    rejected.push_back(std::move(first));
  }
  ChatExchange second = provider.complete(prompt + std::string(kFormatReminder));
  T value = parse(second.completion);
  accepted = std::move(second);
  return value;
}

std::string trace_file_name(const std::string& id) {
  std::string safe;
  for (const char c : id) {
    const auto u = static_cast<unsigned char>(c);
    safe.push_back(std::isalnum(u) || c == '-' || c == '_' || c == '.' ? c : '_');
  }
  if (safe != id || safe.empty() || safe[0] == '.') safe += "-" + sha256_hex(id).substr(0, 8);
  return safe + ".json";
}

ordered_json exchange_json(const ChatExchange& ex) {
  return {{"fingerprint", ex.provider_fingerprint}, {"prompt", ex.prompt}, {"completion", ex.completion}};
}

ordered_json exchanges_json(const std::optional<ChatExchange>& accepted, const std::vector<ChatExchange>& rejected) {
  ordered_json arr = ordered_json::array();
  for (const auto& ex : rejected) {
    auto e = exchange_json(ex);
    e["accepted"] = false;
    arr.push_back(std::move(e));
  }
  if (accepted) {
    auto e = exchange_json(*accepted);
    e["accepted"] = true;
    arr.push_back(std::move(e));
  }
  return arr;
}

ordered_json answers_json(const AnswerSet& set) {
  ordered_json arr = ordered_json::array();
  for (const auto& a : set.answers) arr.push_back(a ? ordered_json(*a) : ordered_json(nullptr));
  return arr;
}

}  // namespace

// ---------------------------------------------------------------------------
// Prompt builders

std::string build_question_prompt(std::string_view reference, PromptVariant variant) {
  if (trimmed(reference).empty()) throw PreconditionError("cannot generate questions from an empty reference");
  std::string prompt(prompt_template(PromptId::Questions, variant));
  prompt += ' ';
  prompt += reference;
  return prompt;
}

std::string build_answer_prompt(std::span<const std::string> questions, std::string_view context,
                                PromptVariant variant) {
  if (questions.empty()) throw PreconditionError("cannot answer an empty question set");
  if (trimmed(context).empty()) throw PreconditionError("cannot answer questions against an empty context");
  std::string prompt(prompt_template(PromptId::Answers, variant));
  for (const auto& q : questions) {
    prompt += '\n';
    prompt += q;
  }
  prompt += "\nContext:\n";
  prompt += context;
  return prompt;
}

std::string build_judge_prompt(std::span<const JudgePair> pairs, PromptVariant variant) {
  if (pairs.empty()) throw PreconditionError("cannot judge an empty set of answer pairs");
  std::string prompt(prompt_template(PromptId::Judge, variant));
  prompt += "\n{\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) prompt += ",\n";
    prompt += pairs[i].question + ": { Answer1: " + pairs[i].answer1 + ", Answer2: " + pairs[i].answer2 + " }";
  }
  prompt += "\n}";
  return prompt;
}

// ---------------------------------------------------------------------------
// Completion parsers

std::vector<std::string> parse_questions(std::string_view completion) {
  if (trimmed(completion).empty()) throw ParseError("question generator returned an empty completion");
  if (auto v = detail::extract_structured(completion)) {
    std::vector<std::string> questions;
    collect_questions(*v, questions);
    if (questions.empty()) throw ZeroQuestionsError("question generator returned no questions");
    return questions;
  }
  static const std::regex line_re(R"(^\s*(?:(?:q(?:uestion)?\s*)?\d+\s*[.):-]|[-*])\s*(.+?)\s*$)",
                                  std::regex::icase);
  std::vector<std::string> questions;
  const std::string text(detail::strip_code_fence(completion));
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    std::smatch m;
    if (std::regex_match(line, m, line_re)) {
      if (auto q = trimmed(m[1].str()); !q.empty()) questions.push_back(std::move(q));
    }
    start = end + 1;
  }
  if (questions.empty()) throw ParseError("could not find a question list in the completion");
  return questions;
}

std::vector<Answer> parse_answers(std::string_view completion, std::span<const std::string> questions) {
  auto parsed = detail::extract_structured(completion);
  if (!parsed) throw ParseError("could not find an answer dictionary in the completion");
  ordered_json v = std::move(*parsed);

  std::vector<std::string> question_keys;
  for (const auto& q : questions) question_keys.push_back(match_key(q));
  auto is_question = [&](const std::string& key) {
    return std::find(question_keys.begin(), question_keys.end(), match_key(key)) != question_keys.end();
  };
  // Unwrap {"answers": {...}} style envelopes.
  while (v.is_object() && v.size() == 1) {
    auto it = v.begin();
    if (is_question(it.key()) || !(it.value().is_object() || it.value().is_array())) break;
    ordered_json inner = it.value();
    v = std::move(inner);
  }

  std::vector<Answer> answers(questions.size());
  std::vector<std::pair<std::string, ordered_json>> entries;
  if (v.is_array()) {
    const bool scalars = std::all_of(v.begin(), v.end(), [](const auto& e) { return !e.is_structured(); });
    if (scalars) {
      for (std::size_t i = 0; i < answers.size() && i < v.size(); ++i) answers[i] = to_answer(v[i]);
      return answers;
    }
    for (const auto& e : v) {
      if (!e.is_object()) continue;
      if (e.contains("question") && e.contains("answer") && e.at("question").is_string()) {
        entries.emplace_back(e.at("question").get<std::string>(), e.at("answer"));
      } else {
        for (const auto& [key, value] : e.items()) entries.emplace_back(key, value);
      }
    }
  } else if (v.is_object()) {
    for (const auto& [key, value] : v.items()) entries.emplace_back(key, value);
  } else {
    throw ParseError("answer completion is neither a dictionary nor a list");
  }

  std::vector<bool> used(entries.size(), false);
  std::size_t matched = 0;
  auto assign = [&](std::size_t q, std::size_t e) {
    answers[q] = to_answer(entries[e].second);
    used[e] = true;
    ++matched;
  };
  std::vector<bool> filled(questions.size(), false);
  // Exact key, then normalized key, then numbered key.
  for (std::size_t q = 0; q < questions.size(); ++q) {
    for (std::size_t e = 0; e < entries.size(); ++e) {
      if (!used[e] && entries[e].first == questions[q]) {
        assign(q, e);
        filled[q] = true;
        break;
      }
    }
  }
  for (std::size_t q = 0; q < questions.size(); ++q) {
    if (filled[q]) continue;
    for (std::size_t e = 0; e < entries.size(); ++e) {
      if (!used[e] && match_key(entries[e].first) == question_keys[q]) {
        assign(q, e);
        filled[q] = true;
        break;
      }
    }
  }
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (used[e]) continue;
    if (auto idx = numeric_key(entries[e].first); idx && *idx < questions.size() && !filled[*idx]) {
      assign(*idx, e);
      filled[*idx] = true;
    }
  }
  if (matched == 0 && entries.size() == questions.size()) {
    for (std::size_t i = 0; i < entries.size(); ++i) answers[i] = to_answer(entries[i].second);
  }
  return answers;
}

std::vector<bool> parse_flags(std::string_view completion) {
  auto flag_of = [](const ordered_json& e) -> std::optional<bool> {
    if (e.is_boolean()) return e.get<bool>();
    if (e.is_number_integer()) return e.get<long long>() != 0;
    if (e.is_string()) {
      const auto s = match_key(e.get<std::string>());
      if (s == "true" || s == "yes" || s == "match" || s == "same") return true;
      if (s == "false" || s == "no" || s == "mismatch" || s == "different") return false;
    }
    return std::nullopt;
  };

  if (auto v = detail::extract_structured(completion)) {
    std::vector<bool> flags;
    std::function<void(const ordered_json&)> walk = [&](const ordered_json& node) {
      if (node.is_structured()) {
        for (const auto& e : node) walk(e);
        return;
      }
      const auto f = flag_of(node);
      if (!f) throw ParseError("judge flag list contains a non-boolean entry: " + node.dump());
      flags.push_back(*f);
    };
    walk(*v);
    if (flags.empty()) throw ParseError("judge returned an empty flag list");
    return flags;
  }
  static const std::regex word_re(R"(\b(true|false)\b)", std::regex::icase);
  std::vector<bool> flags;
  const std::string text(completion);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), word_re); it != std::sregex_iterator(); ++it) {
    flags.push_back(match_key((*it)[1].str()) == "true");
  }
  if (flags.empty()) throw ParseError("could not find True/False flags in the judge completion");
  return flags;
}

// ---------------------------------------------------------------------------
// Stages

QuestionSet generate_questions(const std::string& record_id, std::string_view reference, Provider& provider,
                               PromptVariant variant) {
  QuestionSet set;
  set.record_id = record_id;
  set.questions = ask_with_retry<std::vector<std::string>>(provider, build_question_prompt(reference, variant),
                                                            parse_questions, set.generator_exchange, set.rejected);
  return set;
}

AnswerSet answer_questions(const QuestionSet& questions, std::string_view context, ContextKind kind,
                           Provider& provider, PromptVariant variant) {
  AnswerSet set;
  set.record_id = questions.record_id;
  set.context_kind = kind;
  const std::string prompt = build_answer_prompt(questions.questions, context, variant);
  ChatExchange accepted;
  set.answers = ask_with_retry<std::vector<Answer>>(
      provider, prompt, [&](std::string_view c) { return parse_answers(c, questions.questions); }, accepted,
      set.rejected);
  set.answer_exchange = std::move(accepted);
  return set;
}

JudgeVerdicts judge_answers(const QuestionSet& questions, const AnswerSet& reference_answers,
                            const AnswerSet& hypothesis_answers, Provider& provider, PromptVariant variant) {
  const std::size_t n = questions.questions.size();
  if (reference_answers.answers.size() != n || hypothesis_answers.answers.size() != n) {
    throw PreconditionError("answer sets are not aligned with the question set");
  }
  JudgeVerdicts verdicts;
  verdicts.record_id = questions.record_id;
  verdicts.flags.assign(n, false);
  verdicts.sources.assign(n, VerdictSource::Judge);

  std::vector<std::size_t> pending;
  std::vector<JudgePair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    const Answer& a = reference_answers.answers[i];
    const Answer& b = hypothesis_answers.answers[i];
    if (!a && !b) {
      // Neither context yields an answer: the answers do not differ.
      verdicts.flags[i] = true;
      verdicts.sources[i] = VerdictSource::Absent;
    } else if (!a || !b) {
      verdicts.sources[i] = VerdictSource::Absent;
    } else if (*a == *b) {
      verdicts.flags[i] = true;
      verdicts.sources[i] = VerdictSource::Identical;
    } else {
      pending.push_back(i);
      pairs.push_back({questions.questions[i], *a, *b});
    }
  }
  if (pending.empty()) return verdicts;

  ChatExchange accepted;
  const auto flags = ask_with_retry<std::vector<bool>>(
      provider, build_judge_prompt(pairs, variant),
      [&](std::string_view c) {
        auto f = parse_flags(c);
        if (f.size() != pairs.size()) {
          throw ParseError("judge returned " + std::to_string(f.size()) + " flags for " +
                           std::to_string(pairs.size()) + " answer pairs");
        }
        return f;
      },
      accepted, verdicts.rejected);
  verdicts.judge_exchange = std::move(accepted);
  for (std::size_t k = 0; k < pending.size(); ++k) verdicts.flags[pending[k]] = flags[k];
  return verdicts;
}

AerResult compute_aer(const JudgeVerdicts& verdicts) {
  if (verdicts.flags.empty()) throw PreconditionError("cannot compute AER from an empty verdict list");
  AerResult r;
  r.record_id = verdicts.record_id;
  r.total_questions = verdicts.flags.size();
  r.mismatches = static_cast<std::uint64_t>(std::count(verdicts.flags.begin(), verdicts.flags.end(), false));
  return r;
}

RecordAer aer_for_record(const EvalRecord& record, const AerRoles& roles, const AerOptions& options) {
  if (roles.question_generator == nullptr || roles.answerer == nullptr || roles.judge == nullptr) {
    throw PreconditionError("all three AER roles need a provider");
  }
  auto stage = [&](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw StageError(name, std::string(error_kind(e)), std::string(name) + ": " + e.what());
    }
  };

  RecordAer out;
  out.questions = stage("questions", [&] {
    return generate_questions(record.id, record.reference, *roles.question_generator, options.variant);
  });
  out.reference_answers = stage("answers_reference", [&] {
    return answer_questions(out.questions, record.reference, ContextKind::Reference, *roles.answerer,
                            options.variant);
  });
  if (record.empty_hypothesis()) {
    out.hypothesis_answers.record_id = record.id;
    out.hypothesis_answers.context_kind = ContextKind::Hypothesis;
    out.hypothesis_answers.answers.assign(out.questions.questions.size(), std::nullopt);
  } else {
    out.hypothesis_answers = stage("answers_hypothesis", [&] {
      return answer_questions(out.questions, record.hypothesis, ContextKind::Hypothesis, *roles.answerer,
                              options.variant);
    });
  }
  out.verdicts = stage("judge", [&] {
    return judge_answers(out.questions, out.reference_answers, out.hypothesis_answers, *roles.judge,
                         options.variant);
  });
  out.result = compute_aer(out.verdicts);

  if (!options.trace_dir.empty()) {
    detail::write_file_atomic(options.trace_dir / trace_file_name(record.id), trace_json(record, out));
  }
  return out;
}

CorpusAer aer_for_corpus(std::span<const EvalRecord> records, const AerRoles& roles, const AerOptions& options) {
  if (records.empty()) throw CorpusError("cannot compute AER for an empty corpus");
  std::size_t workers = options.workers;
  if (workers == 0) {
    for (const Provider* p : {roles.question_generator, roles.answerer, roles.judge}) {
      if (p != nullptr) workers = std::max(workers, static_cast<std::size_t>(p->config().max_parallel));
    }
  }

  std::vector<std::optional<RecordAer>> slots(records.size());
  std::vector<std::optional<RecordFailure>> failed(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    try {
      slots[i] = aer_for_record(records[i], roles, options);
    } catch (const StageError& e) {
      failed[i] = RecordFailure{records[i].id, e.stage(), std::string(e.kind()), e.what()};
    } catch (const std::exception& e) {
      failed[i] = RecordFailure{records[i].id, "setup", std::string(error_kind(e)), e.what()};
    }
    if (failed[i] && !options.trace_dir.empty()) {
      ordered_json doc;
      doc["record_id"] = records[i].id;
      doc["failed_stage"] = failed[i]->stage;
      doc["error_kind"] = failed[i]->error_kind;
      doc["message"] = failed[i]->message;
      try {
        detail::write_file_atomic(options.trace_dir / trace_file_name(records[i].id), doc.dump(2) + "\n");
      } catch (const std::exception&) {
      }
    }
  });

  CorpusAer out;
  out.corpus.record_id = std::string(kCorpusId);
  double macro_sum = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (slots[i]) {
      out.corpus.total_questions += slots[i]->result.total_questions;
      out.corpus.mismatches += slots[i]->result.mismatches;
      macro_sum += slots[i]->result.aer();
      out.records.push_back(std::move(*slots[i]));
    } else {
      out.failures.push_back(std::move(*failed[i]));
    }
  }
  if (out.records.empty()) {
    const std::string first = out.failures.front().message;
    throw AllRecordsFailedError(
        "AER failed for all " + std::to_string(records.size()) + " records; first error: " + first,
        std::move(out.failures));
  }
  out.macro = macro_sum / static_cast<double>(out.records.size());
  return out;
}

std::string trace_json(const EvalRecord& record, const RecordAer& outcome) {
  ordered_json doc;
  doc["record_id"] = record.id;
  doc["dataset_tag"] = record.dataset_tag;
  doc["model_tag"] = record.model_tag;
  doc["reference"] = record.reference;
  doc["hypothesis"] = record.hypothesis;
  doc["questions"] = outcome.questions.questions;
  doc["answers"] = {{"reference", answers_json(outcome.reference_answers)},
                    {"hypothesis", answers_json(outcome.hypothesis_answers)}};
  ordered_json verdicts = ordered_json::array();
  for (std::size_t i = 0; i < outcome.verdicts.flags.size(); ++i) {
    verdicts.push_back({{"match", static_cast<bool>(outcome.verdicts.flags[i])},
                        {"source", to_string(outcome.verdicts.sources[i])}});
  }
  doc["verdicts"] = std::move(verdicts);
  doc["aer"] = {{"mismatches", outcome.result.mismatches}, {"total_questions", outcome.result.total_questions}};
  doc["exchanges"] = {
      {"questions", exchanges_json(outcome.questions.generator_exchange, outcome.questions.rejected)},
      {"answers_reference",
       exchanges_json(outcome.reference_answers.answer_exchange, outcome.reference_answers.rejected)},
      {"answers_hypothesis",
       exchanges_json(outcome.hypothesis_answers.answer_exchange, outcome.hypothesis_answers.rejected)},
      {"judge", exchanges_json(outcome.verdicts.judge_exchange, outcome.verdicts.rejected)}};
  return doc.dump(2) + "\n";
}

}  // namespace asreval
