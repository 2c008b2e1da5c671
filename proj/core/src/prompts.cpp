// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/prompts.hpp"

#include <openssl/evp.h>

#include <array>

#include "asreval/errors.hpp"
#include "prompt_resources.hpp"

namespace asreval {

std::string_view to_string(PromptVariant variant) {
  return variant == PromptVariant::Verbatim ? "verbatim" : "cleaned";
}

std::string_view to_string(PromptId id) {
  switch (id) {
    case PromptId::Correction: return "correction";
    case PromptId::Questions: return "questions";
    case PromptId::Answers: return "answers";
    case PromptId::Judge: return "judge";
  }
  return "?";
}

PromptVariant parse_prompt_variant(std::string_view name) {
  if (name == "verbatim") return PromptVariant::Verbatim;
  if (name == "cleaned") return PromptVariant::Cleaned;
  throw ConfigError("unknown prompt variant '" + std::string(name) + "' (expected verbatim or cleaned)");
}

std::string_view prompt_template(PromptId id, PromptVariant variant) {
  const bool verbatim = variant == PromptVariant::Verbatim;
  switch (id) {
    case PromptId::Correction:
      return verbatim ? resources::kCorrectionVerbatim : resources::kCorrectionCleaned;
    case PromptId::Questions:
      return verbatim ? resources::kQuestionsVerbatim : resources::kQuestionsCleaned;
    case PromptId::Answers:
      return verbatim ? resources::kAnswersVerbatim : resources::kAnswersCleaned;
    case PromptId::Judge:
      return verbatim ? resources::kJudgeVerbatim : resources::kJudgeCleaned;
  }
  return {};
}

std::string prompt_digest(PromptId id, PromptVariant variant) {
  return sha256_hex(prompt_template(id, variant));
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace asreval
