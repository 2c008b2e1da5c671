// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/prompts.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "asreval/errors.hpp"
#include "test_support.hpp"

namespace asreval {
namespace {

// Hand transcriptions of the published prompt texts. The quirks ("a answer
// derived" with two spaces, "the the", "don not", "matches(") are part of
// the published wording and must survive.
constexpr std::string_view kCorrectionText =
    "Carefully review the provided English Automatic Speech Recognition(ASR) output and correct any errors "
    "caused by insertion, deletion, or substitution of words.\n"
    "Ensure that your corrections are strictly made at the word level without altering the structure or "
    "phrasing of the original sentence. Your response should consist solely of the corrected text, with no "
    "additional explanations, comments, or formatting.";

constexpr std::string_view kQuestionsText =
    "Create as many questions as possible from the given English text while strictly following these "
    "guidelines:\n"
    "Each question must have a answer  derived from the context. Questions should be contextually meaningful "
    "and not just based on the words in the sentence. Only include meaningful and relevant questions in English "
    "script. Ensure all key aspects of the context are covered through the questions.\n"
    "Sample output format\n"
    "\"Questions\": [\n"
    "    {\n"
    "        \"1\": \"What were the people primarily focused on regarding the individual mentioned in the text?\"\n"
    "    } ,\n"
    "    {\n"
    "        \"2\": \"What aspect of the individual's character was not understood by those around him?\"\n"
    "    } ]\n"
    "Context:";

constexpr std::string_view kAnswersText =
    "Generate answers for the given questions based on the provided context.\n"
    "Provide the answers in the form of a dictionary, where the question is the key and the answer is the "
    "value, enclosed in brackets.\n"
    "Ensure the answers are derived directly from the provided context.\n"
    "Please provide the the dictionary as the response and don not provide any other content or explanations\n"
    "Questions:";

constexpr std::string_view kJudgeText =
    "You are provided with a dictionary where each key represents a question, and its value is a dictionary "
    "containing two answers in the format {'Answer1': value1, 'Answer2': value2}.\n"
    "Your task is to determine whether both answers for each question are identical.If the two answers "
    "matches( if meaning is essentially the same), mark the result as True; otherwise, mark it as False.\n"
    "Return a list of flags where each flag corresponds to the result for a question.\n"
    "Please provide the output in list format and do not provide anything else\n"
    "Input:";

std::map<std::string, std::string> checked_in_digests() {
  std::map<std::string, std::string> out;
  std::istringstream lines(testing::slurp(testing::data_dir() / "prompt_digests.sha256"));
  std::string digest, file;
  while (lines >> digest >> file) out[file] = digest;
  return out;
}

struct Case {
  PromptId id;
  std::string_view text;
  const char* file;
};

constexpr Case kCases[] = {{PromptId::Correction, kCorrectionText, "correction.verbatim.txt"},
                           {PromptId::Questions, kQuestionsText, "questions.verbatim.txt"},
                           {PromptId::Answers, kAnswersText, "answers.verbatim.txt"},
                           {PromptId::Judge, kJudgeText, "judge.verbatim.txt"}};

TEST(Prompts, VerbatimResourcesMatchTranscriptions) {
  for (const auto& c : kCases) {
    EXPECT_EQ(prompt_template(c.id, PromptVariant::Verbatim), c.text) << c.file;
  }
}

TEST(Prompts, VerbatimDigestsMatchCheckedInFile) {
  const auto digests = checked_in_digests();
  ASSERT_EQ(digests.size(), 4u);
  for (const auto& c : kCases) {
    ASSERT_TRUE(digests.contains(c.file)) << c.file;
    EXPECT_EQ(sha256_hex(c.text), digests.at(c.file)) << c.file;
    EXPECT_EQ(prompt_digest(c.id, PromptVariant::Verbatim), digests.at(c.file)) << c.file;
  }
}

TEST(Prompts, EmbeddedBytesEqualResourceFiles) {
  for (const auto& c : kCases) {
    EXPECT_EQ(testing::slurp(std::filesystem::path(ASREVAL_PROMPT_DIR) / c.file),
              prompt_template(c.id, PromptVariant::Verbatim));
  }
}

TEST(Prompts, CleanedVariantFixesTyposOnly) {
  const auto q = prompt_template(PromptId::Questions, PromptVariant::Cleaned);
  EXPECT_NE(q.find("must have an answer derived"), std::string_view::npos);
  EXPECT_NE(q.find("Sample output format"), std::string_view::npos);
  const auto a = prompt_template(PromptId::Answers, PromptVariant::Cleaned);
  EXPECT_NE(a.find("provide the dictionary as the response and do not"), std::string_view::npos);
  const auto j = prompt_template(PromptId::Judge, PromptVariant::Cleaned);
  EXPECT_NE(j.find("identical. If the two answers match (if the meaning"), std::string_view::npos);
  const auto c = prompt_template(PromptId::Correction, PromptVariant::Cleaned);
  EXPECT_NE(c.find("Recognition (ASR)"), std::string_view::npos);
  for (const auto& k : kCases) {
    const auto cleaned = prompt_template(k.id, PromptVariant::Cleaned);
    EXPECT_NE(cleaned, k.text);
    // Same trailing cue so prompt composition is variant independent.
    EXPECT_EQ(cleaned.substr(cleaned.rfind('\n')), k.text.substr(k.text.rfind('\n')));
  }
}

TEST(Prompts, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Prompts, VariantNames) {
  EXPECT_EQ(parse_prompt_variant("verbatim"), PromptVariant::Verbatim);
  EXPECT_EQ(parse_prompt_variant("cleaned"), PromptVariant::Cleaned);
  EXPECT_THROW(parse_prompt_variant("fancy"), ConfigError);
  EXPECT_EQ(to_string(PromptVariant::Cleaned), "cleaned");
}

}  // namespace
}  // namespace asreval
