// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "cli.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "asreval/corpus.hpp"
#include "asreval/errors.hpp"
#include "asreval/report.hpp"
#include "test_support.hpp"

namespace asreval {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "asr-eval");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const fs::path& p) {
  if (!fs::exists(p)) return 0;
  const std::string s = testing::slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class CliFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv("ASR_EVAL_CACHE_DIR");
    testing::copy_fixture("aer_fixture", dir_.path() / "fx");
  }
  fs::path fx() const { return dir_.path() / "fx"; }
  std::string manifest() const { return (fx() / "manifest.json").string(); }

  testing::TempDir dir_;
};

TEST(CliWer, PrintsTable) {
  const auto corpus = (testing::data_dir() / "aer_fixture" / "corpus.jsonl").string();
  const Result r = run({"wer", corpus, "-f", "csv"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("Model Name,Dataset,Records,WER"), std::string::npos);
  // whisper-tiny: r1, r3, r5 = 1 + 9 + 1 errors over 11 + 9 + 10 words.
  EXPECT_NE(r.out.find("openai/whisper-tiny,fleurs,3,36.67%"), std::string::npos) << r.out;
  EXPECT_NE(r.err.find("corpus WER 23.53%"), std::string::npos) << r.err;  // 12/51
}

TEST(CliWer, PolicySwitches) {
  testing::TempDir dir;
  testing::spit(dir / "c.jsonl", "{\"id\": \"a\", \"reference\": \"Hello, World\", \"hypothesis\": \"hello world\"}\n");
  EXPECT_NE(run({"wer", (dir / "c.jsonl").string(), "-f", "csv"}).out.find(",00.00%"), std::string::npos);
  EXPECT_NE(run({"wer", (dir / "c.jsonl").string(), "-f", "csv", "--policy", "no-lowercase,no-punctuation"})
                .out.find(",100.00%"),
            std::string::npos);
  EXPECT_EQ(run({"wer", (dir / "c.jsonl").string(), "--policy", "shouting"}).code, cli::kExitUsage);
}

TEST(CliWer, UsageErrors) {
  EXPECT_EQ(run({"wer", "/nonexistent.jsonl"}).code, cli::kExitUsage);
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  testing::TempDir dir;
  testing::spit(dir / "empty.jsonl", "");
  const Result r = run({"wer", (dir / "empty.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("no records"), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST(ParsePolicy, Switches) {
  EXPECT_EQ(cli::parse_policy("default"), NormalizationPolicy{});
  const auto p = cli::parse_policy("no-lowercase, no-apostrophes");
  EXPECT_FALSE(p.lowercase);
  EXPECT_FALSE(p.keep_intra_word_apostrophes);
  EXPECT_TRUE(p.strip_punctuation);
  EXPECT_TRUE(cli::parse_policy("lowercase", NormalizationPolicy{false, false, false, false}).lowercase);
  EXPECT_THROW(cli::parse_policy("no-such-rule"), ConfigError);
}

TEST_F(CliFixture, CorrectWritesReports) {
  const Result r = run({"correct", "-m", manifest(), "-f", "markdown"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;  // r3 fails, within max_failures = 1
  const fs::path out = fx() / "out" / "correct";
  for (const char* f : {"summary.json", "table.md", "table.csv", "table.txt", "records.jsonl", "manifest.json",
                        "run_stats.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(r.out, testing::slurp(out / "table.md"));
  const auto summary = summary_from_json(testing::slurp(out / "summary.json"));
  ASSERT_EQ(summary.groups.size(), 2u);
  // Identity corrector: corrected WER equals baseline on the records that succeeded.
  EXPECT_EQ(summary.groups[0].model_tag, "openai/whisper-tiny");
  EXPECT_EQ(summary.groups[0].correction_failures, 1u);
  EXPECT_EQ(summary.groups[0].wer_corrected, (Ratio{2, 21}));
  EXPECT_EQ(summary.groups[1].wer_corrected, (Ratio{1, 21}));
  EXPECT_NE(r.err.find("r3"), std::string::npos);
}

TEST_F(CliFixture, FailuresAboveToleranceExitOne) {
  EXPECT_EQ(run({"correct", "-m", manifest(), "--max-failures", "0"}).code, cli::kExitRecordFailures);
}

TEST_F(CliFixture, AerWritesTracesAndPairs) {
  const Result r = run({"aer", "-m", manifest(), "-f", "csv"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  const fs::path out = fx() / "out" / "aer";
  EXPECT_TRUE(fs::exists(out / "pairs.csv"));
  for (const char* id : {"r1", "r2", "r3", "r4", "r5"}) EXPECT_TRUE(fs::exists(out / "traces" / (std::string(id) + ".json")));
  EXPECT_NE(r.err.find("AER 43.75% (7/16"), std::string::npos) << r.err;
  const auto summary = summary_from_json(testing::slurp(out / "summary.json"));
  EXPECT_EQ(summary.metadata.command, "aer");
  EXPECT_EQ(summary.metadata.prompt_digests.size(), 3u);
  const auto stats = nlohmann::json::parse(testing::slurp(out / "run_stats.json"));
  EXPECT_EQ(stats.at("providers").at("scripted").at("backend_calls"), 17);
}

TEST_F(CliFixture, SecondRunReplaysFromCache) {
  ASSERT_EQ(run({"correct", "-m", manifest()}).code, cli::kExitOk);
  ASSERT_EQ(run({"aer", "-m", manifest()}).code, cli::kExitOk);
  const fs::path out = fx() / "out";
  std::map<std::string, std::string> first;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file() && e.path().filename() != "run_stats.json" && e.path().parent_path().filename() != "cache") {
      first[fs::relative(e.path(), out).string()] = testing::slurp(e.path());
    }
  }
  const auto corr_calls = line_count(fx() / "correction_calls.jsonl");
  const auto aer_calls = line_count(fx() / "aer_calls.jsonl");
  EXPECT_GT(aer_calls, 0u);

  ASSERT_EQ(run({"correct", "-m", manifest()}).code, cli::kExitOk);
  ASSERT_EQ(run({"aer", "-m", manifest()}).code, cli::kExitOk);
  EXPECT_EQ(line_count(fx() / "correction_calls.jsonl"), corr_calls);
  EXPECT_EQ(line_count(fx() / "aer_calls.jsonl"), aer_calls);
  for (const auto& [rel, text] : first) EXPECT_EQ(testing::slurp(out / rel), text) << rel;
  const auto stats = nlohmann::json::parse(testing::slurp(out / "aer" / "run_stats.json"));
  EXPECT_EQ(stats.at("providers").at("scripted").at("backend_calls"), 0);
}

TEST_F(CliFixture, RolesOverride) {
  EXPECT_EQ(run({"aer", "-m", manifest(), "--roles", "llm3=nobody"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"aer", "-m", manifest(), "--roles", "llm9=scripted"}).code, cli::kExitUsage);
  // The identity corrector cannot write question lists.
  const Result r = run({"aer", "-m", manifest(), "--roles", "llm1=corrector", "--max-failures", "0"});
  EXPECT_NE(r.code, cli::kExitOk);
}

TEST_F(CliFixture, MissingApiKeyFailsPerRecordAndIsReported) {
  const std::string text = R"({
    "corpus": "corpus.jsonl",
    "output_dir": "out-http",
    "providers": {"remote": {"kind": "openai_compatible", "base_url": "http://127.0.0.1:1/v1", "model": "m",
                             "api_key_env": "ASREVAL_TEST_UNSET_KEY", "max_retries": 0}},
    "roles": {"correction": "remote"},
    "max_failures": 0
  })";
  testing::spit(fx() / "http.json", text);
  ::unsetenv("ASREVAL_TEST_UNSET_KEY");
  const Result r = run({"correct", "-m", (fx() / "http.json").string()});
  EXPECT_EQ(r.code, cli::kExitRecordFailures);
  EXPECT_NE(r.err.find("corrected 0/5"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("ASREVAL_TEST_UNSET_KEY"), std::string::npos) << r.err;
}

TEST_F(CliFixture, Validate) {
  const Result ok = run({"validate", manifest()});
  EXPECT_EQ(ok.code, cli::kExitOk);
  EXPECT_NE(ok.out.find("\"max_failures\": 1"), std::string::npos);
  testing::spit(fx() / "bad.json", R"({"corpus": "corpus.jsonl", "workers": -1})");
  const Result bad = run({"validate", (fx() / "bad.json").string()});
  EXPECT_EQ(bad.code, cli::kExitUsage);
  EXPECT_NE(bad.err.find("workers"), std::string::npos);
}

TEST_F(CliFixture, InjectZeroRatesCopiesReferences) {
  const auto out = (dir_.path() / "inj.jsonl").string();
  ASSERT_EQ(run({"inject", (fx() / "corpus.jsonl").string(), "--out", out}).code, cli::kExitOk);
  const auto records = load_corpus(out);
  for (const auto& r : records) EXPECT_EQ(r.hypothesis, r.reference);
  const auto side = nlohmann::json::parse(testing::slurp(out + ".perturbation.json"));
  EXPECT_EQ(side.at("rng"), "splitmix64");
  EXPECT_EQ(side.at("measured_wer"), 0.0);
}

TEST_F(CliFixture, InjectIsSeeded) {
  const auto a = (dir_.path() / "a.jsonl").string();
  const auto b = (dir_.path() / "b.jsonl").string();
  const auto c = (dir_.path() / "c.jsonl").string();
  const auto corpus = (fx() / "corpus.jsonl").string();
  ASSERT_EQ(run({"inject", corpus, "--out", a, "--seed", "7", "--sub", "0.3", "--ins", "0.1"}).code, 0);
  ASSERT_EQ(run({"inject", corpus, "--out", b, "--seed", "7", "--sub", "0.3", "--ins", "0.1"}).code, 0);
  ASSERT_EQ(run({"inject", corpus, "--out", c, "--seed", "8", "--sub", "0.3", "--ins", "0.1"}).code, 0);
  EXPECT_EQ(testing::slurp(a), testing::slurp(b));
  EXPECT_NE(testing::slurp(a), testing::slurp(c));
  EXPECT_EQ(run({"inject", corpus, "--out", a, "--sub", "0.8", "--del", "0.5"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"inject", "--out", a}).code, cli::kExitUsage);
}

TEST(CliReport, RendersFixtures) {
  const auto t1 = (testing::data_dir() / "correction_table_summary.json").string();
  const Result md = run({"report", t1, "-f", "md"});
  EXPECT_EQ(md.code, 0);
  EXPECT_NE(md.out.find("| openai/whisper-tiny | fleurs | 645 | 14.81% | 12.25% |"), std::string::npos);
  const Result pairs = run({"report", (testing::data_dir() / "aer_table_summary.json").string(), "--pairs"});
  EXPECT_EQ(pairs.code, 0);
  EXPECT_NE(pairs.out.find("openai/whisper-tiny,Fleurs,0.1481,0.2478"), std::string::npos);
  EXPECT_EQ(run({"report", t1, "--pairs"}).code, cli::kExitUsage);
}

}  // namespace
}  // namespace asreval
