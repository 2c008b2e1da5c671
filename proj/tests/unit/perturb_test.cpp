// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/perturb.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "asreval/errors.hpp"
#include "test_support.hpp"

namespace asreval {
namespace {

// Synthetic corpus: `sentences` sentences of `length` tokens drawn from a
// Zipf(1) distribution over `vocab` word types.
std::vector<TokenSequence> zipf_corpus(std::size_t sentences, std::size_t length, std::size_t vocab,
                                       std::uint64_t seed) {
  std::vector<double> cdf(vocab);
  double total = 0;
  for (std::size_t k = 0; k < vocab; ++k) cdf[k] = (total += 1.0 / static_cast<double>(k + 1));
  SplitMix64 rng(seed);
  std::vector<TokenSequence> out(sentences);
  for (auto& s : out) {
    for (std::size_t i = 0; i < length; ++i) {
      const double u = rng.uniform() * total;
      const auto k = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      s.push_back("w" + std::to_string(std::min(k, vocab - 1)));
    }
  }
  return out;
}

TEST(SplitMix64, ReferenceOutputs) {
  // First outputs for seed 0, as published with the algorithm.
  SplitMix64 rng(0);
  EXPECT_EQ(rng(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng(), 0x06C45D188009454FULL);
}

TEST(SplitMix64, BelowIsInRangeAndUniformEnough) {
  SplitMix64 rng(7);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) ++counts[rng.below(6)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Inject, ZeroRatesIsIdentity) {
  const auto corpus = zipf_corpus(50, 12, 100, 1);
  const auto freq = count_frequencies(corpus);
  PerturbationSpec spec;
  spec.seed = 99;
  for (const auto& s : corpus) EXPECT_EQ(inject(s, spec, freq), s);
}

TEST(Inject, FullDeletionEmptiesEverySentence) {
  const auto corpus = zipf_corpus(20, 10, 50, 2);
  const auto freq = count_frequencies(corpus);
  PerturbationSpec spec;
  spec.del_rate = 1.0;
  for (const auto& s : corpus) {
    EXPECT_TRUE(inject(s, spec, freq).empty());
    EXPECT_DOUBLE_EQ(wer(s, inject(s, spec, freq)).wer, 1.0);
  }
}

TEST(Inject, DeterministicInSeed) {
  const auto corpus = zipf_corpus(30, 15, 80, 3);
  const auto freq = count_frequencies(corpus);
  PerturbationSpec spec{42, 0.2, 0.1, 0.1, 1.0, {}};
  PerturbationSpec other = spec;
  other.seed = 43;
  bool differs = false;
  for (const auto& s : corpus) {
    EXPECT_EQ(inject(s, spec, freq), inject(s, spec, freq));
    differs |= inject(s, spec, freq) != inject(s, other, freq);
  }
  EXPECT_TRUE(differs);
}

TEST(Inject, SubstitutionsNeverKeepTheToken) {
  const auto corpus = zipf_corpus(40, 10, 30, 4);
  const auto freq = count_frequencies(corpus);
  PerturbationSpec spec{5, 1.0, 0.0, 0.0, 0.0, {}};
  for (const auto& s : corpus) {
    const auto out = inject(s, spec, freq);
    ASSERT_EQ(out.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NE(out[i], s[i]);
  }
}

TEST(Inject, ExplicitVocabularyIsUsed) {
  const TokenSequence ref = {"a", "b", "c", "d"};
  PerturbationSpec spec{1, 1.0, 0.0, 0.5, 0.0, {"x", "y"}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    for (const auto& t : inject(ref, spec, {})) EXPECT_TRUE(t == "x" || t == "y") << t;
  }
}

TEST(Validate, RejectsBadRates) {
  EXPECT_NO_THROW(validate(PerturbationSpec{0, 0.3, 0.2, 0.5, 1.0, {}}));
  EXPECT_THROW(validate(PerturbationSpec{0, -0.1, 0, 0, 0, {}}), PreconditionError);
  EXPECT_THROW(validate(PerturbationSpec{0, 0.6, 0.5, 0, 0, {}}), PreconditionError);
  EXPECT_THROW(validate(PerturbationSpec{0, 0, 0, 1.5, 0, {}}), PreconditionError);
  EXPECT_THROW(validate(PerturbationSpec{0, 0, 0, 0, -1, {}}), PreconditionError);
  try {
    validate(PerturbationSpec{0, 0, 2.0, 0, 0, {}});
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("del_rate"), std::string::npos);
  }
}

TEST(ExpectedWer, SumOfRates) {
  EXPECT_DOUBLE_EQ(expected_wer(PerturbationSpec{0, 0.3, 0.0, 0.0, 0, {}}), 0.3);
  EXPECT_DOUBLE_EQ(expected_wer(PerturbationSpec{0, 0.1, 0.2, 0.05, 0, {}}), 0.35);
}

TEST(Calibration, SubstitutionRateWithinThreeStandardErrors) {
  const auto corpus = zipf_corpus(1000, 12, 500, 11);
  const auto freq = count_frequencies(corpus);
  WerTotals totals;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const PerturbationSpec spec{derive_record_seed(2026, i), 0.30, 0.0, 0.0, 0.0, {}};
    totals.add(wer(corpus[i], inject(corpus[i], spec, freq)));
  }
  ASSERT_GE(totals.ref_words, 10000u);
  const double n = static_cast<double>(totals.ref_words);
  EXPECT_NEAR(*totals.rate(), 0.30, 3 * std::sqrt(0.3 * 0.7 / n));
}

TEST(Calibration, MixedRatesStayNearExpected) {
  const auto corpus = zipf_corpus(1000, 12, 500, 12);
  const auto freq = count_frequencies(corpus);
  WerTotals totals;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const PerturbationSpec spec{derive_record_seed(7, i), 0.10, 0.05, 0.05, 0.0, {}};
    totals.add(wer(corpus[i], inject(corpus[i], spec, freq)));
  }
  // Alignment can merge an insertion with a neighbouring deletion.
  EXPECT_LE(*totals.rate(), 0.20 + 0.015);
  EXPECT_GE(*totals.rate(), 0.20 - 0.03);
}

TEST(RareWordBias, RareTokensAreSubstitutedMoreOften) {
  const auto corpus = zipf_corpus(2000, 10, 1000, 13);
  const auto freq = count_frequencies(corpus);
  // Rank word types by frequency and mark the bottom and top deciles.
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  for (const auto& [w, f] : freq) ranked.emplace_back(f, w);
  std::sort(ranked.begin(), ranked.end());
  const std::size_t decile = ranked.size() / 10;
  std::unordered_map<std::string, int> bucket;
  for (std::size_t i = 0; i < decile; ++i) bucket[ranked[i].second] = -1;
  for (std::size_t i = ranked.size() - decile; i < ranked.size(); ++i) bucket[ranked[i].second] = 1;

  const auto rates = [&](double bias) {
    std::size_t rare_n = 0, rare_sub = 0, common_n = 0, common_sub = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const PerturbationSpec spec{derive_record_seed(5, i), 0.2, 0.0, 0.0, bias, {}};
      const auto out = inject(corpus[i], spec, freq);
      for (std::size_t j = 0; j < corpus[i].size(); ++j) {
        const auto it = bucket.find(corpus[i][j]);
        if (it == bucket.end()) continue;
        const bool sub = out[j] != corpus[i][j];
        if (it->second < 0) {
          ++rare_n;
          rare_sub += sub;
        } else {
          ++common_n;
          common_sub += sub;
        }
      }
    }
    return std::pair{static_cast<double>(rare_sub) / static_cast<double>(rare_n),
                     static_cast<double>(common_sub) / static_cast<double>(common_n)};
  };
  const auto [rare, common] = rates(1.0);
  EXPECT_GT(rare, common);
  const auto [rare0, common0] = rates(0.0);
  (void)rare0;
  EXPECT_NEAR(common0, 0.2, 0.02);
}

TEST(RecordSeed, DistinctPerOrdinal) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_record_seed(1, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_record_seed(1, 5), derive_record_seed(1, 5));
  EXPECT_NE(derive_record_seed(1, 5), derive_record_seed(2, 5));
}

}  // namespace
}  // namespace asreval
