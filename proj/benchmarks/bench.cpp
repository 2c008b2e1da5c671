// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include <benchmark/benchmark.h>

#include "asreval/metrics.hpp"
#include "asreval/perturb.hpp"

namespace {

using namespace asreval;

TokenSequence random_sentence(SplitMix64& rng, std::size_t len) {
  TokenSequence out(len);
  for (auto& t : out) t = "w" + std::to_string(rng.below(200));
  return out;
}

void BM_Align(benchmark::State& state) {
  SplitMix64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const TokenSequence ref = random_sentence(rng, n);
  const TokenSequence hyp = random_sentence(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(align(ref, hyp));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Align)->RangeMultiplier(4)->Range(8, 512)->Complexity(benchmark::oNSquared);

void BM_Normalize(benchmark::State& state) {
  const std::string text =
      "It takes me several years to make this magic powder, but at this moment I'm pleased to say it is nearly "
      "done. You see, I am making it for my good wife Margolotte, who wants to use some of it for a purpose of her own.";
  for (auto _ : state) benchmark::DoNotOptimize(normalize(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Normalize);

void BM_Inject(benchmark::State& state) {
  SplitMix64 rng(2);
  std::vector<TokenSequence> corpus;
  for (int i = 0; i < 100; ++i) corpus.push_back(random_sentence(rng, 20));
  const FrequencyMap freq = count_frequencies(corpus);
  const PerturbationSpec spec{7, 0.2, 0.05, 0.05, 1.0, {}};
  for (auto _ : state) {
    for (const auto& s : corpus) benchmark::DoNotOptimize(inject(s, spec, freq));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2000));
}
BENCHMARK(BM_Inject);

}  // namespace
