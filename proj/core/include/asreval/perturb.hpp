// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asreval/metrics.hpp"

namespace asreval {

/// SplitMix64 (Steele, Lea, Flood 2014). Fully specified, so injected
/// corpora reproduce bit-for-bit on every platform.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n), unbiased. `n` must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = (*this)();
      if (x >= threshold) return x % n;
    }
  }

 private:
  std::uint64_t state_;
};

inline constexpr std::string_view kInjectorRng = "splitmix64";

/// Parameters of the synthetic error injector. Per reference token exactly
/// one of substitute / delete / keep happens, then an insertion is drawn
/// independently.
struct PerturbationSpec {
  std::uint64_t seed = 0;
  double sub_rate = 0.0;
  double del_rate = 0.0;
  double ins_rate = 0.0;
  /// 0 targets substitutions uniformly; larger values shift them towards
  /// low-frequency tokens (weight frequency^-bias).
  double rare_word_bias = 0.0;
  /// Replacement pool. Empty means "the corpus vocabulary".
  std::vector<std::string> vocabulary;

  friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

/// Throws PreconditionError naming the offending field.
void validate(const PerturbationSpec& spec);

using FrequencyMap = std::unordered_map<std::string, std::uint64_t>;

FrequencyMap count_frequencies(std::span<const TokenSequence> references);

/// Corrupts `reference`. Deterministic in (reference, spec, frequencies).
///
/// Substitution probability for a token with corpus count f is
/// sub_rate * f^-bias / mean(f^-bias), the mean taken over corpus
/// occurrences, capped at 1 - del_rate. Tokens missing from the map count
/// as f = 1. Replacements are drawn uniformly from the vocabulary excluding
/// the original token.
TokenSequence inject(const TokenSequence& reference, const PerturbationSpec& spec,
                     const FrequencyMap& corpus_frequencies);

/// sub_rate + del_rate + ins_rate. Minimal alignment can merge neighbouring
/// edits, so measured WER sits at or slightly below this.
double expected_wer(const PerturbationSpec& spec);

/// Seed for the record at `ordinal`: seed XOR splitmix64(ordinal).
std::uint64_t derive_record_seed(std::uint64_t seed, std::uint64_t ordinal);

}  // namespace asreval
