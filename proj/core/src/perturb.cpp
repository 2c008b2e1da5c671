// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "asreval/errors.hpp"

namespace asreval {
namespace {

void check_probability(double v, const char* field) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw PreconditionError(std::string(field) + " must be in [0, 1]");
  }
}

std::vector<std::string> resolve_vocabulary(const PerturbationSpec& spec, const FrequencyMap& freqs) {
  std::vector<std::string> vocab;
  if (!spec.vocabulary.empty()) {
    std::set<std::string_view> seen;
    for (const auto& w : spec.vocabulary) {
      if (!w.empty() && seen.insert(w).second) vocab.push_back(w);
    }
  } else {
    vocab.reserve(freqs.size());
    for (const auto& [w, n] : freqs) vocab.push_back(w);
    std::sort(vocab.begin(), vocab.end());
  }
  return vocab;
}

}  // namespace

void validate(const PerturbationSpec& spec) {
  check_probability(spec.sub_rate, "sub_rate");
  check_probability(spec.del_rate, "del_rate");
  check_probability(spec.ins_rate, "ins_rate");
  if (spec.sub_rate + spec.del_rate > 1.0) throw PreconditionError("sub_rate + del_rate must be <= 1");
  if (!std::isfinite(spec.rare_word_bias) || spec.rare_word_bias < 0.0) {
    throw PreconditionError("rare_word_bias must be >= 0");
  }
}

FrequencyMap count_frequencies(std::span<const TokenSequence> references) {
  FrequencyMap freqs;
  for (const auto& ref : references) {
    for (const auto& tok : ref) ++freqs[tok];
  }
  return freqs;
}

TokenSequence inject(const TokenSequence& reference, const PerturbationSpec& spec,
                     const FrequencyMap& corpus_frequencies) {
  validate(spec);
  const std::vector<std::string> vocab = resolve_vocabulary(spec, corpus_frequencies);
  if (vocab.empty() && (spec.sub_rate > 0.0 || spec.ins_rate > 0.0)) {
    throw PreconditionError("substitution/insertion requested with an empty vocabulary");
  }

  const double bias = spec.rare_word_bias;
  auto weight = [&](const std::string& tok) {
    if (bias == 0.0) return 1.0;
    const auto it = corpus_frequencies.find(tok);
    const double f = it == corpus_frequencies.end() ? 1.0 : static_cast<double>(std::max<std::uint64_t>(it->second, 1));
    return std::pow(f, -bias);
  };
  double mean_weight = 1.0;
  if (bias != 0.0 && !corpus_frequencies.empty()) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& [tok, count] : corpus_frequencies) {
      num += static_cast<double>(count) * weight(tok);
      den += static_cast<double>(count);
    }
    if (num > 0.0) mean_weight = num / den;
  }
  const double sub_cap = 1.0 - spec.del_rate;

  SplitMix64 rng(spec.seed);
  TokenSequence out;
  out.reserve(reference.size() + reference.size() / 4 + 1);
  for (const auto& tok : reference) {
    const double u = rng.uniform();
    if (u < spec.del_rate) {
      // deleted
    } else if (const double p_sub = std::min(spec.sub_rate * weight(tok) / mean_weight, sub_cap);
               u < spec.del_rate + p_sub) {
      const auto self = std::find(vocab.begin(), vocab.end(), tok);
      const std::uint64_t pool = vocab.size() - (self == vocab.end() ? 0 : 1);
      if (pool == 0) {
        out.push_back(tok);
      } else {
        auto k = static_cast<std::size_t>(rng.below(pool));
        if (self != vocab.end() && k >= static_cast<std::size_t>(self - vocab.begin())) ++k;
        out.push_back(vocab[k]);
      }
    } else {
      out.push_back(tok);
    }
    if (spec.ins_rate > 0.0 && rng.uniform() < spec.ins_rate) {
      out.push_back(vocab[static_cast<std::size_t>(rng.below(vocab.size()))]);
    }
  }
  return out;
}

double expected_wer(const PerturbationSpec& spec) { return spec.sub_rate + spec.del_rate + spec.ins_rate; }

std::uint64_t derive_record_seed(std::uint64_t seed, std::uint64_t ordinal) {
  SplitMix64 mix(ordinal);
  return seed ^ mix();
}

}  // namespace asreval
