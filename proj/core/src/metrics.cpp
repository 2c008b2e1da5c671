// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/metrics.hpp"

#include <algorithm>
#include <unordered_map>

#include "utf8.hpp"

namespace asreval {
namespace {

bool is_space(char32_t c) {
  switch (c) {
    case U'\t': case U'\n': case U'\v': case U'\f': case U'\r': case U' ':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000: case 0x200B: case 0xFEFF:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_apostrophe(char32_t c) { return c == U'\'' || c == 0x2019 || c == 0x02BC; }

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  if (c >= 0xA1 && c <= 0xBF) {
    // ª µ º ¹ ² ³ ¼ ½ ¾ are word characters.
    return c != 0xAA && c != 0xB5 && c != 0xBA && c != 0xB2 && c != 0xB3 && c != 0xB9 &&
           !(c >= 0xBC && c <= 0xBE);
  }
  if (c == 0xD7 || c == 0xF7) return true;
  if (c >= 0x2010 && c <= 0x205E) return true;
  if (c >= 0x20A0 && c <= 0x20CF) return true;
  if (c >= 0x2E00 && c <= 0x2E7F) return true;
  if (c >= 0x3001 && c <= 0x303F) return true;
  if ((c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
      (c >= 0xFF5B && c <= 0xFF65)) {
    return true;
  }
  return false;
}

char32_t to_lower(char32_t c) {
  if (c < 0x80) return (c >= U'A' && c <= U'Z') ? c + 0x20 : c;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c >= 0x100 && c <= 0x17F) {
    if (c == 0x130) return U'i';
    if (c == 0x178) return 0xFF;
    if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c % 2 == 1) ? c + 1 : c;
    if (c == 0x138 || c == 0x149 || c == 0x17F) return c;
    return (c % 2 == 0) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c == 0x386) return 0x3AC;
  if (c >= 0x388 && c <= 0x38A) return c + 0x25;
  if (c == 0x38C) return 0x3CC;
  if (c == 0x38E || c == 0x38F) return c + 0x3F;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

bool is_word_char(char32_t c) { return !is_space(c) && !is_punct(c) && !is_apostrophe(c); }

}  // namespace

std::string NormalizationPolicy::describe() const {
  std::string out;
  auto add = [&](bool on, std::string_view name) {
    if (!out.empty()) out += '+';
    if (!on) out += "no-";
    out += name;
  };
  add(lowercase, "lowercase");
  add(strip_punctuation, "strip-punctuation");
  add(collapse_whitespace, "collapse-whitespace");
  add(keep_intra_word_apostrophes, "intra-word-apostrophes");
  return out;
}

std::string normalize_text(std::string_view text, const NormalizationPolicy& policy) {
  const std::u32string cps = utf8::decode(text);
  // Pass 1: map each code point to itself, a replacement, or a separator.
  std::u32string mapped;
  mapped.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    char32_t c = cps[i];
    if (policy.strip_punctuation) {
      if (is_apostrophe(c)) {
        const bool intra = policy.keep_intra_word_apostrophes && i > 0 && i + 1 < cps.size() &&
                           is_word_char(cps[i - 1]) && is_word_char(cps[i + 1]);
        mapped.push_back(intra ? U'\'' : U' ');
        continue;
      }
      if (is_punct(c)) {
        mapped.push_back(U' ');
        continue;
      }
    }
    if (policy.lowercase) c = to_lower(c);
    mapped.push_back(c);
  }

  std::string out;
  out.reserve(text.size());
  if (policy.collapse_whitespace) {
    bool pending_space = false;
    for (const char32_t c : mapped) {
      if (is_space(c)) {
        pending_space = !out.empty();
        continue;
      }
      if (pending_space) out.push_back(' ');
      pending_space = false;
      utf8::append(out, c);
    }
  } else {
    for (const char32_t c : mapped) utf8::append(out, c);
  }
  return out;
}

TokenSequence normalize(std::string_view text, const NormalizationPolicy& policy) {
  const std::u32string cps = utf8::decode(normalize_text(text, policy));
  TokenSequence tokens;
  std::string current;
  for (const char32_t c : cps) {
    if (is_space(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      utf8::append(current, c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join_tokens(const TokenSequence& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::string_view to_string(EditKind kind) {
  switch (kind) {
    case EditKind::Match: return "match";
    case EditKind::Substitute: return "substitute";
    case EditKind::Delete: return "delete";
    case EditKind::Insert: return "insert";
  }
  return "?";
}

std::vector<AlignmentOp> align(const TokenSequence& ref, const TokenSequence& hyp) {
  const std::size_t m = ref.size();
  const std::size_t n = hyp.size();

  // Intern tokens so the DP compares integers.
  std::unordered_map<std::string_view, std::uint32_t> ids;
  auto intern = [&](const std::string& s) {
    return ids.try_emplace(s, static_cast<std::uint32_t>(ids.size())).first->second;
  };
  std::vector<std::uint32_t> r(m), h(n);
  for (std::size_t i = 0; i < m; ++i) r[i] = intern(ref[i]);
  for (std::size_t j = 0; j < n; ++j) h[j] = intern(hyp[j]);

  const std::size_t cols = n + 1;
  std::vector<std::uint32_t> cost((m + 1) * cols);
  auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return cost[i * cols + j]; };
  for (std::size_t i = 0; i <= m; ++i) at(i, 0) = static_cast<std::uint32_t>(i);
  for (std::size_t j = 0; j <= n; ++j) at(0, j) = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const std::uint32_t diag = at(i - 1, j - 1) + (r[i - 1] == h[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  std::vector<AlignmentOp> ops;
  ops.reserve(std::max(m, n));
  std::size_t i = m;
  std::size_t j = n;
  while (i > 0 || j > 0) {
    const std::uint32_t here = at(i, j);
    if (i > 0 && j > 0) {
      const bool same = r[i - 1] == h[j - 1];
      if (same && here == at(i - 1, j - 1)) {
        ops.push_back({EditKind::Match, i - 1, j - 1});
        --i, --j;
        continue;
      }
      if (!same && here == at(i - 1, j - 1) + 1) {
        ops.push_back({EditKind::Substitute, i - 1, j - 1});
        --i, --j;
        continue;
      }
    }
    if (i > 0 && here == at(i - 1, j) + 1) {
      ops.push_back({EditKind::Delete, i - 1, std::nullopt});
      --i;
      continue;
    }
    ops.push_back({EditKind::Insert, std::nullopt, j - 1});
    --j;
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

WerBreakdown tally(const std::vector<AlignmentOp>& ops) {
  WerBreakdown b;
  for (const auto& op : ops) {
    switch (op.kind) {
      case EditKind::Match: ++b.matches; break;
      case EditKind::Substitute: ++b.substitutions; break;
      case EditKind::Delete: ++b.deletions; break;
      case EditKind::Insert: ++b.insertions; break;
    }
  }
  b.ref_len = b.matches + b.substitutions + b.deletions;
  if (b.ref_len > 0) b.wer = static_cast<double>(b.errors()) / static_cast<double>(b.ref_len);
  return b;
}

WerBreakdown wer(const TokenSequence& ref, const TokenSequence& hyp) {
  if (ref.empty()) {
    if (!hyp.empty()) {
      throw UndefinedWerError("WER is undefined for an empty reference with a " +
                              std::to_string(hyp.size()) + "-word hypothesis");
    }
    return {};
  }
  return tally(align(ref, hyp));
}

WerBreakdown wer(std::string_view ref, std::string_view hyp, const NormalizationPolicy& policy) {
  return wer(normalize(ref, policy), normalize(hyp, policy));
}

}  // namespace asreval
