// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "lenient_parse.hpp"

#include <charconv>
#include <cstdlib>

#include "utf8.hpp"

namespace asreval::detail {

using nlohmann::ordered_json;

namespace {

constexpr std::string_view kSpace = " \t\r\n\v\f";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(kSpace) - first + 1);
}

class LiteralParser {
 public:
  explicit LiteralParser(std::string_view s) : s_(s) {}

  std::optional<ordered_json> parse_all() {
    auto v = value("");
    skip_ws();
    if (!v || pos_ != s_.size()) return std::nullopt;
    return v;
  }

 private:
  static constexpr int kMaxDepth = 128;

  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }

  void skip_ws() {
    while (!at_end() && kSpace.find(peek()) != std::string_view::npos) ++pos_;
  }

  std::optional<ordered_json> value(std::string_view stops) {
    skip_ws();
    if (at_end()) return std::nullopt;
    const char c = peek();
    if (c == '{') return object();
    if (c == '[') return array();
    if (c == '"' || c == '\'') {
      auto str = quoted();
      if (!str) return std::nullopt;
      return ordered_json(*str);
    }
    return bareword(stops);
  }

  std::optional<ordered_json> object() {
    if (++depth_ > kMaxDepth) return std::nullopt;
    ++pos_;  // '{'
    ordered_json obj = ordered_json::object();
    skip_ws();
    if (!at_end() && peek() == '}') {
      ++pos_;
      --depth_;
      return obj;
    }
    for (;;) {
      skip_ws();
      if (at_end()) return std::nullopt;
      std::optional<std::string> key;
      if (peek() == '"' || peek() == '\'') {
        key = quoted();
      } else {
        const auto colon = s_.find(':', pos_);
        if (colon == std::string_view::npos) return std::nullopt;
        // A bare key never spans lines.
        if (s_.substr(pos_, colon - pos_).find('\n') != std::string_view::npos) return std::nullopt;
        key = std::string(trim(s_.substr(pos_, colon - pos_)));
        pos_ = colon;
      }
      if (!key) return std::nullopt;
      skip_ws();
      if (at_end() || peek() != ':') return std::nullopt;
      ++pos_;
      auto v = value(",}\n");
      if (!v) return std::nullopt;
      obj[*key] = std::move(*v);
      skip_ws();
      if (at_end()) return std::nullopt;
      if (peek() == ',') {
        ++pos_;
        skip_ws();
        if (!at_end() && peek() == '}') {
          ++pos_;
          break;
        }
        continue;
      }
      if (peek() == '}') {
        ++pos_;
        break;
      }
      return std::nullopt;
    }
    --depth_;
    return obj;
  }

  std::optional<ordered_json> array() {
    if (++depth_ > kMaxDepth) return std::nullopt;
    ++pos_;  // '['
    ordered_json arr = ordered_json::array();
    skip_ws();
    if (!at_end() && peek() == ']') {
      ++pos_;
      --depth_;
      return arr;
    }
    for (;;) {
      auto v = value(",]\n");
      if (!v) return std::nullopt;
      arr.push_back(std::move(*v));
      skip_ws();
      if (at_end()) return std::nullopt;
      if (peek() == ',') {
        ++pos_;
        skip_ws();
        if (!at_end() && peek() == ']') {
          ++pos_;
          break;
        }
        continue;
      }
      if (peek() == ']') {
        ++pos_;
        break;
      }
      return std::nullopt;
    }
    --depth_;
    return arr;
  }

  static int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  }

  std::optional<char32_t> read_hex4() {
    if (pos_ + 4 > s_.size()) return std::nullopt;
    char32_t v = 0;
    for (int k = 0; k < 4; ++k) {
      const int d = hex_digit(s_[pos_ + k]);
      if (d < 0) return std::nullopt;
      v = (v << 4) | static_cast<char32_t>(d);
    }
    pos_ += 4;
    return v;
  }

  std::optional<std::string> quoted() {
    const char quote = s_[pos_++];
    std::string out;
    while (!at_end()) {
      const char c = s_[pos_++];
      if (c == quote) return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (at_end()) return std::nullopt;
      const char e = s_[pos_++];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'u': {
          auto cp = read_hex4();
          if (!cp) return std::nullopt;
          if (*cp >= 0xD800 && *cp <= 0xDBFF && pos_ + 6 <= s_.size() && s_[pos_] == '\\' && s_[pos_ + 1] == 'u') {
            pos_ += 2;
            auto low = read_hex4();
            if (!low) return std::nullopt;
            *cp = 0x10000 + ((*cp - 0xD800) << 10) + (*low - 0xDC00);
          }
          utf8::append(out, *cp);
          break;
        }
        default: out.push_back(e); break;
      }
    }
    return std::nullopt;
  }

  std::optional<ordered_json> bareword(std::string_view stops) {
    std::size_t end = stops.empty() ? s_.size() : s_.find_first_of(stops, pos_);
    if (end == std::string_view::npos) end = s_.size();
    const std::string_view word = trim(s_.substr(pos_, end - pos_));
    pos_ = end;
    if (word.empty()) return std::nullopt;
    if (word == "true" || word == "True") return ordered_json(true);
    if (word == "false" || word == "False") return ordered_json(false);
    if (word == "null" || word == "None") return ordered_json(nullptr);
    double number = 0;
    const auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), number);
    if (ec == std::errc() && ptr == word.data() + word.size()) {
      long long integer = 0;
      const auto [iptr, iec] = std::from_chars(word.data(), word.data() + word.size(), integer);
      if (iec == std::errc() && iptr == word.data() + word.size()) return ordered_json(integer);
      return ordered_json(number);
    }
    return ordered_json(std::string(word));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace

std::optional<ordered_json> parse_literal(std::string_view text) {
  return LiteralParser(text).parse_all();
}

std::string_view strip_code_fence(std::string_view text) {
  std::string_view t = trim(text);
  if (t.substr(0, 3) != "```") return t;
  const auto nl = t.find('\n');
  if (nl == std::string_view::npos) {
    const bool closed = t.size() >= 6 && t.substr(t.size() - 3) == "```";
    return trim(closed ? t.substr(3, t.size() - 6) : t.substr(3));
  }
  t = trim(t.substr(nl + 1));
  if (t.size() >= 3 && t.substr(t.size() - 3) == "```") t = t.substr(0, t.size() - 3);
  return trim(t);
}

std::optional<ordered_json> extract_structured(std::string_view completion) {
  const std::string_view t = strip_code_fence(completion);
  auto structured = [](const std::optional<ordered_json>& v) { return v && (v->is_array() || v->is_object()); };

  if (auto v = parse_literal(t); structured(v)) return v;
  if (auto v = parse_literal("{" + std::string(t) + "}"); structured(v)) return v;

  std::optional<ordered_json> best;
  std::size_t best_start = std::string_view::npos;
  for (const auto& [open, close] : {std::pair{'{', '}'}, std::pair{'[', ']'}}) {
    const auto first = t.find(open);
    const auto last = t.rfind(close);
    if (first == std::string_view::npos || last == std::string_view::npos || last < first) continue;
    if (first >= best_start) continue;
    if (auto v = parse_literal(t.substr(first, last - first + 1)); structured(v)) {
      best = std::move(v);
      best_start = first;
    }
  }
  return best;
}

}  // namespace asreval::detail
