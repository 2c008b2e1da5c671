// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asreval {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}

  /// Stable, machine-readable error class ("undefined_wer", "auth", ...).
  virtual std::string_view kind() const noexcept { return "error"; }
};

#define ASREVAL_DECLARE_ERROR(Name, Base, Kind)                    \
  class Name : public Base {                                       \
   public:                                                         \
    using Base::Base;                                              \
    std::string_view kind() const noexcept override { return Kind; } \
  }

/// A documented precondition was violated by the caller.
ASREVAL_DECLARE_ERROR(PreconditionError, Error, "precondition");
/// WER requested against an empty reference with a nonempty hypothesis.
ASREVAL_DECLARE_ERROR(UndefinedWerError, Error, "undefined_wer");

// Provider errors. Only RateLimitError, TimeoutError and TransportError are
// retried.
ASREVAL_DECLARE_ERROR(ProviderError, Error, "provider");
ASREVAL_DECLARE_ERROR(AuthError, ProviderError, "auth");
ASREVAL_DECLARE_ERROR(RateLimitError, ProviderError, "rate_limit");
ASREVAL_DECLARE_ERROR(TimeoutError, ProviderError, "timeout");
ASREVAL_DECLARE_ERROR(TransportError, ProviderError, "transport");
ASREVAL_DECLARE_ERROR(MalformedResponseError, ProviderError, "malformed_response");
ASREVAL_DECLARE_ERROR(MockExhaustedError, ProviderError, "mock_exhausted");
ASREVAL_DECLARE_ERROR(ConfigError, Error, "config");

// Pipeline errors.
ASREVAL_DECLARE_ERROR(EmptyCorrectionError, Error, "empty_correction");
ASREVAL_DECLARE_ERROR(ParseError, Error, "parse");
ASREVAL_DECLARE_ERROR(ZeroQuestionsError, Error, "zero_questions");
ASREVAL_DECLARE_ERROR(CorpusError, Error, "corpus");

#undef ASREVAL_DECLARE_ERROR

/// Error classification for an arbitrary exception.
inline std::string_view error_kind(const std::exception& e) noexcept {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return err->kind();
  return "internal";
}

}  // namespace asreval
