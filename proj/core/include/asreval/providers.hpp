// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace asreval {

enum class ProviderKind { OpenAiCompatible, GeminiCompatible, Mock };

std::string_view to_string(ProviderKind kind);
/// Accepts "openai_compatible", "gemini_compatible" and "mock".
ProviderKind parse_provider_kind(std::string_view name);

/// Description of one chat-completion endpoint. The API key itself is never
/// stored: `api_key_env` names the environment variable that holds it.
struct ProviderConfig {
  std::string name;
  ProviderKind kind = ProviderKind::Mock;
  std::string base_url;
  std::string model_name;
  std::string api_key_env;
  double temperature = 0.0;
  int max_retries = 3;
  std::chrono::milliseconds request_timeout{60'000};
  int max_parallel = 4;
  /// First backoff ceiling; doubles per retry, full jitter.
  std::chrono::milliseconds backoff_base{1'000};
  /// Mock only: script file and optional log of every prompt served.
  std::filesystem::path mock_script;
  std::filesystem::path mock_record;
};

/// Throws ConfigError when a range or presence invariant does not hold.
void validate(const ProviderConfig& config);

/// Hex SHA-256 over (kind, model_name, temperature, prompt). Stable across
/// runs and platforms; the cache key for a completion.
std::string provider_fingerprint(const ProviderConfig& config, std::string_view prompt);

/// Hex SHA-256 over (kind, model_name, temperature): identifies a provider
/// setting in run metadata.
std::string provider_identity(const ProviderConfig& config);

/// One prompt -> completion transaction.
struct ChatExchange {
  std::string prompt;
  std::string completion;
  std::string provider_fingerprint;
  std::string timestamp;  // ISO-8601 UTC of the original backend call
  bool from_cache = false;
};

/// Transport to one backend. Implementations must be thread-safe and throw
/// the ProviderError subclasses from errors.hpp.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string send(std::string_view prompt, std::string_view fingerprint) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

enum class ExhaustionPolicy { Error, RepeatLast };

struct MockRule {
  enum class Match { Exact, Substring, Fingerprint, Any };
  Match match = Match::Any;
  std::string pattern;
  /// Returned verbatim unless `echo_after` is set, in which case the
  /// completion is the prompt text after the last occurrence of that marker.
  std::string completion;
  std::optional<std::string> echo_after;
  /// Number of uses before the rule stops matching; unlimited when empty.
  std::optional<std::size_t> times;
};

/// Ordered prompt matchers; the first rule that matches wins.
struct MockScript {
  std::vector<MockRule> rules;
  ExhaustionPolicy exhaustion = ExhaustionPolicy::Error;

  /// Parses the JSON script format documented in the README.
  static MockScript from_json(std::string_view text);
  static MockScript load(const std::filesystem::path& path);
};

class MockBackend final : public ChatBackend {
 public:
  using Responder = std::function<std::optional<std::string>(std::string_view prompt)>;

  explicit MockBackend(MockScript script, std::filesystem::path record_path = {});
  /// Programmable mock: `responder` returns nullopt for "no match".
  explicit MockBackend(Responder responder, ExhaustionPolicy exhaustion = ExhaustionPolicy::Error);

  std::string send(std::string_view prompt, std::string_view fingerprint) override;

  /// Simulated service time per call, for concurrency tests.
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

  std::size_t calls() const { return calls_.load(); }
  std::size_t max_in_flight() const { return max_in_flight_.load(); }

 private:
  std::optional<std::string> match(std::string_view prompt, std::string_view fingerprint);

  MockScript script_;
  Responder responder_;
  std::filesystem::path record_path_;
  std::vector<std::size_t> uses_;
  std::optional<std::string> last_;
  std::chrono::milliseconds latency_{0};
  std::mutex mu_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
};

// ---------------------------------------------------------------------------
// HTTP backends

namespace wire {

/// Chat-completions request body (single user message).
std::string openai_request(const ProviderConfig& config, std::string_view prompt);
/// choices[0].message.content; throws MalformedResponseError otherwise.
std::string parse_openai_response(std::string_view body);

/// generateContent request body (single user turn).
std::string gemini_request(const ProviderConfig& config, std::string_view prompt);
/// Concatenated candidates[0].content.parts[*].text.
std::string parse_gemini_response(std::string_view body);

}  // namespace wire

/// Backend for `config.kind`: HTTP for the vendor kinds, a MockBackend loaded
/// from `config.mock_script` for the mock kind.
std::shared_ptr<ChatBackend> make_backend(const ProviderConfig& config);

// ---------------------------------------------------------------------------
// Cache

/// Content-addressed completion store: one JSON file per fingerprint,
/// written once and never rewritten. An empty directory keeps entries in
/// memory only.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path dir);

  /// `ASR_EVAL_CACHE_DIR` when set, otherwise `fallback`.
  static std::filesystem::path resolve_dir(const std::filesystem::path& fallback);

  std::optional<ChatExchange> lookup(const std::string& fingerprint);
  void store(const ChatExchange& exchange, const ProviderConfig& config);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::unordered_map<std::string, ChatExchange> memory_;
};

// ---------------------------------------------------------------------------
// Provider handle

/// Outcome of one batch position.
struct BatchItem {
  std::optional<ChatExchange> exchange;
  std::string error_kind;
  std::string error_message;

  bool ok() const { return exchange.has_value(); }
};

struct ProviderStats {
  std::size_t requests = 0;
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t retries = 0;
  std::size_t failures = 0;
};

/// Thread-safe handle: cache lookup, bounded concurrency, retries with
/// exponential backoff and full jitter.
class Provider {
 public:
  Provider(ProviderConfig config, std::shared_ptr<ChatBackend> backend,
           std::shared_ptr<ResponseCache> cache);

  /// Builds the backend with make_backend().
  static std::unique_ptr<Provider> create(ProviderConfig config, std::shared_ptr<ResponseCache> cache);

  Provider(const Provider&) = delete;
  Provider& operator=(const Provider&) = delete;

  ChatExchange complete(std::string_view prompt);

  /// Positionally aligned results; a failing position never aborts the rest.
  std::vector<BatchItem> complete_batch(std::span<const std::string> prompts);

  const ProviderConfig& config() const { return config_; }
  ProviderStats stats() const;

 private:
  std::string call_with_retries(std::string_view prompt, const std::string& fingerprint);

  ProviderConfig config_;
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> retries_{0};
  std::atomic<std::size_t> failures_{0};
};

}  // namespace asreval
