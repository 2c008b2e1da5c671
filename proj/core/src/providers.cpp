// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/providers.hpp"

#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "asreval/errors.hpp"
#include "asreval/parallel.hpp"
#include "asreval/prompts.hpp"
#include "fs_util.hpp"

namespace asreval {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::OpenAiCompatible: return "openai_compatible";
    case ProviderKind::GeminiCompatible: return "gemini_compatible";
    case ProviderKind::Mock: return "mock";
  }
  return "?";
}

ProviderKind parse_provider_kind(std::string_view name) {
  if (name == "openai_compatible") return ProviderKind::OpenAiCompatible;
  if (name == "gemini_compatible") return ProviderKind::GeminiCompatible;
  if (name == "mock") return ProviderKind::Mock;
  throw ConfigError("unknown provider kind '" + std::string(name) +
                    "' (expected openai_compatible, gemini_compatible or mock)");
}

void validate(const ProviderConfig& config) {
  const std::string who = config.name.empty() ? "provider" : "provider '" + config.name + "'";
  if (!std::isfinite(config.temperature) || config.temperature < 0.0) {
    throw ConfigError(who + ": temperature must be >= 0");
  }
  if (config.max_retries < 0) throw ConfigError(who + ": max_retries must be >= 0");
  if (config.max_parallel < 1) throw ConfigError(who + ": max_parallel must be >= 1");
  if (config.request_timeout.count() <= 0) throw ConfigError(who + ": request_timeout must be > 0");
  if (config.backoff_base.count() < 0) throw ConfigError(who + ": backoff_base must be >= 0");
  if (config.kind != ProviderKind::Mock) {
    if (config.base_url.empty()) throw ConfigError(who + ": base_url is required");
    if (config.model_name.empty()) throw ConfigError(who + ": model is required");
    if (config.api_key_env.empty()) throw ConfigError(who + ": api_key_env is required");
  }
}

std::string provider_identity(const ProviderConfig& config) {
  return sha256_hex(json::array({to_string(config.kind), config.model_name, config.temperature}).dump());
}

std::string provider_fingerprint(const ProviderConfig& config, std::string_view prompt) {
  return sha256_hex(
      json::array({to_string(config.kind), config.model_name, config.temperature, prompt}).dump());
}

namespace {

std::string utc_now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

MockRule::Match parse_match(const std::string& s) {
  if (s == "exact") return MockRule::Match::Exact;
  if (s == "substring") return MockRule::Match::Substring;
  if (s == "fingerprint") return MockRule::Match::Fingerprint;
  if (s == "any") return MockRule::Match::Any;
  throw ConfigError("mock rule: unknown match '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// MockScript / MockBackend

MockScript MockScript::from_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mock script is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("mock script must be a JSON object");
  MockScript script;
  try {
    const std::string policy = doc.value("exhaustion", "error");
    if (policy == "error") {
      script.exhaustion = ExhaustionPolicy::Error;
    } else if (policy == "repeat_last") {
      script.exhaustion = ExhaustionPolicy::RepeatLast;
    } else {
      throw ConfigError("mock script: exhaustion must be 'error' or 'repeat_last'");
    }
    // Shorthand: {"exact": {"prompt": "completion", ...}}
    if (doc.contains("exact")) {
      for (const auto& [prompt, completion] : doc.at("exact").items()) {
        script.rules.push_back({MockRule::Match::Exact, prompt, completion.get<std::string>(), {}, {}});
      }
    }
    if (doc.contains("rules")) {
      for (const auto& r : doc.at("rules")) {
        MockRule rule;
        rule.match = parse_match(r.value("match", "any"));
        rule.pattern = r.value("pattern", "");
        if (rule.match == MockRule::Match::Exact && r.contains("prompt")) rule.pattern = r.at("prompt");
        if (rule.match == MockRule::Match::Fingerprint && r.contains("fingerprint")) {
          rule.pattern = r.at("fingerprint");
        }
        if (r.contains("echo_after")) {
          rule.echo_after = r.at("echo_after").get<std::string>();
        } else if (r.contains("completion")) {
          rule.completion = r.at("completion").get<std::string>();
        } else {
          throw ConfigError("mock rule needs 'completion' or 'echo_after'");
        }
        if (r.contains("times")) rule.times = r.at("times").get<std::size_t>();
        script.rules.push_back(std::move(rule));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mock script: ") + e.what());
  }
  return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  return from_json(detail::read_file(path));
}

MockBackend::MockBackend(MockScript script, std::filesystem::path record_path)
    : script_(std::move(script)), record_path_(std::move(record_path)), uses_(script_.rules.size(), 0) {}

MockBackend::MockBackend(Responder responder, ExhaustionPolicy exhaustion)
    : responder_(std::move(responder)) {
  script_.exhaustion = exhaustion;
}

std::optional<std::string> MockBackend::match(std::string_view prompt, std::string_view fingerprint) {
  if (responder_) return responder_(prompt);
  for (std::size_t i = 0; i < script_.rules.size(); ++i) {
    const MockRule& rule = script_.rules[i];
    if (rule.times && uses_[i] >= *rule.times) continue;
    bool hit = false;
    switch (rule.match) {
      case MockRule::Match::Exact: hit = prompt == rule.pattern; break;
      case MockRule::Match::Substring: hit = prompt.find(rule.pattern) != std::string_view::npos; break;
      case MockRule::Match::Fingerprint: hit = fingerprint == rule.pattern; break;
      case MockRule::Match::Any: hit = true; break;
    }
    if (!hit) continue;
    std::string completion = rule.completion;
    if (rule.echo_after) {
      const auto pos = prompt.rfind(*rule.echo_after);
      if (pos == std::string_view::npos) continue;
      completion = std::string(prompt.substr(pos + rule.echo_after->size()));
    }
    ++uses_[i];
    return completion;
  }
  return std::nullopt;
}

std::string MockBackend::send(std::string_view prompt, std::string_view fingerprint) {
  ++calls_;
  const std::size_t now = ++in_flight_;
  std::size_t seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  struct Leave {
    std::atomic<std::size_t>& n;
    ~Leave() { --n; }
  } leave{in_flight_};

  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  std::lock_guard lock(mu_);
  if (!record_path_.empty()) {
    std::ofstream log(record_path_, std::ios::app | std::ios::binary);
    log << json{{"fingerprint", fingerprint}, {"prompt", prompt}}.dump() << '\n';
  }
  if (auto completion = match(prompt, fingerprint)) {
    last_ = *completion;
    return *completion;
  }
  if (script_.exhaustion == ExhaustionPolicy::RepeatLast && last_) return *last_;
  throw MockExhaustedError("mock script has no completion for prompt with fingerprint " +
                           std::string(fingerprint.substr(0, 12)));
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::resolve_dir(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("ASR_EVAL_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return fallback;
}

std::optional<ChatExchange> ResponseCache::lookup(const std::string& fingerprint) {
  std::lock_guard lock(mu_);
  if (auto it = memory_.find(fingerprint); it != memory_.end()) return it->second;
  if (dir_.empty()) return std::nullopt;
  const auto path = dir_ / (fingerprint + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const json doc = json::parse(detail::read_file(path));
    if (doc.at("fingerprint").get<std::string>() != fingerprint) return std::nullopt;
    ChatExchange ex{doc.at("prompt"), doc.at("completion"), fingerprint, doc.value("timestamp", ""), false};
    memory_.emplace(fingerprint, ex);
    return ex;
  } catch (const std::exception&) {
    // Unreadable entries are treated as misses and rewritten on the next store.
    return std::nullopt;
  }
}

void ResponseCache::store(const ChatExchange& exchange, const ProviderConfig& config) {
  std::lock_guard lock(mu_);
  ChatExchange entry = exchange;
  entry.from_cache = false;
  memory_.insert_or_assign(exchange.provider_fingerprint, entry);
  if (dir_.empty()) return;
  const auto path = dir_ / (exchange.provider_fingerprint + ".json");
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    try {
      if (json::accept(detail::read_file(path))) return;
    } catch (const std::exception&) {
    }
  }
  ordered_json doc;
  doc["fingerprint"] = exchange.provider_fingerprint;
  doc["provider"] = {{"kind", to_string(config.kind)},
                     {"model", config.model_name},
                     {"temperature", config.temperature}};
  doc["prompt"] = exchange.prompt;
  doc["completion"] = exchange.completion;
  doc["timestamp"] = exchange.timestamp;
  detail::write_file_atomic(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Provider

Provider::Provider(ProviderConfig config, std::shared_ptr<ChatBackend> backend,
                   std::shared_ptr<ResponseCache> cache)
    : config_(std::move(config)), backend_(std::move(backend)), cache_(std::move(cache)) {
  validate(config_);
  if (!backend_) throw ConfigError("provider '" + config_.name + "' has no backend");
  slots_ = std::make_unique<std::counting_semaphore<>>(config_.max_parallel);
}

std::unique_ptr<Provider> Provider::create(ProviderConfig config, std::shared_ptr<ResponseCache> cache) {
  validate(config);
  auto backend = make_backend(config);
  return std::make_unique<Provider>(std::move(config), std::move(backend), std::move(cache));
}

ProviderStats Provider::stats() const {
  return {requests_.load(), backend_calls_.load(), cache_hits_.load(), retries_.load(), failures_.load()};
}

std::string Provider::call_with_retries(std::string_view prompt, const std::string& fingerprint) {
  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  for (int attempt = 0;; ++attempt) {
    try {
      slots_->acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{*slots_};
      ++backend_calls_;
      return backend_->send(prompt, fingerprint);
    } catch (const RateLimitError&) {
      if (attempt >= config_.max_retries) throw;
    } catch (const TimeoutError&) {
      if (attempt >= config_.max_retries) throw;
    } catch (const TransportError&) {
      if (attempt >= config_.max_retries) throw;
    }
    ++retries_;
    const double ceiling = static_cast<double>(config_.backoff_base.count()) * std::ldexp(1.0, attempt);
    std::uniform_real_distribution<double> jitter(0.0, ceiling);
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(jitter(jitter_rng)));
  }
}

ChatExchange Provider::complete(std::string_view prompt) {
  ++requests_;
  const std::string fingerprint = provider_fingerprint(config_, prompt);
  if (cache_) {
    if (auto hit = cache_->lookup(fingerprint)) {
      ++cache_hits_;
      hit->from_cache = true;
      return *hit;
    }
  }
  std::string completion;
  try {
    completion = call_with_retries(prompt, fingerprint);
  } catch (...) {
    ++failures_;
    throw;
  }
  ChatExchange exchange{std::string(prompt), std::move(completion), fingerprint, utc_now_iso(), false};
  if (cache_) cache_->store(exchange, config_);
  return exchange;
}

std::vector<BatchItem> Provider::complete_batch(std::span<const std::string> prompts) {
  std::vector<BatchItem> out(prompts.size());
  parallel_for(prompts.size(), static_cast<std::size_t>(config_.max_parallel), [&](std::size_t i) {
    try {
      out[i].exchange = complete(prompts[i]);
    } catch (const std::exception& e) {
      out[i].error_kind = std::string(error_kind(e));
      out[i].error_message = e.what();
    }
  });
  return out;
}

}  // namespace asreval
