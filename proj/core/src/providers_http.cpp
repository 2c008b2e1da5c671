// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

// OpenAI-compatible chat-completions and Gemini-compatible generateContent
// transports. Only the single-turn, text-only subset is implemented.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <regex>

#include <nlohmann/json.hpp>

#include "asreval/errors.hpp"
#include "asreval/providers.hpp"

namespace asreval {

using nlohmann::json;

namespace wire {

std::string openai_request(const ProviderConfig& config, std::string_view prompt) {
  json body;
  body["model"] = config.model_name;
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config.temperature;
  return body.dump();
}

std::string parse_openai_response(std::string_view body) {
  try {
    const json doc = json::parse(body);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw MalformedResponseError("chat-completions content is not a string");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw MalformedResponseError(std::string("malformed chat-completions response: ") + e.what());
  }
}

std::string gemini_request(const ProviderConfig& config, std::string_view prompt) {
  json body;
  body["contents"] = json::array({{{"role", "user"}, {"parts", json::array({{{"text", prompt}}})}}});
  body["generationConfig"] = {{"temperature", config.temperature}};
  return body.dump();
}

std::string parse_gemini_response(std::string_view body) {
  try {
    const json doc = json::parse(body);
    if (!doc.contains("candidates") || doc.at("candidates").empty()) {
      std::string reason = "no candidates";
      if (doc.contains("promptFeedback") && doc["promptFeedback"].contains("blockReason")) {
        reason += " (blockReason " + doc["promptFeedback"]["blockReason"].get<std::string>() + ")";
      }
      throw MalformedResponseError("generateContent response has " + reason);
    }
    std::string text;
    for (const auto& part : doc.at("candidates").at(0).at("content").at("parts")) {
      if (part.contains("text")) text += part.at("text").get<std::string>();
    }
    return text;
  } catch (const json::exception& e) {
    throw MalformedResponseError(std::string("malformed generateContent response: ") + e.what());
  }
}

}  // namespace wire

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path_prefix;
};

Endpoint split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("base_url must look like http(s)://host[:port][/path]: " + url);
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(ProviderConfig config) : config_(std::move(config)), endpoint_(split_url(config_.base_url)) {}

  std::string send(std::string_view prompt, std::string_view /*fingerprint*/) override {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw AuthError("environment variable " + config_.api_key_env + " is not set");
    }

    httplib::Client client(endpoint_.origin);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config_.request_timeout);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    std::string path;
    std::string body;
    if (config_.kind == ProviderKind::GeminiCompatible) {
      headers.emplace("x-goog-api-key", key);
      path = endpoint_.path_prefix + "/models/" + config_.model_name + ":generateContent";
      body = wire::gemini_request(config_, prompt);
    } else {
      headers.emplace("Authorization", std::string("Bearer ") + key);
      path = endpoint_.path_prefix + "/chat/completions";
      body = wire::openai_request(config_, prompt);
    }

    const auto started = std::chrono::steady_clock::now();
    const auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const auto elapsed = std::chrono::steady_clock::now() - started;
      if (err == httplib::Error::ConnectionTimeout ||
          (err == httplib::Error::Read && elapsed >= config_.request_timeout * 9 / 10)) {
        throw TimeoutError("request to " + endpoint_.origin + " timed out");
      }
      throw TransportError("request to " + endpoint_.origin + " failed: " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status == 401 || status == 403) throw AuthError("backend rejected credentials (HTTP " + std::to_string(status) + ")");
    if (status == 429) throw RateLimitError("backend rate limit (HTTP 429)");
    if (status == 408 || status == 504) throw TimeoutError("backend timeout (HTTP " + std::to_string(status) + ")");
    if (status >= 500) throw TransportError("backend error (HTTP " + std::to_string(status) + ")");
    if (status < 200 || status >= 300) {
      throw ProviderError("backend returned HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
    }
    return config_.kind == ProviderKind::GeminiCompatible ? wire::parse_gemini_response(res->body)
                                                          : wire::parse_openai_response(res->body);
  }

 private:
  ProviderConfig config_;
  Endpoint endpoint_;
};

}  // namespace

std::shared_ptr<ChatBackend> make_backend(const ProviderConfig& config) {
  validate(config);
  if (config.kind == ProviderKind::Mock) {
    if (config.mock_script.empty()) {
      throw ConfigError("mock provider '" + config.name + "' needs a mock_script");
    }
    return std::make_shared<MockBackend>(MockScript::load(config.mock_script), config.mock_record);
  }
  return std::make_shared<HttpBackend>(config);
}

}  // namespace asreval
