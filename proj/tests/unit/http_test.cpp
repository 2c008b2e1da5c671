// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include <gtest/gtest.h>

// Must match the library build, or the inline httplib classes differ.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "asreval/errors.hpp"
#include "asreval/providers.hpp"
#include "test_support.hpp"

namespace asreval {
namespace {

using nlohmann::json;

constexpr const char* kKeyEnv = "ASREVAL_TEST_HTTP_KEY";
constexpr const char* kKey = "sk-test-do-not-log-0123456789";

// Local HTTP server standing in for a vendor endpoint.
class FakeVendor : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post(R"(/v1/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
      record(req);
      if (const int status = next_status(); status != 200) {
        res.status = status;
        res.set_content(R"({"error": {"message": "nope"}})", "application/json");
        return;
      }
      const auto body = json::parse(req.body);
      const std::string prompt = body.at("messages").at(0).at("content");
      res.set_content(malformed_ ? "{\"choices\": []}"
                                 : json{{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo: " + prompt}}}}}}}.dump(),
                      "application/json");
    });
    server_.Post(R"(/v1beta/models/([^/]+):generateContent)", [this](const httplib::Request& req, httplib::Response& res) {
      record(req);
      const auto body = json::parse(req.body);
      const std::string prompt = body.at("contents").at(0).at("parts").at(0).at("text");
      res.set_content(json{{"candidates", {{{"content", {{"parts", {{{"text", "gem: "}}, {{"text", prompt}}}}}}}}}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  ProviderConfig config(ProviderKind kind, const std::string& prefix) const {
    ProviderConfig c;
    c.name = "vendor";
    c.kind = kind;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_) + prefix;
    c.model_name = "test-model";
    c.api_key_env = kKeyEnv;
    c.request_timeout = std::chrono::milliseconds(5000);
    c.backoff_base = std::chrono::milliseconds(1);
    return c;
  }

  void record(const httplib::Request& req) {
    std::lock_guard lock(mu_);
    ++hits_;
    last_auth_ = req.get_header_value("Authorization");
    last_goog_key_ = req.get_header_value("x-goog-api-key");
    last_path_ = req.path;
    last_body_ = req.body;
  }

  int next_status() {
    std::lock_guard lock(mu_);
    if (statuses_.empty()) return 200;
    const int s = statuses_.front();
    statuses_.erase(statuses_.begin());
    return s;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  int hits_ = 0;
  std::string last_auth_;
  std::string last_goog_key_;
  std::string last_path_;
  std::string last_body_;
  std::vector<int> statuses_;
  bool malformed_ = false;
};

TEST_F(FakeVendor, OpenAiCompatibleRoundTrip) {
  testing::EnvGuard key(kKeyEnv, kKey);
  auto provider = Provider::create(config(ProviderKind::OpenAiCompatible, "/v1"), nullptr);
  EXPECT_EQ(provider->complete("hi there").completion, "echo: hi there");
  EXPECT_EQ(last_path_, "/v1/chat/completions");
  EXPECT_EQ(last_auth_, std::string("Bearer ") + kKey);
  const auto body = json::parse(last_body_);
  EXPECT_EQ(body.at("model"), "test-model");
  EXPECT_EQ(body.at("temperature"), 0.0);
  EXPECT_EQ(body.at("messages").at(0).at("role"), "user");
}

TEST_F(FakeVendor, GeminiCompatibleRoundTrip) {
  testing::EnvGuard key(kKeyEnv, kKey);
  auto provider = Provider::create(config(ProviderKind::GeminiCompatible, "/v1beta"), nullptr);
  EXPECT_EQ(provider->complete("hello").completion, "gem: hello");
  EXPECT_EQ(last_path_, "/v1beta/models/test-model:generateContent");
  EXPECT_EQ(last_goog_key_, kKey);
  EXPECT_EQ(last_path_.find(kKey), std::string::npos);
}

TEST_F(FakeVendor, StatusCodesMapToErrorClasses) {
  testing::EnvGuard key(kKeyEnv, kKey);
  ProviderConfig c = config(ProviderKind::OpenAiCompatible, "/v1");
  c.max_retries = 0;
  auto provider = Provider::create(c, nullptr);
  statuses_ = {401};
  EXPECT_THROW(provider->complete("a"), AuthError);
  statuses_ = {429};
  EXPECT_THROW(provider->complete("a"), RateLimitError);
  statuses_ = {503};
  EXPECT_THROW(provider->complete("a"), TransportError);
  statuses_ = {504};
  EXPECT_THROW(provider->complete("a"), TimeoutError);
  statuses_ = {400};
  EXPECT_THROW(provider->complete("a"), ProviderError);
}

TEST_F(FakeVendor, TransientStatusesAreRetried) {
  testing::EnvGuard key(kKeyEnv, kKey);
  auto provider = Provider::create(config(ProviderKind::OpenAiCompatible, "/v1"), nullptr);
  statuses_ = {429, 503};
  EXPECT_EQ(provider->complete("x").completion, "echo: x");
  EXPECT_EQ(hits_, 3);
  EXPECT_EQ(provider->stats().retries, 2u);

  hits_ = 0;
  statuses_ = {401};
  EXPECT_THROW(provider->complete("y"), AuthError);
  EXPECT_EQ(hits_, 1);
}

TEST_F(FakeVendor, MalformedBody) {
  testing::EnvGuard key(kKeyEnv, kKey);
  malformed_ = true;
  auto provider = Provider::create(config(ProviderKind::OpenAiCompatible, "/v1"), nullptr);
  EXPECT_THROW(provider->complete("x"), MalformedResponseError);
}

TEST_F(FakeVendor, MissingKeyFailsAtCallTime) {
  ::unsetenv(kKeyEnv);
  auto provider = Provider::create(config(ProviderKind::OpenAiCompatible, "/v1"), nullptr);
  try {
    provider->complete("x");
    FAIL() << "expected AuthError";
  } catch (const AuthError& e) {
    EXPECT_NE(std::string(e.what()).find(kKeyEnv), std::string::npos);
  }
  EXPECT_EQ(hits_, 0);
}

TEST_F(FakeVendor, KeyNeverReachesCacheOrErrors) {
  testing::EnvGuard key(kKeyEnv, kKey);
  testing::TempDir dir;
  auto provider = Provider::create(config(ProviderKind::OpenAiCompatible, "/v1"),
                                   std::make_shared<ResponseCache>(dir.path()));
  provider->complete("cache me");
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
    EXPECT_EQ(testing::slurp(entry.path()).find(kKey), std::string::npos) << entry.path();
  }
  statuses_ = {401, 500, 400};
  for (int i = 0; i < 3; ++i) {
    ProviderConfig c = config(ProviderKind::OpenAiCompatible, "/v1");
    c.max_retries = 0;
    try {
      Provider::create(c, nullptr)->complete("fail " + std::to_string(i));
    } catch (const std::exception& e) {
      EXPECT_EQ(std::string(e.what()).find(kKey), std::string::npos);
    }
  }
}

TEST(HttpBackend, UnreachableHostIsTransport) {
  testing::EnvGuard key(kKeyEnv, kKey);
  ProviderConfig c;
  c.name = "dead";
  c.kind = ProviderKind::OpenAiCompatible;
  c.base_url = "http://127.0.0.1:1/v1";
  c.model_name = "m";
  c.api_key_env = kKeyEnv;
  c.max_retries = 0;
  c.request_timeout = std::chrono::milliseconds(2000);
  auto provider = Provider::create(c, nullptr);
  EXPECT_THROW(provider->complete("x"), TransportError);
}

TEST(HttpBackend, BadBaseUrl) {
  ProviderConfig c;
  c.name = "bad";
  c.kind = ProviderKind::OpenAiCompatible;
  c.base_url = "not a url";
  c.model_name = "m";
  c.api_key_env = kKeyEnv;
  EXPECT_THROW(Provider::create(c, nullptr), ConfigError);
}

TEST(Wire, ResponseParsers) {
  EXPECT_EQ(wire::parse_openai_response(R"({"choices": [{"message": {"content": "x"}}]})"), "x");
  EXPECT_THROW(wire::parse_openai_response(R"({"choices": [{"message": {"content": null}}]})"),
               MalformedResponseError);
  EXPECT_THROW(wire::parse_openai_response("<html>"), MalformedResponseError);
  EXPECT_EQ(wire::parse_gemini_response(R"({"candidates": [{"content": {"parts": [{"text": "a"}, {"text": "b"}]}}]})"),
            "ab");
  EXPECT_THROW(wire::parse_gemini_response(R"({"candidates": []})"), MalformedResponseError);
}

}  // namespace
}  // namespace asreval
