// Copyright 2026 The promptmw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "promptmw/gateway.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "promptmw/http_transport.hpp"
#include "promptmw/testing/scripted_transport.hpp"

namespace promptmw {
namespace {

using namespace std::chrono_literals;
using fakes::ScriptedTransport;
using fakes::ScriptStep;

constexpr char kKey[] = "sk-test-0123456789";

ProviderConfig live_config() {
  ProviderConfig cfg;
  cfg.kind = ProviderKind::kOpenAICompatible;
  cfg.base_url = "https://llm.example.com";
  cfg.model = "test-model";
  cfg.api_key_ref = "TEST_KEY";
  cfg.timeout = 2000ms;
  cfg.max_attempts = 3;
  return cfg;
}

struct Harness {
  std::shared_ptr<ScriptedTransport> transport;
  std::vector<std::chrono::milliseconds> sleeps;
  std::unique_ptr<Gateway> gateway;

  explicit Harness(std::vector<ScriptStep> script, ProviderConfig cfg = live_config(),
                   std::optional<std::string> key = kKey)
      : transport(std::make_shared<ScriptedTransport>(std::move(script))) {
    GatewayOptions opts;
    opts.sleep = [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
    opts.env = [key](const std::string& name) -> std::optional<std::string> {
      if (name == "TEST_KEY") return key;
      return std::nullopt;
    };
    opts.jitter_seed = 99;
    gateway = std::make_unique<Gateway>(cfg, transport, std::move(opts));
  }
};

// Expected digests are the published SHA-256 test values.
TEST(MockCompleteTest, HashPrefixContract) {
  const auto r = mock_complete("hello");
  EXPECT_EQ(r.text, "MOCK[2cf24dba]:hello");
  EXPECT_EQ(r.attempts, 1);
  EXPECT_EQ(r.latency, 0ms);
  EXPECT_EQ(mock_complete("").text, "MOCK[e3b0c442]:");
  EXPECT_EQ(mock_complete("abc").text, "MOCK[ba7816bf]:abc");
}

TEST(MockCompleteTest, TruncatesEchoTo2000Bytes) {
  const std::string prompt(5000, 'q');
  const auto r = mock_complete(prompt);
  EXPECT_EQ(r.text.size(), std::string("MOCK[12345678]:").size() + 2000);
  EXPECT_EQ(r.text.substr(0, 5), "MOCK[");
  EXPECT_EQ(r.text.substr(r.text.size() - 2000), prompt.substr(0, 2000));
}

TEST(MockCompleteTest, PureAndDistinguishing) {
  EXPECT_EQ(mock_complete("same").text, mock_complete("same").text);
  const auto a = mock_complete("prompt A").text.substr(5, 8);
  const auto b = mock_complete("prompt B").text.substr(5, 8);
  EXPECT_EQ(a, sha256_hex("prompt A").substr(0, 8));
  EXPECT_EQ(b, sha256_hex("prompt B").substr(0, 8));
  EXPECT_NE(a, b);
}

TEST(GatewayTest, MockProviderNeedsNoTransport) {
  ProviderConfig cfg;
  Gateway gw(cfg, nullptr);
  EXPECT_TRUE(gw.ready());
  auto r = gw.complete(ResolvedPrompt{"hello", {}});
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->text, "MOCK[2cf24dba]:hello");
  EXPECT_EQ(r->provider, ProviderKind::kMock);
}

TEST(GatewayTest, RetriesTransientThenSucceeds) {
  Harness h({ScriptStep::http(503), ScriptStep::ok("fine")});
  auto r = h.gateway->complete("prompt");
  ASSERT_TRUE(r.has_value()) << r.error().describe();
  EXPECT_EQ(r->attempts, 2);
  EXPECT_EQ(r->text, "fine");
  EXPECT_EQ(h.sleeps.size(), 1u);
}

TEST(GatewayTest, ThreeAttemptsToSucceed) {
  Harness h({ScriptStep::http(503), ScriptStep::http(503), ScriptStep::ok()});
  auto r = h.gateway->complete("prompt");
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->attempts, 3);
}

TEST(GatewayTest, AuthFailureIsNeverRetried) {
  for (int status : {401, 403}) {
    Harness h({ScriptStep::http(status), ScriptStep::ok()});
    auto r = h.gateway->complete("prompt");
    ASSERT_FALSE(r.has_value());
    EXPECT_EQ(r.error().code, GatewayErrc::kAuth);
    EXPECT_EQ(r.error().attempts, 1);
    EXPECT_EQ(h.transport->captured().size(), 1u);
    EXPECT_TRUE(h.sleeps.empty());
  }
}

TEST(GatewayTest, RateLimitExhaustion) {
  Harness h({ScriptStep::http(429)});
  auto r = h.gateway->complete("prompt");
  ASSERT_FALSE(r.has_value());
  EXPECT_EQ(r.error().code, GatewayErrc::kRateLimited);
  EXPECT_EQ(r.error().attempts, 3);
  EXPECT_EQ(h.transport->captured().size(), 3u);
}

TEST(GatewayTest, ServerErrorExhaustion) {
  Harness h({ScriptStep::http(500), ScriptStep::http(502), ScriptStep::http(503)});
  auto r = h.gateway->complete("prompt");
  ASSERT_FALSE(r.has_value());
  EXPECT_EQ(r.error().code, GatewayErrc::kProvider);
  EXPECT_EQ(r.error().attempts, 3);
}

TEST(GatewayTest, ConnectErrorsAreTransient) {
  Harness h({ScriptStep::unreachable(), ScriptStep::ok()});
  auto r = h.gateway->complete("prompt");
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->attempts, 2);
}

TEST(GatewayTest, OtherClientErrorsAreFinal) {
  Harness h({ScriptStep::http(400), ScriptStep::ok()});
  auto r = h.gateway->complete("prompt");
  ASSERT_FALSE(r.has_value());
  EXPECT_EQ(r.error().code, GatewayErrc::kProvider);
  EXPECT_EQ(r.error().attempts, 1);
}

TEST(GatewayTest, MalformedResponseBody) {
  Harness h({ScriptStep{200, R"({"choices": []})", 0ms, false}});
  auto r = h.gateway->complete("prompt");
  ASSERT_FALSE(r.has_value());
  EXPECT_EQ(r.error().code, GatewayErrc::kProvider);
}

TEST(GatewayTest, DeadlineAgainstStallingTransport) {
  auto cfg = live_config();
  cfg.timeout = 100ms;
  cfg.max_attempts = 1;
  Harness h({ScriptStep::hang(10s)}, cfg);
  const auto start = std::chrono::steady_clock::now();
  auto r = h.gateway->complete("prompt");
  const auto elapsed = std::chrono::steady_clock::now() - start;
  ASSERT_FALSE(r.has_value());
  EXPECT_EQ(r.error().code, GatewayErrc::kTimeout);
  EXPECT_EQ(r.error().attempts, 1);
  EXPECT_LT(elapsed, 150ms);
  // The stalled exchange is told to stop.
  for (int i = 0; i < 100 && h.transport->cancelled() == 0; ++i) {
    std::this_thread::sleep_for(5ms);
  }
  EXPECT_EQ(h.transport->cancelled(), 1);
}

TEST(GatewayTest, TimeoutThenRecovery) {
  auto cfg = live_config();
  cfg.timeout = 100ms;
  Harness h({ScriptStep::hang(10s), ScriptStep::ok("late but fine")}, cfg);
  auto r = h.gateway->complete("prompt");
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->attempts, 2);
}

TEST(GatewayTest, MissingKeyIsConfigError) {
  Harness h({ScriptStep::ok()}, live_config(), std::nullopt);
  EXPECT_FALSE(h.gateway->ready());
  auto r = h.gateway->complete("prompt");
  ASSERT_FALSE(r.has_value());
  EXPECT_EQ(r.error().code, GatewayErrc::kConfig);
  EXPECT_EQ(r.error().attempts, 0);
  EXPECT_TRUE(h.transport->captured().empty());
}

TEST(GatewayTest, EmptyPromptRejectedForLiveProvider) {
  Harness h({ScriptStep::ok()});
  auto r = h.gateway->complete("");
  ASSERT_FALSE(r.has_value());
  EXPECT_EQ(r.error().code, GatewayErrc::kInvalidPrompt);
}

TEST(GatewayTest, WireCarriesPromptBytesAsSingleUserMessage) {
  Harness h({ScriptStep::ok()});
  const std::string prompt = "Line 1\n\t\"quoted\" \xC3\xA9 {{x}} \\ end ";
  ASSERT_TRUE(h.gateway->complete(prompt).has_value());
  const auto reqs = h.transport->captured();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].base_url, "https://llm.example.com");
  EXPECT_EQ(reqs[0].path, "/v1/chat/completions");
  const auto body = nlohmann::json::parse(reqs[0].body);
  ASSERT_EQ(body.at("messages").size(), 1u);
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"].get<std::string>(), prompt);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["max_tokens"], 512);
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.7);
  std::map<std::string, std::string> headers(reqs[0].headers.begin(), reqs[0].headers.end());
  EXPECT_EQ(headers["Authorization"], std::string("Bearer ") + kKey);
}

TEST(BackoffPolicyTest, CeilingsDoubleFromBase) {
  BackoffPolicy p;
  EXPECT_EQ(p.ceiling(1), 500ms);
  EXPECT_EQ(p.ceiling(2), 1000ms);
  EXPECT_EQ(p.ceiling(3), 2000ms);
  auto prev = 0ms;
  for (int n = 1; n < 40; ++n) {
    EXPECT_GE(p.ceiling(n), prev);
    EXPECT_LE(p.ceiling(n), p.cap);
    prev = p.ceiling(n);
  }
}

TEST(BackoffPolicyTest, FullJitterStaysWithinCeiling) {
  BackoffPolicy p;
  std::mt19937_64 rng(1);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto d = p.delay(2, rng);
    ASSERT_GE(d, 0ms);
    ASSERT_LE(d, 1000ms);
    seen.insert(d.count());
  }
  EXPECT_GT(seen.size(), 100u);
}

TEST(GatewayTest, SleepsFollowBackoffCeilings) {
  auto cfg = live_config();
  cfg.max_attempts = 4;
  Harness h({ScriptStep::http(503)}, cfg);
  ASSERT_FALSE(h.gateway->complete("p").has_value());
  ASSERT_EQ(h.sleeps.size(), 3u);
  BackoffPolicy p;
  for (std::size_t i = 0; i < h.sleeps.size(); ++i) {
    EXPECT_LE(h.sleeps[i], p.ceiling(static_cast<int>(i) + 1));
  }
  EXPECT_EQ(h.transport->captured().size(), 4u);
}

TEST(GatewayTest, ThirtyTwoConcurrentCompletions) {
  Harness h({ScriptStep::hang(100ms)});
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 32; ++i) {
    threads.emplace_back([&, i] {
      if (h.gateway->complete("p" + std::to_string(i))) ++ok;
    });
  }
  for (auto& t : threads) t.join();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(ok.load(), 32);
  EXPECT_LT(elapsed, 1600ms);  // serial execution would need 3.2 s
}

TEST(ProviderConfigTest, Validation) {
  auto cfg = live_config();
  EXPECT_TRUE(cfg.validate().has_value());
  cfg.base_url = "http://llm.example.com";
  EXPECT_FALSE(cfg.validate().has_value());
  cfg.base_url = "http://localhost:8000";
  EXPECT_TRUE(cfg.validate().has_value());
  cfg.base_url = "http://127.0.0.1:9/x";
  EXPECT_TRUE(cfg.validate().has_value());
  cfg.base_url = "ftp://host";
  EXPECT_FALSE(cfg.validate().has_value());
  cfg = live_config();
  cfg.max_attempts = 0;
  EXPECT_FALSE(cfg.validate().has_value());
  cfg = live_config();
  cfg.timeout = 0ms;
  EXPECT_FALSE(cfg.validate().has_value());
}

TEST(ProviderConfigTest, FromEnvironment) {
  std::map<std::string, std::string> env = {
      {"PROVIDER_KIND", "openai"},
      {"PROVIDER_BASE_URL", "http://localhost:1234"},
      {"PROVIDER_MODEL", "m"},
      {"PROVIDER_API_KEY_REF", "MY_KEY"},
      {"PROVIDER_TIMEOUT_MS", "250"},
      {"PROVIDER_MAX_ATTEMPTS", "5"}};
  auto lookup = [&](const std::string& k) -> std::optional<std::string> {
    auto it = env.find(k);
    if (it == env.end()) return std::nullopt;
    return it->second;
  };
  auto cfg = provider_config_from_env(lookup);
  ASSERT_TRUE(cfg.has_value()) << cfg.error().describe();
  EXPECT_EQ(cfg->kind, ProviderKind::kOpenAICompatible);
  EXPECT_EQ(cfg->api_key_ref, "MY_KEY");
  EXPECT_EQ(cfg->timeout, 250ms);
  EXPECT_EQ(cfg->max_attempts, 5);
  env["PROVIDER_MAX_ATTEMPTS"] = "many";
  EXPECT_FALSE(provider_config_from_env(lookup).has_value());
  env["PROVIDER_MAX_ATTEMPTS"] = "0";
  EXPECT_FALSE(provider_config_from_env(lookup).has_value());
  env.clear();
  auto mock = provider_config_from_env(lookup);
  ASSERT_TRUE(mock.has_value());
  EXPECT_EQ(mock->kind, ProviderKind::kMock);
}

TEST(SecretHygieneTest, KeyNeverInConfigOrErrors) {
  std::vector<std::string> texts;
  for (int status : {401, 429, 500, 400}) {
    Harness h({ScriptStep::http(status)});
    auto r = h.gateway->complete("p");
    ASSERT_FALSE(r.has_value());
    texts.push_back(r.error().describe());
    texts.push_back(h.gateway->config().to_json().dump());
  }
  for (const auto& t : texts) EXPECT_EQ(t.find(kKey), std::string::npos) << t;
}

// The real transport against a loopback server speaking the chat API.
TEST(HttpTransportTest, TalksToLocalServer) {
  std::atomic<int> calls{0};
  std::string seen_auth;
  std::string seen_body;
  fixtures::LocalServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      if (calls++ == 0) {
        res.status = 503;
        return;
      }
      seen_auth = req.get_header_value("Authorization");
      seen_body = req.body;
      res.set_content(ScriptStep::ok("from server").body, "application/json");
    });
  });
  auto cfg = live_config();
  cfg.base_url = server.url();
  GatewayOptions opts;
  opts.backoff.base = 1ms;
  opts.env = [](const std::string&) { return std::optional<std::string>(kKey); };
  Gateway gw(cfg, std::make_shared<HttpTransport>(), opts);
  auto r = gw.complete("over the wire");
  ASSERT_TRUE(r.has_value()) << r.error().describe();
  EXPECT_EQ(r->text, "from server");
  EXPECT_EQ(r->attempts, 2);
  EXPECT_EQ(seen_auth, std::string("Bearer ") + kKey);
  EXPECT_EQ(nlohmann::json::parse(seen_body)["messages"][0]["content"], "over the wire");
}

TEST(HttpTransportTest, OversizedResponseRejected) {
  fixtures::LocalServer server([](httplib::Server& s) {
    s.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(std::string(kMaxBodyBytes + 10, 'x'), "application/json");
    });
  });
  auto cfg = live_config();
  cfg.base_url = server.url();
  GatewayOptions opts;
  opts.env = [](const std::string&) { return std::optional<std::string>(kKey); };
  Gateway gw(cfg, std::make_shared<HttpTransport>(), opts);
  auto r = gw.complete("p");
  ASSERT_FALSE(r.has_value());
  EXPECT_EQ(r.error().code, GatewayErrc::kProvider);
  EXPECT_EQ(r.error().attempts, 1);
}

TEST(HttpTransportTest, UnreachableHostIsRetriedThenFails) {
  auto cfg = live_config();
  cfg.base_url = "http://127.0.0.1:1";
  cfg.max_attempts = 2;
  GatewayOptions opts;
  opts.backoff.base = 1ms;
  opts.env = [](const std::string&) { return std::optional<std::string>(kKey); };
  Gateway gw(cfg, std::make_shared<HttpTransport>(), opts);
  auto r = gw.complete("p");
  ASSERT_FALSE(r.has_value());
  EXPECT_EQ(r.error().attempts, 2);
  EXPECT_EQ(r.error().describe().find(kKey), std::string::npos);
}

}  // namespace
}  // namespace promptmw
