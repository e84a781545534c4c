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

// Sends resolved prompts to a language model. Two provider kinds exist: an
// OpenAI-compatible chat-completions client and a deterministic mock.
//
// The network is reached through an injectable Transport, so retry, backoff
// and deadline behaviour can be exercised without sockets.

#ifndef PROMPTMW_GATEWAY_HPP_
#define PROMPTMW_GATEWAY_HPP_

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptmw/expected.hpp"
#include "promptmw/middleware.hpp"

namespace promptmw {

inline constexpr std::size_t kMaxBodyBytes = std::size_t{1} << 20;
inline constexpr std::size_t kMockEchoBytes = 2000;

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0F]);
  }
  return out;
}

enum class ProviderKind { kOpenAICompatible, kMock };

inline std::string_view to_string(ProviderKind kind) {
  return kind == ProviderKind::kMock ? "mock" : "openai";
}

inline std::optional<ProviderKind> parse_provider_kind(std::string_view text) {
  if (text == "mock") return ProviderKind::kMock;
  if (text == "openai" || text == "openai_compatible") {
    return ProviderKind::kOpenAICompatible;
  }
  return std::nullopt;
}

enum class GatewayErrc {
  kAuth,
  kTimeout,
  kRateLimited,
  kProvider,
  kConfig,
  kInvalidPrompt,
};

inline std::string_view to_string(GatewayErrc code) {
  switch (code) {
    case GatewayErrc::kAuth: return "E_AUTH";
    case GatewayErrc::kTimeout: return "E_TIMEOUT";
    case GatewayErrc::kRateLimited: return "E_RATE_LIMITED";
    case GatewayErrc::kProvider: return "E_PROVIDER";
    case GatewayErrc::kConfig: return "E_CONFIG";
    case GatewayErrc::kInvalidPrompt: return "E_INVALID_PROMPT";
  }
  return "E_UNKNOWN";
}

struct GatewayError {
  GatewayErrc code;
  std::string message;
  int attempts = 0;

  std::string describe() const {
    return std::string(to_string(code)) + ": " + message + " (attempts: " +
           std::to_string(attempts) + ")";
  }
};

// Where and how to reach a provider. The API key itself is never stored
// here, only the name of the environment variable that holds it.
struct ProviderConfig {
  ProviderKind kind = ProviderKind::kMock;
  std::string base_url;
  std::string chat_path = "/v1/chat/completions";
  std::string model = "mock";
  std::string api_key_ref = "PROVIDER_API_KEY";
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
  int max_output_tokens = 512;
  double temperature = 0.7;

  Expected<void, GatewayError> validate() const {
    auto bad = [](std::string message) {
      return make_unexpected(GatewayError{GatewayErrc::kConfig, std::move(message), 0});
    };
    if (timeout.count() <= 0) return bad("timeout must be positive");
    if (max_attempts < 1) return bad("max_attempts must be at least 1");
    if (max_output_tokens < 1) return bad("max_output_tokens must be at least 1");
    if (kind == ProviderKind::kMock) return {};
    if (model.empty()) return bad("model is required");
    if (api_key_ref.empty()) return bad("api_key_ref is required");
    if (chat_path.empty() || chat_path.front() != '/') {
      return bad("chat_path must start with '/'");
    }
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
      return bad("base_url must be an http(s) URL");
    }
    const auto scheme = base_url.substr(0, scheme_end);
    auto host = base_url.substr(scheme_end + 3);
    host = host.substr(0, host.find_first_of("/"));
    if (!host.empty() && host.front() == '[') {
      host = host.substr(0, host.find(']') + 1);
    } else {
      host = host.substr(0, host.find(':'));
    }
    const bool local =
        host == "localhost" || host == "127.0.0.1" || host == "[::1]";
    if (scheme == "https") return {};
    if (scheme == "http" && local) return {};
    if (scheme == "http") return bad("base_url must use https for non-local hosts");
    return bad("base_url must be an http(s) URL");
  }

  nlohmann::json to_json() const {
    return {{"kind", to_string(kind)},
            {"base_url", base_url},
            {"chat_path", chat_path},
            {"model", model},
            {"api_key_ref", api_key_ref},
            {"timeout_ms", timeout.count()},
            {"max_attempts", max_attempts},
            {"max_output_tokens", max_output_tokens},
            {"temperature", temperature}};
  }
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

// Reads PROVIDER_KIND, PROVIDER_BASE_URL, PROVIDER_MODEL, PROVIDER_API_KEY_REF,
// PROVIDER_CHAT_PATH, PROVIDER_TIMEOUT_MS, PROVIDER_MAX_ATTEMPTS,
// PROVIDER_MAX_TOKENS and PROVIDER_TEMPERATURE.
inline Expected<ProviderConfig, GatewayError> provider_config_from_env(
    const EnvLookup& env = process_env) {
  ProviderConfig cfg;
  auto bad = [](std::string message) {
    return make_unexpected(GatewayError{GatewayErrc::kConfig, std::move(message), 0});
  };
  if (auto v = env("PROVIDER_KIND")) {
    auto kind = parse_provider_kind(*v);
    if (!kind) return bad("PROVIDER_KIND must be 'mock' or 'openai'");
    cfg.kind = *kind;
  }
  if (cfg.kind == ProviderKind::kOpenAICompatible) {
    cfg.base_url = "https://api.openai.com";
    cfg.model = "gpt-3.5-turbo";
  }
  if (auto v = env("PROVIDER_BASE_URL")) cfg.base_url = *v;
  if (auto v = env("PROVIDER_CHAT_PATH")) cfg.chat_path = *v;
  if (auto v = env("PROVIDER_MODEL")) cfg.model = *v;
  if (auto v = env("PROVIDER_API_KEY_REF")) cfg.api_key_ref = *v;
  auto read_int = [&](const char* name, auto& out) -> bool {
    auto v = env(name);
    if (!v) return true;
    try {
      std::size_t used = 0;
      const long long parsed = std::stoll(*v, &used);
      if (used != v->size()) return false;
      out = static_cast<std::remove_reference_t<decltype(out)>>(parsed);
      return true;
    } catch (const std::exception&) {
      return false;
    }
  };
  long long timeout_ms = cfg.timeout.count();
  if (!read_int("PROVIDER_TIMEOUT_MS", timeout_ms)) {
    return bad("PROVIDER_TIMEOUT_MS must be an integer");
  }
  cfg.timeout = std::chrono::milliseconds(timeout_ms);
  if (!read_int("PROVIDER_MAX_ATTEMPTS", cfg.max_attempts)) {
    return bad("PROVIDER_MAX_ATTEMPTS must be an integer");
  }
  if (!read_int("PROVIDER_MAX_TOKENS", cfg.max_output_tokens)) {
    return bad("PROVIDER_MAX_TOKENS must be an integer");
  }
  if (auto v = env("PROVIDER_TEMPERATURE")) {
    try {
      cfg.temperature = std::stod(*v);
    } catch (const std::exception&) {
      return bad("PROVIDER_TEMPERATURE must be a number");
    }
  }
  if (auto ok = cfg.validate(); !ok) return make_unexpected(ok.error());
  return cfg;
}

struct CompletionResult {
  std::string text;
  int attempts = 1;
  std::chrono::milliseconds latency{0};
  ProviderKind provider = ProviderKind::kMock;
  std::string model;
};

// Deterministic stand-in for a model: "MOCK[<first 8 hex of sha256>]:" plus
// the prompt truncated to 2000 bytes.
inline CompletionResult mock_complete(std::string_view prompt,
                                      std::string model = "mock") {
  std::string text = "MOCK[" + sha256_hex(prompt).substr(0, 8) + "]:";
  text.append(prompt.substr(0, kMockEchoBytes));
  return {std::move(text), 1, std::chrono::milliseconds(0), ProviderKind::kMock,
          std::move(model)};
}

struct HttpRequest {
  std::string base_url;
  std::string path;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

enum class TransportFailure { kConnect, kTimeout, kTooLarge };

class Transport {
 public:
  virtual ~Transport() = default;

  // Performs one exchange. Implementations should give up once `timeout`
  // elapses or `stop` is requested; the gateway enforces the deadline either
  // way.
  virtual Expected<HttpResponse, TransportFailure> send(
      const HttpRequest& request, std::chrono::milliseconds timeout,
      std::stop_token stop) = 0;
};

// Full-jitter exponential backoff: the wait before retry n (1-based) is
// uniform in [0, min(cap, base * factor^(n-1))].
struct BackoffPolicy {
  std::chrono::milliseconds base{500};
  double factor = 2.0;
  std::chrono::milliseconds cap{30000};

  std::chrono::milliseconds ceiling(int retry) const {
    double ms = static_cast<double>(base.count());
    for (int i = 1; i < retry && ms < static_cast<double>(cap.count()); ++i) {
      ms *= factor;
    }
    return std::chrono::milliseconds(static_cast<std::int64_t>(
        std::min(ms, static_cast<double>(cap.count()))));
  }

  template <typename Rng>
  std::chrono::milliseconds delay(int retry, Rng& rng) const {
    std::uniform_int_distribution<std::int64_t> dist(0, ceiling(retry).count());
    return std::chrono::milliseconds(dist(rng));
  }
};

struct GatewayOptions {
  BackoffPolicy backoff;
  std::function<void(std::chrono::milliseconds)> sleep =
      [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  EnvLookup env = process_env;
  std::uint64_t jitter_seed = std::random_device{}();
};

class Gateway {
 public:
  Gateway(ProviderConfig config, std::shared_ptr<Transport> transport,
          GatewayOptions options = {})
      : config_(std::move(config)),
        transport_(std::move(transport)),
        options_(std::move(options)),
        rng_(options_.jitter_seed) {}

  const ProviderConfig& config() const { return config_; }

  // True when a completion could be attempted: the configuration is valid
  // and, for live providers, the key variable is set.
  bool ready() const {
    if (!config_.validate()) return false;
    if (config_.kind == ProviderKind::kMock) return true;
    return transport_ != nullptr && options_.env(config_.api_key_ref).has_value();
  }

  Expected<CompletionResult, GatewayError> complete(
      const ResolvedPrompt& prompt) const {
    return complete(std::string_view(prompt.text));
  }

  Expected<CompletionResult, GatewayError> complete(std::string_view prompt) const {
    if (auto ok = config_.validate(); !ok) return make_unexpected(ok.error());
    if (config_.kind == ProviderKind::kMock) {
      return mock_complete(prompt, config_.model);
    }
    if (prompt.empty()) {
      return make_unexpected(
          GatewayError{GatewayErrc::kInvalidPrompt, "prompt text is empty", 0});
    }
    if (prompt.size() > kMaxBodyBytes) {
      return make_unexpected(GatewayError{GatewayErrc::kInvalidPrompt,
                                          "prompt exceeds 1 MiB", 0});
    }
    if (transport_ == nullptr) {
      return make_unexpected(
          GatewayError{GatewayErrc::kConfig, "no transport configured", 0});
    }
    const auto key = options_.env(config_.api_key_ref);
    if (!key || key->empty()) {
      return make_unexpected(GatewayError{
          GatewayErrc::kConfig,
          "environment variable " + config_.api_key_ref + " is not set", 0});
    }

    HttpRequest request = build_request(prompt, *key);
    if (request.body.size() > kMaxBodyBytes) {
      return make_unexpected(GatewayError{GatewayErrc::kInvalidPrompt,
                                          "request body exceeds 1 MiB", 0});
    }

    GatewayError last{GatewayErrc::kProvider, "no attempt made", 0};
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      if (attempt > 1) options_.sleep(next_delay(attempt - 1));
      const auto started = std::chrono::steady_clock::now();
      auto outcome = attempt_once(request);
      const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);

      if (!outcome) {
        switch (outcome.error()) {
          case TransportFailure::kTimeout:
            last = {GatewayErrc::kTimeout,
                    "no response within " + std::to_string(config_.timeout.count()) +
                        " ms",
                    attempt};
            continue;
          case TransportFailure::kConnect:
            last = {GatewayErrc::kProvider, "could not reach provider", attempt};
            continue;
          case TransportFailure::kTooLarge:
            return make_unexpected(GatewayError{
                GatewayErrc::kProvider, "response body exceeds 1 MiB", attempt});
        }
      }
      const int status = outcome->status;
      if (status == 401 || status == 403) {
        return make_unexpected(GatewayError{
            GatewayErrc::kAuth,
            "provider rejected credentials (HTTP " + std::to_string(status) + ")",
            attempt});
      }
      if (status == 429) {
        last = {GatewayErrc::kRateLimited, "provider rate limit (HTTP 429)", attempt};
        continue;
      }
      if (status >= 500) {
        last = {GatewayErrc::kProvider,
                "provider unavailable (HTTP " + std::to_string(status) + ")", attempt};
        continue;
      }
      if (status < 200 || status >= 300) {
        return make_unexpected(GatewayError{
            GatewayErrc::kProvider,
            "provider returned HTTP " + std::to_string(status), attempt});
      }
      if (outcome->body.size() > kMaxBodyBytes) {
        return make_unexpected(GatewayError{
            GatewayErrc::kProvider, "response body exceeds 1 MiB", attempt});
      }
      auto text = parse_response(outcome->body);
      if (!text) {
        return make_unexpected(
            GatewayError{GatewayErrc::kProvider, text.error(), attempt});
      }
      return CompletionResult{std::move(*text), attempt, latency,
                              config_.kind, config_.model};
    }
    last.message += " after " + std::to_string(config_.max_attempts) + " attempts";
    return make_unexpected(std::move(last));
  }

  // The zero-shot chat request: one user message, no system or example
  // turns.
  HttpRequest build_request(std::string_view prompt, const std::string& key) const {
    nlohmann::json body{
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"max_tokens", config_.max_output_tokens},
        {"temperature", config_.temperature}};
    return {config_.base_url,
            config_.chat_path,
            {{"Authorization", "Bearer " + key}, {"Content-Type", "application/json"}},
            body.dump()};
  }

  static Expected<std::string, std::string> parse_response(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      const auto& content = j.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) return make_unexpected(std::string("content is not a string"));
      return content.get<std::string>();
    } catch (const nlohmann::json::exception&) {
      return make_unexpected(std::string("malformed chat-completions response"));
    }
  }

 private:
  std::chrono::milliseconds next_delay(int retry) const {
    std::lock_guard lock(rng_mu_);
    return options_.backoff.delay(retry, rng_);
  }

  // Runs one exchange on a worker thread and waits at most the configured
  // timeout for it.
  Expected<HttpResponse, TransportFailure> attempt_once(const HttpRequest& request) const {
    using Outcome = Expected<HttpResponse, TransportFailure>;
    auto promise = std::make_shared<std::promise<Outcome>>();
    auto future = promise->get_future();
    std::stop_source stop;
    std::thread([transport = transport_, request, timeout = config_.timeout,
                 token = stop.get_token(), promise]() mutable {
      try {
        promise->set_value(transport->send(request, timeout, token));
      } catch (...) {
        promise->set_value(make_unexpected(TransportFailure::kConnect));
      }
    }).detach();
    if (future.wait_for(config_.timeout) != std::future_status::ready) {
      stop.request_stop();
      return make_unexpected(TransportFailure::kTimeout);
    }
    return future.get();
  }

  ProviderConfig config_;
  std::shared_ptr<Transport> transport_;
  GatewayOptions options_;
  mutable std::mutex rng_mu_;
  mutable std::mt19937_64 rng_;
};

}  // namespace promptmw

#endif  // PROMPTMW_GATEWAY_HPP_
