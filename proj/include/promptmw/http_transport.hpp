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

#ifndef PROMPTMW_HTTP_TRANSPORT_HPP_
#define PROMPTMW_HTTP_TRANSPORT_HPP_

#include <chrono>
#include <memory>
#include <stop_token>
#include <string>

#include "httplib.h"
#include "promptmw/gateway.hpp"

namespace promptmw {

// Transport over cpp-httplib. A fresh client per exchange keeps calls
// independent across threads.
class HttpTransport : public Transport {
 public:
  Expected<HttpResponse, TransportFailure> send(const HttpRequest& request,
                                                std::chrono::milliseconds timeout,
                                                std::stop_token stop) override {
    httplib::Client client(request.base_url);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Request req;
    req.method = "POST";
    req.path = base_path(request.base_url) + request.path;
    for (const auto& [name, value] : request.headers) req.set_header(name, value);
    req.body = request.body;

    std::string body;
    bool too_large = false;
    req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t,
                               std::uint64_t) {
      if (stop.stop_requested()) return false;
      if (body.size() + len > kMaxBodyBytes) {
        too_large = true;
        return false;
      }
      body.append(data, len);
      return true;
    };

    auto result = client.send(req);
    if (too_large) return make_unexpected(TransportFailure::kTooLarge);
    if (!result) {
      return make_unexpected(result.error() == httplib::Error::Read ||
                                     result.error() == httplib::Error::Write ||
                                     result.error() == httplib::Error::ConnectionTimeout
                                 ? TransportFailure::kTimeout
                                 : TransportFailure::kConnect);
    }
    return HttpResponse{result->status, std::move(body)};
  }

 private:
  // Any path component of the base URL, e.g. "https://host/proxy" -> "/proxy".
  static std::string base_path(const std::string& url) {
    const auto scheme = url.find("://");
    const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash == std::string::npos) return {};
    std::string path = url.substr(slash);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return path;
  }
};

// A gateway for `config` that talks HTTP. PROVIDER_BACKOFF_BASE_MS, when
// set, overrides the default 500 ms backoff base.
inline std::shared_ptr<Gateway> make_gateway(const ProviderConfig& config,
                                             const EnvLookup& env = process_env) {
  GatewayOptions options;
  options.env = env;
  if (auto v = env("PROVIDER_BACKOFF_BASE_MS")) {
    try {
      options.backoff.base = std::chrono::milliseconds(std::stoll(*v));
    } catch (const std::exception&) {
      // keep the default
    }
  }
  return std::make_shared<Gateway>(config, std::make_shared<HttpTransport>(),
                                   std::move(options));
}

}  // namespace promptmw

#endif  // PROMPTMW_HTTP_TRANSPORT_HPP_
