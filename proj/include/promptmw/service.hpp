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

// HTTP/JSON service around the middleware: option menus, prompt previews
// and feedback completions over a file-backed registry.
//
//   GET  /api/templates   every template with its full slot specs
//   POST /api/preview     resolve a request without calling a provider
//   POST /api/feedback    resolve, complete, and log a request
//   POST /api/reload      re-read the pack directory and swap it in
//   GET  /api/health      liveness plus pack/provider status

#ifndef PROMPTMW_SERVICE_HPP_
#define PROMPTMW_SERVICE_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <random>
#include <semaphore>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "promptmw/expected.hpp"
#include "promptmw/gateway.hpp"
#include "promptmw/middleware.hpp"
#include "promptmw/pack.hpp"

namespace promptmw {

using Json = nlohmann::json;
using LogSink = std::function<void(std::string_view)>;

struct ServiceConfig {
  std::filesystem::path pack_dir = "data/packs";
  std::string bind_host = "127.0.0.1";
  int bind_port = 8080;
  std::string ui_origin;  // CORS allow-origin; empty disables CORS headers
  std::filesystem::path history_log = "promptmw-history.jsonl";
  bool log_bodies = false;
  int max_in_flight = 32;
  ProviderConfig provider;
};

// Reads PACK_DIR, BIND_ADDR (host:port), UI_ORIGIN, HISTORY_LOG, LOG_BODIES,
// MAX_IN_FLIGHT and the PROVIDER_* variables.
inline Expected<ServiceConfig, GatewayError> service_config_from_env(
    const EnvLookup& env = process_env) {
  ServiceConfig cfg;
  auto bad = [](std::string message) {
    return make_unexpected(GatewayError{GatewayErrc::kConfig, std::move(message), 0});
  };
  if (auto v = env("PACK_DIR")) cfg.pack_dir = *v;
  if (auto v = env("BIND_ADDR")) {
    const auto colon = v->rfind(':');
    if (colon == std::string::npos) return bad("BIND_ADDR must be host:port");
    cfg.bind_host = v->substr(0, colon);
    try {
      cfg.bind_port = std::stoi(v->substr(colon + 1));
    } catch (const std::exception&) {
      return bad("BIND_ADDR port must be an integer");
    }
  }
  if (auto v = env("UI_ORIGIN")) cfg.ui_origin = *v;
  if (auto v = env("HISTORY_LOG")) cfg.history_log = *v;
  if (auto v = env("LOG_BODIES")) cfg.log_bodies = (*v == "true" || *v == "1");
  if (auto v = env("MAX_IN_FLIGHT")) {
    try {
      cfg.max_in_flight = std::stoi(*v);
    } catch (const std::exception&) {
      return bad("MAX_IN_FLIGHT must be an integer");
    }
    if (cfg.max_in_flight < 1) return bad("MAX_IN_FLIGHT must be at least 1");
  }
  auto provider = provider_config_from_env(env);
  if (!provider) return make_unexpected(provider.error());
  cfg.provider = *provider;
  return cfg;
}

struct RegistrySnapshot {
  Registries registries;
  std::chrono::system_clock::time_point loaded_at;
  std::int64_t pack_version = 0;
};

enum class JobState { kPending, kDone, kFailed };

inline std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::kPending: return "pending";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "unknown";
}

struct FeedbackJob {
  std::string job_id;
  PromptRequest request;
  ResolvedPrompt resolved;
  std::variant<std::monostate, CompletionResult, GatewayError> result;
  JobState state = JobState::kPending;
};

// Appends one JSON object per line. Writes are serialized.
class HistoryLog {
 public:
  explicit HistoryLog(std::filesystem::path path) : path_(std::move(path)) {}

  bool append(const Json& entry) {
    if (path_.empty()) return true;
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) return false;
    out << entry.dump() << '\n';
    return static_cast<bool>(out);
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

// What an endpoint answers, independent of the HTTP library.
struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

inline Json provenance_to_json(const Provenance& p) {
  Json j{{"mode", to_string(p.mode)}};
  j["source_id"] = p.source_id.empty() ? Json(nullptr) : Json(p.source_id);
  j["template_version"] =
      p.mode == PromptMode::kTemplate ? Json(p.template_version) : Json(nullptr);
  return j;
}

inline Json resolved_to_json(const ResolvedPrompt& r) {
  return {{"text", r.text}, {"provenance", provenance_to_json(r.provenance)}};
}

inline Json validation_report_to_json(const ValidationReport& report) {
  Json issues = Json::array();
  for (const auto& issue : report.issues) {
    Json j{{"code", to_string(issue.code)}, {"slot", issue.slot}};
    if (issue.code == ValidationErrc::kIllegalValue) j["value"] = issue.value;
    issues.push_back(std::move(j));
  }
  return issues;
}

inline Json request_to_json(const PromptRequest& request) {
  return std::visit(
      [](const auto& r) -> Json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, StaticRequest>) {
          Json j{{"mode", "static"}, {"static_id", r.static_id}};
          if (r.input) j["input"] = *r.input;
          return j;
        } else if constexpr (std::is_same_v<T, TemplateRequest>) {
          Json sel = Json::object();
          for (const auto& [k, v] : r.selection.bindings()) sel[k] = v;
          return {{"mode", "template"}, {"template_id", r.template_id}, {"selection", sel}};
        } else {
          return {{"mode", "freeform"}, {"freeform_text", r.text}};
        }
      },
      request);
}

struct RequestError {
  std::string code;
  std::string message;
};

// Wire form:
//   {"mode": "static",   "static_id": "...", "input": "..."?}
//   {"mode": "template", "template_id": "...", "selection": {"slot": "value"}}
//   {"mode": "freeform", "freeform_text": "..."}
inline Expected<PromptRequest, RequestError> parse_prompt_request(const Json& j) {
  auto bad = [](std::string message) {
    return make_unexpected(RequestError{"E_BAD_REQUEST", std::move(message)});
  };
  if (!j.is_object()) return bad("request body must be a JSON object");
  auto mode_it = j.find("mode");
  if (mode_it == j.end() || !mode_it->is_string()) return bad("'mode' is required");
  auto mode = parse_prompt_mode(mode_it->get<std::string>());
  if (!mode) return bad("'mode' must be static, template or freeform");

  auto string_field = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
  };
  auto has = [&](const char* key) { return j.contains(key); };

  switch (*mode) {
    case PromptMode::kStatic: {
      if (has("template_id") || has("selection") || has("freeform_text")) {
        return bad("static requests carry only static_id and input");
      }
      auto id = string_field("static_id");
      if (!id) return bad("'static_id' is required");
      StaticRequest r{*id, std::nullopt};
      if (has("input")) {
        auto input = string_field("input");
        if (!input) return bad("'input' must be a string");
        r.input = *input;
      }
      return PromptRequest{std::move(r)};
    }
    case PromptMode::kTemplate: {
      if (has("static_id") || has("freeform_text") || has("input")) {
        return bad("template requests carry only template_id and selection");
      }
      auto id = string_field("template_id");
      if (!id) return bad("'template_id' is required");
      TemplateRequest r{*id, {}};
      auto sel = j.find("selection");
      if (sel != j.end()) {
        if (!sel->is_object()) return bad("'selection' must be an object");
        for (const auto& [k, v] : sel->items()) {
          if (!v.is_string()) return bad("selection value for '" + k + "' must be a string");
          if (!r.selection.bind(k, v.get<std::string>())) {
            return bad("'" + k + "' is not a valid slot name");
          }
        }
      }
      return PromptRequest{std::move(r)};
    }
    case PromptMode::kFreeForm: {
      if (has("static_id") || has("template_id") || has("selection") || has("input")) {
        return bad("freeform requests carry only freeform_text");
      }
      auto text = string_field("freeform_text");
      if (!text) return bad("'freeform_text' is required");
      return PromptRequest{FreeFormRequest{*text}};
    }
  }
  return bad("unreachable");
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const auto secs = std::chrono::system_clock::to_time_t(t);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      t.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3)
     << std::setfill('0') << ms << 'Z';
  return ss.str();
}

class Service {
 public:
  Service(ServiceConfig config, std::shared_ptr<const Gateway> gateway,
          LogSink log = [](std::string_view line) {
            std::fprintf(stderr, "%.*s\n", static_cast<int>(line.size()), line.data());
          })
      : config_(std::move(config)),
        gateway_(std::move(gateway)),
        log_(std::move(log)),
        history_(config_.history_log),
        slots_(std::max(1, config_.max_in_flight)),
        job_rng_(std::random_device{}()) {}

  const ServiceConfig& config() const { return config_; }
  std::shared_ptr<const RegistrySnapshot> snapshot() const { return snapshot_.load(); }

  // Loads the pack directory. On success the new snapshot replaces the old
  // one in a single swap; an empty directory clears it. On failure the
  // current snapshot stays in place.
  Expected<void, PackError> reload() {
    auto set = load_pack_dir(config_.pack_dir);
    if (!set) {
      log("pack reload failed: " + std::to_string(set.error().diagnostics.size()) +
          " problem(s)");
      return make_unexpected(std::move(set.error()));
    }
    if (set->empty()) {
      snapshot_.store(nullptr);
      log("pack directory " + config_.pack_dir.string() + " holds no packs");
      return {};
    }
    auto snap = std::make_shared<RegistrySnapshot>();
    snap->registries = std::move(set->registries);
    snap->pack_version = set->pack_version;
    snap->loaded_at = std::chrono::system_clock::now();
    log("loaded " + std::to_string(snap->registries.templates.size()) +
        " template(s), " + std::to_string(snap->registries.statics.size()) +
        " static prompt(s), pack version " + std::to_string(snap->pack_version));
    snapshot_.store(std::move(snap));
    return {};
  }

  // Installs a snapshot directly, bypassing the pack directory.
  void install(std::shared_ptr<const RegistrySnapshot> snap) {
    snapshot_.store(std::move(snap));
  }

  ApiResponse get_templates() const {
    auto snap = snapshot();
    if (!snap) return error(503, "E_NO_REGISTRY", "no packs are loaded");
    Json list = Json::array();
    for (const auto& [id, entry] : snap->registries.templates) {
      Json slots = Json::array();
      for (const auto& spec : entry.schema.slots()) slots.push_back(slot_spec_to_json(spec));
      if (entry.tmpl.has_slot(kInputSlot)) {
        auto input = slot_spec_to_json(OptionSchema::input_spec());
        input["reserved"] = true;
        slots.push_back(std::move(input));
      }
      list.push_back({{"id", id},
                      {"name", entry.tmpl.name()},
                      {"version", entry.tmpl.version()},
                      {"slots", std::move(slots)}});
    }
    Json statics = Json::array();
    for (const auto& [id, prompt] : snap->registries.statics) {
      statics.push_back({{"id", id}, {"label", prompt.label()}});
    }
    return json_response(200, {{"pack_version", snap->pack_version},
                               {"templates", std::move(list)},
                               {"statics", std::move(statics)}});
  }

  ApiResponse preview(std::string_view body, bool plain_text = false) const {
    auto resolved = resolve_body(body);
    if (!resolved) return std::move(resolved.error());
    if (plain_text) return {200, "text/plain; charset=utf-8", resolved->second.text};
    return json_response(200, resolved_to_json(resolved->second));
  }

  ApiResponse feedback(std::string_view body) {
    auto resolved = resolve_body(body);
    if (!resolved) return std::move(resolved.error());

    FeedbackJob job{new_job_id(), std::move(resolved->first),
                    std::move(resolved->second), std::monostate{}, JobState::kPending};
    {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{slots_};
      auto outcome = gateway_->complete(job.resolved);
      if (outcome) {
        job.result = std::move(*outcome);
        job.state = JobState::kDone;
      } else {
        job.result = std::move(outcome.error());
        job.state = JobState::kFailed;
      }
    }
    record(job);

    Json out{{"job", job_to_json(job)}};
    if (job.state == JobState::kDone) return json_response(200, out);
    const auto& err = std::get<GatewayError>(job.result);
    out["error"] = {{"code", to_string(err.code)}, {"message", err.message}};
    return json_response(err.code == GatewayErrc::kTimeout ? 504 : 502, out);
  }

  ApiResponse health() const {
    auto snap = snapshot();
    const bool ok = snap != nullptr && gateway_->ready();
    return json_response(
        200, {{"status", ok ? "ok" : "degraded"},
              {"pack_version", snap ? Json(snap->pack_version) : Json(nullptr)},
              {"provider_kind", to_string(gateway_->config().kind)}});
  }

  ApiResponse reload_endpoint() {
    auto result = reload();
    if (!result) {
      Json diags = Json::array();
      for (const auto& d : result.error().diagnostics) {
        diags.push_back({{"file", d.file}, {"path", d.path}, {"code", d.code},
                         {"message", d.message}});
      }
      return json_response(422, {{"error",
                                  {{"code", PackError::code()},
                                   {"message", "pack directory failed to load"},
                                   {"diagnostics", std::move(diags)}}}});
    }
    auto snap = snapshot();
    return json_response(200, {{"pack_version", snap ? Json(snap->pack_version) : Json(nullptr)},
                               {"loaded", snap != nullptr}});
  }

  // Registers every route on an httplib server.
  void mount(httplib::Server& server) {
    server.set_payload_max_length(4 * kMaxBodyBytes);
    auto send = [this](httplib::Response& res, const ApiResponse& api) {
      res.status = api.status;
      res.set_content(api.body, api.content_type);
      if (!config_.ui_origin.empty()) {
        res.set_header("Access-Control-Allow-Origin", config_.ui_origin);
        res.set_header("Vary", "Origin");
      }
    };
    server.Get("/api/templates", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, get_templates());
    });
    server.Post("/api/preview", [this, send](const httplib::Request& req, httplib::Response& res) {
      const bool text = req.get_param_value("format") == "text" ||
                        req.get_header_value("Accept") == "text/plain";
      send(res, preview(req.body, text));
    });
    server.Post("/api/feedback", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, feedback(req.body));
    });
    server.Post("/api/reload", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, reload_endpoint());
    });
    server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, health());
    });
    server.Options(R"(/api/.*)", [this](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
      if (!config_.ui_origin.empty()) {
        res.set_header("Access-Control-Allow-Origin", config_.ui_origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, Accept");
      }
    });
  }

  // Blocks serving on the configured address.
  bool run() {
    httplib::Server server;
    mount(server);
    log("listening on " + config_.bind_host + ":" + std::to_string(config_.bind_port));
    return server.listen(config_.bind_host, config_.bind_port);
  }

 private:
  using Resolved = std::pair<PromptRequest, ResolvedPrompt>;

  static ApiResponse json_response(int status, const Json& body) {
    return {status, "application/json", body.dump()};
  }

  static ApiResponse error(int status, std::string_view code, std::string message,
                           Json extra = Json::object()) {
    Json err{{"code", code}, {"message", std::move(message)}};
    for (auto& [k, v] : extra.items()) err[k] = v;
    return json_response(status, {{"error", std::move(err)}});
  }

  Expected<Resolved, ApiResponse> resolve_body(std::string_view body) const {
    auto snap = snapshot();
    if (!snap) return make_unexpected(error(503, "E_NO_REGISTRY", "no packs are loaded"));
    Json j = Json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      return make_unexpected(error(400, "E_BAD_REQUEST", "body is not valid JSON"));
    }
    auto request = parse_prompt_request(j);
    if (!request) {
      return make_unexpected(error(400, request.error().code, request.error().message));
    }
    auto resolved = resolve(snap->registries, *request);
    if (!resolved) {
      const auto& e = resolved.error();
      switch (e.code) {
        case MiddlewareErrc::kUnknownStatic:
        case MiddlewareErrc::kUnknownTemplate:
          return make_unexpected(error(404, to_string(e.code),
                                       "no prompt source with id '" + e.id + "'",
                                       {{"id", e.id}}));
        case MiddlewareErrc::kValidation:
          return make_unexpected(error(422, to_string(e.code),
                                       "selection does not satisfy the option schema",
                                       {{"issues", validation_report_to_json(e.report)}}));
        default:
          return make_unexpected(error(400, to_string(e.code), e.describe()));
      }
    }
    return Resolved{std::move(*request), std::move(*resolved)};
  }

  Json job_to_json(const FeedbackJob& job) const {
    Json j{{"job_id", job.job_id},
           {"state", to_string(job.state)},
           {"request", request_to_json(job.request)},
           {"resolved", resolved_to_json(job.resolved)}};
    if (const auto* r = std::get_if<CompletionResult>(&job.result)) {
      j["result"] = {{"text", r->text},
                     {"attempts", r->attempts},
                     {"latency_ms", r->latency.count()},
                     {"provider", to_string(r->provider)},
                     {"model", r->model}};
    } else if (const auto* e = std::get_if<GatewayError>(&job.result)) {
      j["result"] = nullptr;
      j["error"] = {{"code", to_string(e->code)},
                    {"message", e->message},
                    {"attempts", e->attempts}};
    }
    return j;
  }

  void record(const FeedbackJob& job) {
    Json entry{{"timestamp", utc_timestamp(std::chrono::system_clock::now())},
               {"job_id", job.job_id},
               {"mode", to_string(job.resolved.provenance.mode)},
               {"provenance", provenance_to_json(job.resolved.provenance)},
               {"state", to_string(job.state)}};
    if (const auto* e = std::get_if<GatewayError>(&job.result)) {
      entry["error_code"] = to_string(e->code);
    }
    if (config_.log_bodies) {
      entry["prompt"] = job.resolved.text;
      if (const auto* r = std::get_if<CompletionResult>(&job.result)) {
        entry["response"] = r->text;
      }
    }
    if (!history_.append(entry)) {
      log("could not append to history log " + history_.path().string());
    }
    std::string line = "job " + job.job_id + " " + std::string(to_string(job.state)) +
                       " mode=" + std::string(to_string(job.resolved.provenance.mode));
    if (const auto* e = std::get_if<GatewayError>(&job.result)) {
      line += " error=" + e->describe();
    }
    log(line);
  }

  std::string new_job_id() {
    std::uint64_t r;
    {
      std::lock_guard lock(job_mu_);
      r = job_rng_();
    }
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << r << '-'
       << job_counter_.fetch_add(1);
    return ss.str();
  }

  void log(const std::string& line) const {
    if (log_) log_(line);
  }

  ServiceConfig config_;
  std::shared_ptr<const Gateway> gateway_;
  LogSink log_;
  SnapshotHolder<RegistrySnapshot> snapshot_;
  HistoryLog history_;
  std::counting_semaphore<> slots_;
  std::mutex job_mu_;
  std::mt19937_64 job_rng_;
  std::atomic<std::uint64_t> job_counter_{0};
};

}  // namespace promptmw

#endif  // PROMPTMW_SERVICE_HPP_
