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

// Static, template-based and free-form prompt resolution behind one
// dispatcher.

#ifndef PROMPTMW_MIDDLEWARE_HPP_
#define PROMPTMW_MIDDLEWARE_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "promptmw/expected.hpp"
#include "promptmw/template_engine.hpp"

namespace promptmw {

enum class MiddlewareErrc {
  kBadId,
  kEmptyBody,
  kDuplicateId,
  kUnknownStatic,
  kUnknownTemplate,
  kValidation,
  kSchemaMismatch,
};

inline std::string_view to_string(MiddlewareErrc code) {
  switch (code) {
    case MiddlewareErrc::kBadId: return "E_BAD_ID";
    case MiddlewareErrc::kEmptyBody: return "E_EMPTY_BODY";
    case MiddlewareErrc::kDuplicateId: return "E_DUPLICATE_ID";
    case MiddlewareErrc::kUnknownStatic: return "E_UNKNOWN_STATIC";
    case MiddlewareErrc::kUnknownTemplate: return "E_UNKNOWN_TEMPLATE";
    case MiddlewareErrc::kValidation: return "E_VALIDATION";
    case MiddlewareErrc::kSchemaMismatch: return "E_SCHEMA_MISMATCH";
  }
  return "E_UNKNOWN";
}

struct MiddlewareError {
  MiddlewareErrc code;
  std::string id;
  ValidationReport report;  // kValidation only

  std::string describe() const {
    std::string out(to_string(code));
    if (!id.empty()) out += " '" + id + "'";
    if (!report.empty()) out += "\n" + report.describe();
    return out;
  }
};

// An expert-authored prompt bound to one UI control.
class StaticPrompt {
 public:
  static Expected<StaticPrompt, MiddlewareError> make(std::string id,
                                                      std::string label,
                                                      std::string body) {
    if (id.empty()) return make_unexpected(MiddlewareError{MiddlewareErrc::kBadId, id, {}});
    if (body.empty()) {
      return make_unexpected(MiddlewareError{MiddlewareErrc::kEmptyBody, id, {}});
    }
    StaticPrompt p;
    p.id_ = std::move(id);
    p.label_ = std::move(label);
    p.body_ = std::move(body);
    return p;
  }

  const std::string& id() const { return id_; }
  const std::string& label() const { return label_; }
  const std::string& body() const { return body_; }

 private:
  StaticPrompt() = default;

  std::string id_;
  std::string label_;
  std::string body_;
};

struct TemplateEntry {
  Template tmpl;
  OptionSchema schema;
};

// Immutable id -> value map. Registration returns a new registry and leaves
// the original untouched.
template <typename Value>
class Registry {
 public:
  Registry() : entries_(std::make_shared<const Map>()) {}

  const Value* find(const std::string& id) const {
    auto it = entries_->find(id);
    return it == entries_->end() ? nullptr : &it->second;
  }
  std::size_t size() const { return entries_->size(); }
  bool empty() const { return entries_->empty(); }
  auto begin() const { return entries_->begin(); }
  auto end() const { return entries_->end(); }

  Expected<Registry, MiddlewareError> with(std::string id, Value value) const {
    if (entries_->count(id)) {
      return make_unexpected(
          MiddlewareError{MiddlewareErrc::kDuplicateId, std::move(id), {}});
    }
    auto next = std::make_shared<Map>(*entries_);
    next->emplace(std::move(id), std::move(value));
    Registry r;
    r.entries_ = std::move(next);
    return r;
  }

 private:
  using Map = std::map<std::string, Value>;
  std::shared_ptr<const Map> entries_;
};

using StaticRegistry = Registry<StaticPrompt>;
using TemplateRegistry = Registry<TemplateEntry>;

inline Expected<StaticRegistry, MiddlewareError> register_static(
    const StaticRegistry& registry, StaticPrompt prompt) {
  std::string id = prompt.id();
  return registry.with(std::move(id), std::move(prompt));
}

inline Expected<TemplateRegistry, MiddlewareError> register_template(
    const TemplateRegistry& registry, TemplateEntry entry) {
  if (entry.schema.template_id() != entry.tmpl.id()) {
    return make_unexpected(MiddlewareError{MiddlewareErrc::kSchemaMismatch,
                                           entry.tmpl.id(), {}});
  }
  std::string id = entry.tmpl.id();
  return registry.with(std::move(id), std::move(entry));
}

struct Registries {
  StaticRegistry statics;
  TemplateRegistry templates;
};

enum class PromptMode { kStatic, kTemplate, kFreeForm };

inline std::string_view to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::kStatic: return "static";
    case PromptMode::kTemplate: return "template";
    case PromptMode::kFreeForm: return "freeform";
  }
  return "unknown";
}

inline std::optional<PromptMode> parse_prompt_mode(std::string_view text) {
  if (text == "static") return PromptMode::kStatic;
  if (text == "template") return PromptMode::kTemplate;
  if (text == "freeform") return PromptMode::kFreeForm;
  return std::nullopt;
}

struct StaticRequest {
  std::string static_id;
  // When set, appended after the body, separated by a blank line, so a
  // button can act on the user's text.
  std::optional<std::string> input;
};

struct TemplateRequest {
  std::string template_id;
  Selection selection;
};

struct FreeFormRequest {
  std::string text;
};

using PromptRequest = std::variant<StaticRequest, TemplateRequest, FreeFormRequest>;

inline PromptMode mode_of(const PromptRequest& request) {
  return static_cast<PromptMode>(request.index());
}

inline constexpr std::string_view kStaticInputSeparator = "\n\n";

struct Provenance {
  PromptMode mode = PromptMode::kFreeForm;
  std::string source_id;               // static or template id
  std::int64_t template_version = 0;   // template mode only

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ResolvedPrompt {
  std::string text;
  Provenance provenance;

  friend bool operator==(const ResolvedPrompt&, const ResolvedPrompt&) = default;
};

inline Expected<ResolvedPrompt, MiddlewareError> resolve(
    const Registries& registries, const PromptRequest& request) {
  struct Visitor {
    const Registries& reg;

    Expected<ResolvedPrompt, MiddlewareError> operator()(
        const StaticRequest& r) const {
      const StaticPrompt* prompt = reg.statics.find(r.static_id);
      if (prompt == nullptr) {
        return make_unexpected(
            MiddlewareError{MiddlewareErrc::kUnknownStatic, r.static_id, {}});
      }
      std::string text = prompt->body();
      if (r.input) text.append(kStaticInputSeparator).append(*r.input);
      return ResolvedPrompt{std::move(text),
                            {PromptMode::kStatic, prompt->id(), 0}};
    }

    Expected<ResolvedPrompt, MiddlewareError> operator()(
        const TemplateRequest& r) const {
      const TemplateEntry* entry = reg.templates.find(r.template_id);
      if (entry == nullptr) {
        return make_unexpected(MiddlewareError{MiddlewareErrc::kUnknownTemplate,
                                               r.template_id, {}});
      }
      auto text = render(entry->tmpl, entry->schema, r.selection);
      if (!text) {
        return make_unexpected(MiddlewareError{
            MiddlewareErrc::kValidation, r.template_id, std::move(text.error())});
      }
      return ResolvedPrompt{
          std::move(*text),
          {PromptMode::kTemplate, entry->tmpl.id(), entry->tmpl.version()}};
    }

    Expected<ResolvedPrompt, MiddlewareError> operator()(
        const FreeFormRequest& r) const {
      return ResolvedPrompt{r.text, {PromptMode::kFreeForm, {}, 0}};
    }
  };
  return std::visit(Visitor{registries}, request);
}

// Holds the current snapshot of some immutable state. Readers always get a
// complete snapshot; replacement is a single pointer swap.
template <typename T>
class SnapshotHolder {
 public:
  std::shared_ptr<const T> load() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  void store(std::shared_ptr<const T> next) {
    std::lock_guard lock(mu_);
    current_.swap(next);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const T> current_;
};

}  // namespace promptmw

#endif  // PROMPTMW_MIDDLEWARE_HPP_
