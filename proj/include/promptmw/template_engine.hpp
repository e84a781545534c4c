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

// Slot-based prompt templates.
//
// Grammar:
//   {{name}}   a slot; name matches [a-z][a-z0-9_]*
//   \{{        a literal "{{"
//
// Backslashes are only special in a run that directly precedes "{{": a run
// of n backslashes yields n/2 literal backslashes, and an odd run escapes the
// brace pair. A run of k >= 2 opening braces opens a slot with its last two
// braces; the first k-2 are literal. Everything else is copied byte-exact.

#ifndef PROMPTMW_TEMPLATE_ENGINE_HPP_
#define PROMPTMW_TEMPLATE_ENGINE_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptmw/expected.hpp"

namespace promptmw {

inline constexpr std::size_t kMaxTemplateBytes = std::size_t{1} << 20;
inline constexpr std::size_t kMaxValueBytes = std::size_t{1} << 20;

// Every schema implicitly carries this free-text slot for the user's text.
inline constexpr std::string_view kInputSlot = "input";

inline bool is_valid_slot_name(std::string_view name) {
  if (name.empty() || name.front() < 'a' || name.front() > 'z') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

// Returns the offset of the first byte that is not part of a well-formed
// UTF-8 sequence, or nullopt when the whole text is valid.
inline std::optional<std::size_t> find_invalid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    std::uint32_t min_cp = 0;
    std::uint32_t cp = 0;
    if (lead < 0x80) {
      ++i;
      continue;
    } else if ((lead & 0xE0) == 0xC0) {
      len = 2, min_cp = 0x80, cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      len = 3, min_cp = 0x800, cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      len = 4, min_cp = 0x10000, cp = lead & 0x07;
    } else {
      return i;
    }
    if (i + len > text.size()) return i;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cont = static_cast<unsigned char>(text[i + k]);
      if ((cont & 0xC0) != 0x80) return i;
      cp = (cp << 6) | (cont & 0x3F);
    }
    if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return i;
    }
    i += len;
  }
  return std::nullopt;
}

struct Segment {
  enum class Kind { kLiteral, kSlot };

  Kind kind = Kind::kLiteral;
  std::string text;       // kLiteral only
  std::string slot_name;  // kSlot only

  static Segment literal(std::string text) {
    return {Kind::kLiteral, std::move(text), {}};
  }
  static Segment slot(std::string name) {
    return {Kind::kSlot, {}, std::move(name)};
  }

  bool is_slot() const { return kind == Kind::kSlot; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct TemplateInfo {
  std::string id;
  std::string name;
  std::int64_t version = 1;
};

enum class ParseErrc {
  kUnclosedSlot,
  kBadSlotName,
  kEmptySlot,
  kInvalidUtf8,
  kTooLarge,
};

inline std::string_view to_string(ParseErrc code) {
  switch (code) {
    case ParseErrc::kUnclosedSlot: return "E_UNCLOSED_SLOT";
    case ParseErrc::kBadSlotName: return "E_BAD_SLOT_NAME";
    case ParseErrc::kEmptySlot: return "E_EMPTY_SLOT";
    case ParseErrc::kInvalidUtf8: return "E_INVALID_UTF8";
    case ParseErrc::kTooLarge: return "E_TOO_LARGE";
  }
  return "E_UNKNOWN";
}

struct ParseError {
  ParseErrc code;
  std::size_t offset = 0;  // byte offset into the source
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based, in bytes
  std::string message;

  std::string describe() const {
    return std::string(to_string(code)) + " at " + std::to_string(line) +
           ":" + std::to_string(column) + " (offset " +
           std::to_string(offset) + "): " + message;
  }
};

class Template {
 public:
  Template() = default;

  // Builds a template from raw segments: adjacent literals are merged and
  // empty literals dropped. Fails on an invalid slot name.
  static Expected<Template, ParseError> from_segments(
      std::vector<Segment> segments, TemplateInfo info = {}) {
    Template t;
    t.info_ = std::move(info);
    for (auto& seg : segments) {
      if (seg.is_slot()) {
        if (!is_valid_slot_name(seg.slot_name)) {
          return make_unexpected(ParseError{ParseErrc::kBadSlotName, 0, 1, 1,
                                            "invalid slot name '" +
                                                seg.slot_name + "'"});
        }
        t.segments_.push_back(Segment::slot(std::move(seg.slot_name)));
      } else {
        t.append_literal(seg.text);
      }
    }
    return t;
  }

  const std::string& id() const { return info_.id; }
  const std::string& name() const { return info_.name; }
  std::int64_t version() const { return info_.version; }
  const TemplateInfo& info() const { return info_; }
  const std::vector<Segment>& segments() const { return segments_; }

  Template with_info(TemplateInfo info) const {
    Template t = *this;
    t.info_ = std::move(info);
    return t;
  }

  // Distinct slot names in order of first occurrence.
  std::vector<std::string> slot_names() const {
    std::vector<std::string> names;
    for (const auto& seg : segments_) {
      if (seg.is_slot() && std::find(names.begin(), names.end(),
                                     seg.slot_name) == names.end()) {
        names.push_back(seg.slot_name);
      }
    }
    return names;
  }

  bool has_slot(std::string_view name) const {
    return std::any_of(segments_.begin(), segments_.end(), [&](const auto& s) {
      return s.is_slot() && s.slot_name == name;
    });
  }

  friend bool operator==(const Template& a, const Template& b) {
    return a.info_.id == b.info_.id && a.info_.name == b.info_.name &&
           a.info_.version == b.info_.version && a.segments_ == b.segments_;
  }

 private:
  friend Expected<Template, ParseError> parse_template(std::string_view,
                                                       TemplateInfo);

  void append_literal(std::string_view text) {
    if (text.empty()) return;
    if (!segments_.empty() && !segments_.back().is_slot()) {
      segments_.back().text.append(text);
    } else {
      segments_.push_back(Segment::literal(std::string(text)));
    }
  }

  void append_slot(std::string name) {
    segments_.push_back(Segment::slot(std::move(name)));
  }

  TemplateInfo info_;
  std::vector<Segment> segments_;
};

namespace detail {

inline ParseError make_parse_error(std::string_view source, ParseErrc code,
                                   std::size_t offset, std::string message) {
  ParseError err{code, offset, 1, 1, std::move(message)};
  const auto limit = std::min(offset, source.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (source[i] == '\n') {
      ++err.line;
      err.column = 1;
    } else {
      ++err.column;
    }
  }
  return err;
}

inline std::size_t run_length(std::string_view s, std::size_t pos, char c) {
  std::size_t end = pos;
  while (end < s.size() && s[end] == c) ++end;
  return end - pos;
}

}  // namespace detail

inline Expected<Template, ParseError> parse_template(std::string_view source,
                                                     TemplateInfo info = {}) {
  using detail::make_parse_error;
  using detail::run_length;

  if (source.size() > kMaxTemplateBytes) {
    return make_unexpected(make_parse_error(
        source, ParseErrc::kTooLarge, kMaxTemplateBytes,
        "template exceeds " + std::to_string(kMaxTemplateBytes) + " bytes"));
  }
  if (auto bad = find_invalid_utf8(source)) {
    return make_unexpected(make_parse_error(source, ParseErrc::kInvalidUtf8,
                                            *bad, "malformed UTF-8 sequence"));
  }

  Template t;
  t.info_ = std::move(info);
  std::string literal;
  std::size_t i = 0;

  // Consumes a slot whose "{{" starts at `open`. Returns the position after
  // the closing "}}".
  auto read_slot = [&](std::size_t open) -> Expected<std::size_t, ParseError> {
    const std::size_t name_begin = open + 2;
    const std::size_t close = source.find("}}", name_begin);
    const std::size_t next_open = source.find("{{", name_begin);
    if (close == std::string_view::npos ||
        (next_open != std::string_view::npos && next_open < close)) {
      return make_unexpected(make_parse_error(
          source, ParseErrc::kUnclosedSlot, open, "'{{' has no matching '}}'"));
    }
    const auto name = source.substr(name_begin, close - name_begin);
    if (name.empty()) {
      return make_unexpected(make_parse_error(source, ParseErrc::kEmptySlot,
                                              open, "empty slot '{{}}'"));
    }
    if (!is_valid_slot_name(name)) {
      return make_unexpected(make_parse_error(
          source, ParseErrc::kBadSlotName, open,
          "slot name '" + std::string(name) +
              "' must match [a-z][a-z0-9_]*"));
    }
    t.append_literal(literal);
    literal.clear();
    t.append_slot(std::string(name));
    return close + 2;
  };

  while (i < source.size()) {
    const char c = source[i];
    if (c == '\\') {
      const std::size_t n = run_length(source, i, '\\');
      const std::size_t after = i + n;
      if (source.substr(after, 2) == "{{") {
        literal.append(n / 2, '\\');
        if (n % 2 == 1) {
          literal.append("{{");
          i = after + 2;
        } else {
          i = after;  // the brace run opens a slot below
        }
      } else {
        literal.append(n, '\\');
        i = after;
      }
    } else if (c == '{') {
      const std::size_t k = run_length(source, i, '{');
      if (k < 2) {
        literal.push_back('{');
        ++i;
        continue;
      }
      literal.append(k - 2, '{');
      auto next = read_slot(i + k - 2);
      if (!next) return make_unexpected(next.error());
      i = *next;
    } else {
      literal.push_back(c);
      ++i;
    }
  }
  t.append_literal(literal);
  return t;
}

// Canonical source text for a template. parse_template(serialize(t)) == t.
inline std::string serialize(const Template& tmpl) {
  using detail::run_length;
  std::string out;
  const auto& segs = tmpl.segments();
  for (std::size_t idx = 0; idx < segs.size(); ++idx) {
    const auto& seg = segs[idx];
    if (seg.is_slot()) {
      out.append("{{").append(seg.slot_name).append("}}");
      continue;
    }
    const std::string_view lit = seg.text;
    const bool slot_follows = idx + 1 < segs.size();
    std::size_t i = 0;
    while (i < lit.size()) {
      if (lit[i] == '\\') {
        const std::size_t n = run_length(lit, i, '\\');
        const std::size_t j = i + n;
        const std::size_t braces = run_length(lit, j, '{');
        // The run must be doubled whenever the emitted text right after it
        // begins with "{{" or with an escape.
        const bool doubled = braces >= 2 ||
                             (braces == 1 && j + 1 == lit.size() && slot_follows) ||
                             (j == lit.size() && slot_follows);
        out.append(doubled ? 2 * n : n, '\\');
        i = j;
      } else if (lit[i] == '{') {
        const std::size_t k = run_length(lit, i, '{');
        for (std::size_t p = 0; p < k / 2; ++p) out.append("\\{{");
        if (k % 2 == 1) out.push_back('{');
        i += k;
      } else {
        out.push_back(lit[i]);
        ++i;
      }
    }
  }
  return out;
}

enum class SlotKind { kSingleChoice, kFreeText };

inline std::string_view to_string(SlotKind kind) {
  return kind == SlotKind::kSingleChoice ? "single_choice" : "free_text";
}

struct Choice {
  std::string value;
  std::string label;

  friend bool operator==(const Choice&, const Choice&) = default;
};

struct SlotSpec {
  std::string name;
  std::string label;
  SlotKind kind = SlotKind::kSingleChoice;
  std::vector<Choice> choices;
  std::optional<std::string> default_value;

  bool allows(std::string_view value) const {
    return std::any_of(choices.begin(), choices.end(),
                       [&](const Choice& c) { return c.value == value; });
  }

  friend bool operator==(const SlotSpec&, const SlotSpec&) = default;
};

enum class SchemaErrc {
  kBadSlotName,
  kReservedSlot,
  kDuplicateSlot,
  kNoChoices,
  kDuplicateChoice,
  kBadDefault,
  kFreeTextChoices,
  kUndeclaredSlot,
  kOrphanSlot,
};

inline std::string_view to_string(SchemaErrc code) {
  switch (code) {
    case SchemaErrc::kBadSlotName: return "E_BAD_SLOT_NAME";
    case SchemaErrc::kReservedSlot: return "E_RESERVED_SLOT";
    case SchemaErrc::kDuplicateSlot: return "E_DUPLICATE_SLOT";
    case SchemaErrc::kNoChoices: return "E_NO_CHOICES";
    case SchemaErrc::kDuplicateChoice: return "E_DUPLICATE_CHOICE";
    case SchemaErrc::kBadDefault: return "E_BAD_DEFAULT";
    case SchemaErrc::kFreeTextChoices: return "E_FREE_TEXT_CHOICES";
    case SchemaErrc::kUndeclaredSlot: return "E_UNDECLARED_SLOT";
    case SchemaErrc::kOrphanSlot: return "E_ORPHAN_SLOT";
  }
  return "E_UNKNOWN";
}

struct SchemaError {
  SchemaErrc code;
  std::string slot;
  std::size_t spec_index = 0;  // index into the declared slot list, if any
  std::string message;
};

// The option menu a UI renders for one template.
class OptionSchema {
 public:
  OptionSchema() = default;

  // Checks every SlotSpec invariant and the cross references against the
  // template, reporting all violations at once.
  static Expected<OptionSchema, std::vector<SchemaError>> make(
      const Template& tmpl, std::vector<SlotSpec> slots) {
    std::vector<SchemaError> errors;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& spec = slots[i];
      auto fail = [&](SchemaErrc code, std::string message) {
        errors.push_back({code, spec.name, i, std::move(message)});
      };
      if (!is_valid_slot_name(spec.name)) {
        fail(SchemaErrc::kBadSlotName,
             "slot name '" + spec.name + "' must match [a-z][a-z0-9_]*");
        continue;
      }
      if (spec.name == kInputSlot) {
        fail(SchemaErrc::kReservedSlot,
             "'input' is reserved and must not be declared");
        continue;
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (slots[j].name == spec.name) {
          fail(SchemaErrc::kDuplicateSlot,
               "slot '" + spec.name + "' is declared more than once");
          break;
        }
      }
      if (spec.kind == SlotKind::kSingleChoice) {
        if (spec.choices.empty()) {
          fail(SchemaErrc::kNoChoices,
               "single_choice slot '" + spec.name + "' has no choices");
        }
        for (std::size_t a = 0; a < spec.choices.size(); ++a) {
          for (std::size_t b = 0; b < a; ++b) {
            if (spec.choices[a].value == spec.choices[b].value) {
              fail(SchemaErrc::kDuplicateChoice,
                   "choice value '" + spec.choices[a].value +
                       "' repeats in slot '" + spec.name + "'");
            }
          }
        }
        if (spec.default_value && !spec.allows(*spec.default_value)) {
          fail(SchemaErrc::kBadDefault, "default '" + *spec.default_value +
                                            "' is not a choice of slot '" +
                                            spec.name + "'");
        }
      } else if (!spec.choices.empty() || spec.default_value) {
        fail(SchemaErrc::kFreeTextChoices,
             "free_text slot '" + spec.name +
                 "' must not declare choices or a default");
      }
      if (!tmpl.has_slot(spec.name)) {
        fail(SchemaErrc::kOrphanSlot, "slot '" + spec.name +
                                          "' is not used by template '" +
                                          tmpl.id() + "'");
      }
    }
    for (const auto& name : tmpl.slot_names()) {
      if (name == kInputSlot) continue;
      const bool declared =
          std::any_of(slots.begin(), slots.end(),
                      [&](const SlotSpec& s) { return s.name == name; });
      if (!declared) {
        errors.push_back({SchemaErrc::kUndeclaredSlot, name, slots.size(),
                          "template '" + tmpl.id() + "' uses slot '" + name +
                              "' with no declaration"});
      }
    }
    if (!errors.empty()) return make_unexpected(std::move(errors));

    OptionSchema schema;
    schema.template_id_ = tmpl.id();
    schema.slots_ = std::move(slots);
    return schema;
  }

  const std::string& template_id() const { return template_id_; }
  const std::vector<SlotSpec>& slots() const { return slots_; }

  // Declared spec for `name`, or the implicit free-text spec for `input`.
  const SlotSpec* find(std::string_view name) const {
    for (const auto& s : slots_) {
      if (s.name == name) return &s;
    }
    if (name == kInputSlot) return &input_spec();
    return nullptr;
  }

  static const SlotSpec& input_spec() {
    static const SlotSpec spec{std::string(kInputSlot), "Your text",
                               SlotKind::kFreeText, {}, std::nullopt};
    return spec;
  }

 private:
  std::string template_id_;
  std::vector<SlotSpec> slots_;
};

// A user's chosen value per slot. Keys are syntactically valid slot names.
class Selection {
 public:
  Selection() = default;

  [[nodiscard]] bool bind(std::string name, std::string value) {
    if (!is_valid_slot_name(name)) return false;
    bindings_[std::move(name)] = std::move(value);
    return true;
  }

  void unbind(const std::string& name) { bindings_.erase(name); }

  const std::string* find(const std::string& name) const {
    auto it = bindings_.find(name);
    return it == bindings_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, std::string>& bindings() const {
    return bindings_;
  }
  bool empty() const { return bindings_.empty(); }

  friend bool operator==(const Selection&, const Selection&) = default;

 private:
  std::map<std::string, std::string> bindings_;
};

enum class ValidationErrc {
  kMissingSlot,
  kUnknownSlot,
  kIllegalValue,
  kValueTooLarge,
  kTemplateMismatch,
};

inline std::string_view to_string(ValidationErrc code) {
  switch (code) {
    case ValidationErrc::kMissingSlot: return "E_MISSING_SLOT";
    case ValidationErrc::kUnknownSlot: return "E_UNKNOWN_SLOT";
    case ValidationErrc::kIllegalValue: return "E_ILLEGAL_VALUE";
    case ValidationErrc::kValueTooLarge: return "E_VALUE_TOO_LARGE";
    case ValidationErrc::kTemplateMismatch: return "E_TEMPLATE_MISMATCH";
  }
  return "E_UNKNOWN";
}

struct ValidationIssue {
  ValidationErrc code;
  std::string slot;
  std::string value;  // the offending value for kIllegalValue

  friend bool operator==(const ValidationIssue&,
                         const ValidationIssue&) = default;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool empty() const { return issues.empty(); }
  std::size_t size() const { return issues.size(); }

  std::string describe() const {
    std::string out;
    for (const auto& issue : issues) {
      out.append(to_string(issue.code)).append("(").append(issue.slot);
      if (issue.code == ValidationErrc::kIllegalValue) {
        out.append(", \"").append(issue.value).append("\"");
      }
      out.append(")\n");
    }
    return out;
  }
};

// Collects every violation; never stops at the first one. Issues are ordered
// by template slot order, then unknown bindings in name order.
inline ValidationReport validate_selection(const OptionSchema& schema,
                                           const Template& tmpl,
                                           const Selection& sel) {
  ValidationReport report;
  if (schema.template_id() != tmpl.id()) {
    report.issues.push_back(
        {ValidationErrc::kTemplateMismatch, schema.template_id(), tmpl.id()});
  }
  for (const auto& name : tmpl.slot_names()) {
    const SlotSpec* spec = schema.find(name);
    const std::string* value = sel.find(name);
    if (value == nullptr) {
      if (spec == nullptr || !spec->default_value) {
        report.issues.push_back({ValidationErrc::kMissingSlot, name, {}});
      }
      continue;
    }
    if (spec == nullptr) continue;
    if (spec->kind == SlotKind::kSingleChoice) {
      if (!spec->allows(*value)) {
        report.issues.push_back({ValidationErrc::kIllegalValue, name, *value});
      }
    } else if (value->size() > kMaxValueBytes) {
      report.issues.push_back({ValidationErrc::kValueTooLarge, name, {}});
    }
  }
  for (const auto& [name, value] : sel.bindings()) {
    if (!tmpl.has_slot(name)) {
      report.issues.push_back({ValidationErrc::kUnknownSlot, name, {}});
    }
  }
  return report;
}

// Interpolates bound values (or schema defaults) into the template. Values
// are injected verbatim.
inline Expected<std::string, ValidationReport> render(
    const Template& tmpl, const OptionSchema& schema, const Selection& sel) {
  auto report = validate_selection(schema, tmpl, sel);
  if (!report.empty()) return make_unexpected(std::move(report));

  std::string out;
  for (const auto& seg : tmpl.segments()) {
    if (!seg.is_slot()) {
      out.append(seg.text);
    } else if (const std::string* value = sel.find(seg.slot_name)) {
      out.append(*value);
    } else {
      out.append(*schema.find(seg.slot_name)->default_value);
    }
  }
  return out;
}

}  // namespace promptmw

#endif  // PROMPTMW_TEMPLATE_ENGINE_HPP_
