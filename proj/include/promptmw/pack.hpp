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

// Pack documents: JSON files holding templates (with their option schemas)
// and static prompts.
//
//   {
//     "pack_version": 1,
//     "templates": [{"id", "name", "version", "template_text",
//                    "slots": [{"name", "label", "kind", "choices",
//                               "default"}]}],
//     "statics": [{"id", "label", "body"}]
//   }
//
// `kind` is "single_choice" or "free_text"; `choices` is a list of
// {"value", "label"} objects.

#ifndef PROMPTMW_PACK_HPP_
#define PROMPTMW_PACK_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptmw/expected.hpp"
#include "promptmw/middleware.hpp"
#include "promptmw/template_engine.hpp"

namespace promptmw {

// One problem found in a pack file. `path` points into the document, e.g.
// "templates[0].slots[2].default".
struct PackDiagnostic {
  std::string file;
  std::string path;
  std::string code;
  std::string message;

  std::string describe() const {
    return file + ": " + (path.empty() ? "$" : path) + ": " + code + ": " +
           message;
  }
};

// Every load failure is E_PACK_MALFORMED; the diagnostics say why.
struct PackError {
  std::vector<PackDiagnostic> diagnostics;

  static constexpr std::string_view code() { return "E_PACK_MALFORMED"; }

  std::string describe() const {
    std::string out;
    for (const auto& d : diagnostics) out += d.describe() + "\n";
    return out;
  }
};

struct PackDocument {
  std::string file;
  std::int64_t pack_version = 0;
  std::vector<TemplateEntry> templates;
  std::vector<StaticPrompt> statics;
};

namespace detail {

class PackReader {
 public:
  explicit PackReader(std::string file) : file_(std::move(file)) {}

  std::vector<PackDiagnostic>& diagnostics() { return diags_; }

  void fail(std::string path, std::string code, std::string message) {
    diags_.push_back({file_, std::move(path), std::move(code), std::move(message)});
  }

  // Reads a required string member. Returns false (after recording a
  // diagnostic) when absent or mistyped.
  bool get_string(const nlohmann::json& obj, const std::string& path,
                  const char* key, std::string& out, bool allow_empty = false) {
    const auto member_path = path + "." + key;
    auto it = obj.find(key);
    if (it == obj.end()) {
      fail(member_path, "E_MISSING_FIELD", std::string("'") + key + "' is required");
      return false;
    }
    if (!it->is_string()) {
      fail(member_path, "E_TYPE", std::string("'") + key + "' must be a string");
      return false;
    }
    out = it->get<std::string>();
    if (!allow_empty && out.empty()) {
      fail(member_path, "E_EMPTY_FIELD", std::string("'") + key + "' must not be empty");
      return false;
    }
    return true;
  }

  bool get_int(const nlohmann::json& obj, const std::string& path,
               const char* key, std::int64_t& out) {
    const auto member_path = path + "." + key;
    auto it = obj.find(key);
    if (it == obj.end()) {
      fail(member_path, "E_MISSING_FIELD", std::string("'") + key + "' is required");
      return false;
    }
    if (!it->is_number_integer()) {
      fail(member_path, "E_TYPE", std::string("'") + key + "' must be an integer");
      return false;
    }
    out = it->get<std::int64_t>();
    return true;
  }

  std::optional<SlotSpec> read_slot(const nlohmann::json& j,
                                    const std::string& path) {
    if (!j.is_object()) {
      fail(path, "E_TYPE", "slot must be an object");
      return std::nullopt;
    }
    SlotSpec spec;
    bool ok = get_string(j, path, "name", spec.name);
    ok = get_string(j, path, "label", spec.label) && ok;
    std::string kind;
    if (get_string(j, path, "kind", kind)) {
      if (kind == "single_choice") {
        spec.kind = SlotKind::kSingleChoice;
      } else if (kind == "free_text") {
        spec.kind = SlotKind::kFreeText;
      } else {
        fail(path + ".kind", "E_BAD_KIND",
             "kind must be 'single_choice' or 'free_text', got '" + kind + "'");
        ok = false;
      }
    } else {
      ok = false;
    }
    if (auto it = j.find("choices"); it != j.end() && !it->is_null()) {
      if (!it->is_array()) {
        fail(path + ".choices", "E_TYPE", "choices must be an array");
        ok = false;
      } else {
        for (std::size_t i = 0; i < it->size(); ++i) {
          const auto cpath = path + ".choices[" + std::to_string(i) + "]";
          const auto& c = (*it)[i];
          if (!c.is_object()) {
            fail(cpath, "E_TYPE", "choice must be an object");
            ok = false;
            continue;
          }
          Choice choice;
          if (get_string(c, cpath, "value", choice.value) &&
              get_string(c, cpath, "label", choice.label)) {
            spec.choices.push_back(std::move(choice));
          } else {
            ok = false;
          }
        }
      }
    }
    if (auto it = j.find("default"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) {
        fail(path + ".default", "E_TYPE", "default must be a string or null");
        ok = false;
      } else {
        spec.default_value = it->get<std::string>();
      }
    }
    if (!ok) return std::nullopt;
    return spec;
  }

  std::optional<TemplateEntry> read_template(const nlohmann::json& j,
                                             const std::string& path) {
    if (!j.is_object()) {
      fail(path, "E_TYPE", "template must be an object");
      return std::nullopt;
    }
    TemplateInfo info;
    std::string text;
    bool ok = get_string(j, path, "id", info.id);
    ok = get_string(j, path, "name", info.name) && ok;
    ok = get_int(j, path, "version", info.version) && ok;
    ok = get_string(j, path, "template_text", text, /*allow_empty=*/true) && ok;

    std::optional<Template> tmpl;
    if (ok) {
      auto parsed = parse_template(text, info);
      if (parsed) {
        tmpl = std::move(*parsed);
      } else {
        fail(path + ".template_text", std::string(to_string(parsed.error().code)),
             parsed.error().describe());
      }
    }

    std::vector<SlotSpec> slots;
    bool slots_ok = true;
    auto it = j.find("slots");
    if (it == j.end()) {
      fail(path + ".slots", "E_MISSING_FIELD", "'slots' is required");
      slots_ok = false;
    } else if (!it->is_array()) {
      fail(path + ".slots", "E_TYPE", "'slots' must be an array");
      slots_ok = false;
    } else {
      for (std::size_t i = 0; i < it->size(); ++i) {
        auto spec = read_slot((*it)[i], path + ".slots[" + std::to_string(i) + "]");
        if (spec) {
          slots.push_back(std::move(*spec));
        } else {
          slots_ok = false;
        }
      }
    }
    if (!tmpl || !slots_ok) return std::nullopt;

    auto schema = OptionSchema::make(*tmpl, slots);
    if (!schema) {
      for (const auto& e : schema.error()) {
        std::string where = path + ".slots";
        if (e.spec_index < slots.size()) {
          where += "[" + std::to_string(e.spec_index) + "]";
        } else {
          where = path + ".template_text";
        }
        fail(where, std::string(to_string(e.code)), e.message);
      }
      return std::nullopt;
    }
    return TemplateEntry{std::move(*tmpl), std::move(*schema)};
  }

  std::optional<StaticPrompt> read_static(const nlohmann::json& j,
                                          const std::string& path) {
    if (!j.is_object()) {
      fail(path, "E_TYPE", "static prompt must be an object");
      return std::nullopt;
    }
    std::string id, label, body;
    bool ok = get_string(j, path, "id", id);
    ok = get_string(j, path, "label", label) && ok;
    ok = get_string(j, path, "body", body) && ok;
    if (!ok) return std::nullopt;
    auto prompt = StaticPrompt::make(std::move(id), std::move(label), std::move(body));
    if (!prompt) {
      fail(path, std::string(to_string(prompt.error().code)), prompt.error().describe());
      return std::nullopt;
    }
    return std::move(*prompt);
  }

 private:
  std::string file_;
  std::vector<PackDiagnostic> diags_;
};

}  // namespace detail

inline Expected<PackDocument, PackError> parse_pack_document(
    std::string_view text, std::string file = "<memory>") {
  detail::PackReader reader(file);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    reader.fail("", "E_JSON", e.what());
    return make_unexpected(PackError{std::move(reader.diagnostics())});
  }
  if (!doc.is_object()) {
    reader.fail("", "E_TYPE", "pack document must be a JSON object");
    return make_unexpected(PackError{std::move(reader.diagnostics())});
  }

  PackDocument out;
  out.file = file;
  reader.get_int(doc, "", "pack_version", out.pack_version);

  auto read_array = [&](const char* key, auto&& read_one) {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return;
    const std::string path = std::string(".") + key;
    if (!it->is_array()) {
      reader.fail(path, "E_TYPE", std::string("'") + key + "' must be an array");
      return;
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      read_one((*it)[i], path + "[" + std::to_string(i) + "]");
    }
  };

  read_array("templates", [&](const nlohmann::json& j, const std::string& path) {
    if (auto entry = reader.read_template(j, path)) {
      for (const auto& prev : out.templates) {
        if (prev.tmpl.id() == entry->tmpl.id()) {
          reader.fail(path + ".id", "E_DUPLICATE_ID",
                      "template id '" + entry->tmpl.id() + "' repeats");
        }
      }
      out.templates.push_back(std::move(*entry));
    }
  });
  read_array("statics", [&](const nlohmann::json& j, const std::string& path) {
    if (auto prompt = reader.read_static(j, path)) {
      for (const auto& prev : out.statics) {
        if (prev.id() == prompt->id()) {
          reader.fail(path + ".id", "E_DUPLICATE_ID",
                      "static id '" + prompt->id() + "' repeats");
        }
      }
      out.statics.push_back(std::move(*prompt));
    }
  });

  if (!reader.diagnostics().empty()) {
    // Paths are emitted as ".templates[0]"; drop the leading dot.
    for (auto& d : reader.diagnostics()) {
      if (!d.path.empty() && d.path.front() == '.') d.path.erase(0, 1);
    }
    return make_unexpected(PackError{std::move(reader.diagnostics())});
  }
  return out;
}

inline Expected<std::string, PackError> read_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return make_unexpected(PackError{
        {{path.string(), "", "E_IO", "cannot open file"}}});
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Expected<PackDocument, PackError> load_pack_document(
    const std::filesystem::path& path) {
  auto text = read_file(path);
  if (!text) return make_unexpected(std::move(text.error()));
  return parse_pack_document(*text, path.string());
}

// Everything loaded from a pack directory.
struct PackSet {
  std::int64_t pack_version = 0;  // highest version among the documents
  Registries registries;
  std::vector<std::string> files;

  bool empty() const {
    return registries.templates.empty() && registries.statics.empty();
  }
};

// Loads every *.json file directly inside `dir`, in name order. Reports all
// problems across all files.
inline Expected<PackSet, PackError> load_pack_dir(
    const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    return make_unexpected(PackError{
        {{dir.string(), "", "E_IO", "not a readable directory"}}});
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  if (ec) {
    return make_unexpected(PackError{{{dir.string(), "", "E_IO", ec.message()}}});
  }
  std::sort(files.begin(), files.end());

  PackSet set;
  PackError errors;
  for (const auto& file : files) {
    auto doc = load_pack_document(file);
    if (!doc) {
      errors.diagnostics.insert(errors.diagnostics.end(),
                                doc.error().diagnostics.begin(),
                                doc.error().diagnostics.end());
      continue;
    }
    set.files.push_back(file.string());
    set.pack_version = std::max(set.pack_version, doc->pack_version);
    for (std::size_t i = 0; i < doc->templates.size(); ++i) {
      auto next = register_template(set.registries.templates, doc->templates[i]);
      if (!next) {
        errors.diagnostics.push_back(
            {file.string(), "templates[" + std::to_string(i) + "].id",
             std::string(to_string(next.error().code)),
             "template id '" + next.error().id + "' is already registered"});
        continue;
      }
      set.registries.templates = std::move(*next);
    }
    for (std::size_t i = 0; i < doc->statics.size(); ++i) {
      auto next = register_static(set.registries.statics, doc->statics[i]);
      if (!next) {
        errors.diagnostics.push_back(
            {file.string(), "statics[" + std::to_string(i) + "].id",
             std::string(to_string(next.error().code)),
             "static id '" + next.error().id + "' is already registered"});
        continue;
      }
      set.registries.statics = std::move(*next);
    }
  }
  if (!errors.diagnostics.empty()) return make_unexpected(std::move(errors));
  return set;
}

inline nlohmann::json slot_spec_to_json(const SlotSpec& spec) {
  nlohmann::json j{{"name", spec.name},
                   {"label", spec.label},
                   {"kind", to_string(spec.kind)}};
  auto choices = nlohmann::json::array();
  for (const auto& c : spec.choices) {
    choices.push_back({{"value", c.value}, {"label", c.label}});
  }
  j["choices"] = std::move(choices);
  j["default"] = spec.default_value ? nlohmann::json(*spec.default_value)
                                    : nlohmann::json(nullptr);
  return j;
}

}  // namespace promptmw

#endif  // PROMPTMW_PACK_HPP_
