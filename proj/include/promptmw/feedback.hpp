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

// The writing-feedback pack: its template, option dimensions, and the golden
// corpus of every option combination rendered against fixed samples.

#ifndef PROMPTMW_FEEDBACK_HPP_
#define PROMPTMW_FEEDBACK_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptmw/expected.hpp"
#include "promptmw/middleware.hpp"
#include "promptmw/pack.hpp"
#include "promptmw/template_engine.hpp"

namespace promptmw {

inline constexpr std::string_view kFeedbackTemplateId = "feedback";

// The option dimensions the feedback template must expose, in schema order.
inline constexpr std::array<std::string_view, 4> kFeedbackDimensions = {
    "valence", "abstraction", "feedback_type", "genre"};

struct FeedbackPack {
  std::int64_t pack_version = 0;
  TemplateEntry entry;
  std::vector<StaticPrompt> statics;
};

inline Expected<FeedbackPack, PackError> load_feedback_pack(
    const std::filesystem::path& path) {
  auto doc = load_pack_document(path);
  if (!doc) return make_unexpected(std::move(doc.error()));

  auto fail = [&](std::string where, std::string message) {
    return make_unexpected(PackError{
        {{path.string(), std::move(where), "E_FEEDBACK_SCHEMA", std::move(message)}}});
  };

  auto it = std::find_if(doc->templates.begin(), doc->templates.end(),
                         [](const TemplateEntry& e) {
                           return e.tmpl.id() == kFeedbackTemplateId;
                         });
  if (it == doc->templates.end()) {
    return fail("templates", "no template with id 'feedback'");
  }
  const auto index = std::to_string(it - doc->templates.begin());
  const auto& slots = it->schema.slots();
  if (slots.size() != kFeedbackDimensions.size()) {
    return fail("templates[" + index + "].slots",
                "expected exactly the slots valence, abstraction, "
                "feedback_type and genre");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].name != kFeedbackDimensions[i] ||
        slots[i].kind != SlotKind::kSingleChoice) {
      return fail("templates[" + index + "].slots[" + std::to_string(i) + "]",
                  "expected single_choice slot '" +
                      std::string(kFeedbackDimensions[i]) + "'");
    }
  }
  if (!it->tmpl.has_slot(kInputSlot)) {
    return fail("templates[" + index + "].template_text",
                "the feedback template must include {{input}}");
  }
  return FeedbackPack{doc->pack_version, std::move(*it), std::move(doc->statics)};
}

struct Combination {
  Selection selection;
  ResolvedPrompt prompt;
};

// One entry per element of the Cartesian product of the single-choice slots,
// odometer order with the last declared slot varying fastest. Free-text slots
// all receive `fixed_input`.
inline std::vector<Combination> enumerate_combinations(
    const TemplateEntry& entry, std::string_view fixed_input) {
  std::vector<const SlotSpec*> dims;
  Selection base;
  for (const auto& spec : entry.schema.slots()) {
    if (spec.kind == SlotKind::kSingleChoice) {
      dims.push_back(&spec);
    } else {
      (void)base.bind(spec.name, std::string(fixed_input));
    }
  }
  if (entry.tmpl.has_slot(kInputSlot)) {
    (void)base.bind(std::string(kInputSlot), std::string(fixed_input));
  }

  std::vector<Combination> out;
  std::vector<std::size_t> odometer(dims.size(), 0);
  while (true) {
    Selection sel = base;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      (void)sel.bind(dims[d]->name, dims[d]->choices[odometer[d]].value);
    }
    auto text = render(entry.tmpl, entry.schema, sel);
    if (text) {
      out.push_back({std::move(sel),
                     {std::move(*text),
                      {PromptMode::kTemplate, entry.tmpl.id(), entry.tmpl.version()}}});
    }
    std::size_t d = dims.size();
    while (d > 0) {
      --d;
      if (++odometer[d] < dims[d]->choices.size()) break;
      odometer[d] = 0;
      if (d == 0) return out;
    }
    if (dims.empty()) return out;
  }
}

struct GoldenCase {
  std::string case_id;
  std::string context;  // which sample the case was rendered against
  Selection selection;
  std::string expected_prompt;
};

struct GoldenCorpus {
  std::int64_t pack_version = 0;
  std::string template_id;
  std::int64_t template_version = 0;
  std::vector<GoldenCase> cases;
};

struct SampleText {
  std::string context;
  std::string text;
};

// Reads every *.txt file in `dir`; the context name is the file stem.
inline Expected<std::vector<SampleText>, PackError> load_samples(
    const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    return make_unexpected(PackError{
        {{dir.string(), "", "E_IO", "not a readable directory"}}});
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<SampleText> samples;
  for (const auto& f : files) {
    auto text = read_file(f);
    if (!text) return make_unexpected(std::move(text.error()));
    samples.push_back({f.stem().string(), std::move(*text)});
  }
  return samples;
}

inline std::string golden_case_id(const std::string& context,
                                  const TemplateEntry& entry,
                                  const Selection& sel) {
  std::string id = context + "/";
  bool first = true;
  for (const auto& spec : entry.schema.slots()) {
    if (spec.kind != SlotKind::kSingleChoice) continue;
    if (!first) id += "-";
    first = false;
    if (const auto* v = sel.find(spec.name)) id += *v;
  }
  return id;
}

inline GoldenCorpus build_golden_corpus(const FeedbackPack& pack,
                                        const std::vector<SampleText>& samples) {
  GoldenCorpus corpus{pack.pack_version, pack.entry.tmpl.id(),
                      pack.entry.tmpl.version(), {}};
  for (const auto& sample : samples) {
    for (auto& combo : enumerate_combinations(pack.entry, sample.text)) {
      corpus.cases.push_back(
          {golden_case_id(sample.context, pack.entry, combo.selection),
           sample.context, std::move(combo.selection),
           std::move(combo.prompt.text)});
    }
  }
  return corpus;
}

struct GoldenDiff {
  std::string case_id;
  std::size_t first_divergent_offset = 0;
  std::string message;
};

struct DiffReport {
  std::vector<GoldenDiff> diffs;

  bool empty() const { return diffs.empty(); }
};

inline std::size_t first_divergence(std::string_view a, std::string_view b) {
  const auto n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) return i;
  }
  return n;
}

// Renders every case and compares byte-for-byte.
inline DiffReport verify_golden(const TemplateEntry& entry,
                                const std::vector<GoldenCase>& cases) {
  DiffReport report;
  for (const auto& c : cases) {
    auto text = render(entry.tmpl, entry.schema, c.selection);
    if (!text) {
      report.diffs.push_back({c.case_id, 0,
                              "selection no longer renders: " +
                                  text.error().describe()});
      continue;
    }
    if (*text != c.expected_prompt) {
      const auto at = first_divergence(*text, c.expected_prompt);
      report.diffs.push_back(
          {c.case_id, at, "rendered prompt differs at byte " + std::to_string(at)});
    }
  }
  return report;
}

inline DiffReport verify_golden(const FeedbackPack& pack,
                                const GoldenCorpus& corpus) {
  if (corpus.pack_version != pack.pack_version ||
      corpus.template_id != pack.entry.tmpl.id() ||
      corpus.template_version != pack.entry.tmpl.version()) {
    return {{{"*", 0,
              "corpus was generated for " + corpus.template_id + " v" +
                  std::to_string(corpus.template_version) + " (pack " +
                  std::to_string(corpus.pack_version) + "), loaded " +
                  pack.entry.tmpl.id() + " v" +
                  std::to_string(pack.entry.tmpl.version()) + " (pack " +
                  std::to_string(pack.pack_version) + ")"}}};
  }
  return verify_golden(pack.entry, corpus.cases);
}

inline nlohmann::json selection_to_json(const Selection& sel) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : sel.bindings()) j[k] = v;
  return j;
}

inline nlohmann::json to_json(const GoldenCorpus& corpus) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : corpus.cases) {
    cases.push_back({{"case_id", c.case_id},
                     {"context", c.context},
                     {"selection", selection_to_json(c.selection)},
                     {"expected_prompt", c.expected_prompt}});
  }
  return {{"pack_version", corpus.pack_version},
          {"template_id", corpus.template_id},
          {"template_version", corpus.template_version},
          {"cases", std::move(cases)}};
}

inline Expected<GoldenCorpus, PackError> golden_corpus_from_json(
    std::string_view text, const std::string& file) {
  auto bad = [&](std::string path, std::string message) {
    return make_unexpected(
        PackError{{{file, std::move(path), "E_CORPUS_MALFORMED", std::move(message)}}});
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    return bad("", e.what());
  }
  try {
    GoldenCorpus corpus;
    corpus.pack_version = j.at("pack_version").get<std::int64_t>();
    corpus.template_id = j.at("template_id").get<std::string>();
    corpus.template_version = j.at("template_version").get<std::int64_t>();
    const auto& cases = j.at("cases");
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& c = cases.at(i);
      GoldenCase gc;
      gc.case_id = c.at("case_id").get<std::string>();
      gc.context = c.at("context").get<std::string>();
      gc.expected_prompt = c.at("expected_prompt").get<std::string>();
      for (const auto& [k, v] : c.at("selection").items()) {
        if (!gc.selection.bind(k, v.get<std::string>())) {
          return bad("cases[" + std::to_string(i) + "].selection." + k,
                     "invalid slot name");
        }
      }
      corpus.cases.push_back(std::move(gc));
    }
    return corpus;
  } catch (const nlohmann::json::exception& e) {
    return bad("", e.what());
  }
}

inline Expected<GoldenCorpus, PackError> load_golden_corpus(
    const std::filesystem::path& path) {
  auto text = read_file(path);
  if (!text) return make_unexpected(std::move(text.error()));
  return golden_corpus_from_json(*text, path.string());
}

inline bool write_golden_corpus(const GoldenCorpus& corpus,
                                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << to_json(corpus).dump(2) << "\n";
  return static_cast<bool>(out);
}

}  // namespace promptmw

#endif  // PROMPTMW_FEEDBACK_HPP_
