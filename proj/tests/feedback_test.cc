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

#include "promptmw/feedback.hpp"

#include <gtest/gtest.h>

#include <set>
#include <string>

#include "fixtures.hpp"

namespace promptmw {
namespace {

using fixtures::TempDir;

FeedbackPack bundled_pack() {
  auto pack = load_feedback_pack(fixtures::kPackDir / "feedback.json");
  EXPECT_TRUE(pack.has_value()) << (pack ? "" : pack.error().describe());
  return pack ? std::move(*pack) : FeedbackPack{};
}

TEST(LoadFeedbackPackTest, BundledPackExposesFourDimensionsAndInput) {
  const auto pack = bundled_pack();
  const auto& slots = pack.entry.schema.slots();
  ASSERT_EQ(slots.size(), 4u);
  const std::vector<std::size_t> sizes = {3, 2, 4, 3};
  for (std::size_t i = 0; i < slots.size(); ++i) {
    EXPECT_EQ(slots[i].name, kFeedbackDimensions[i]);
    EXPECT_EQ(slots[i].kind, SlotKind::kSingleChoice);
    EXPECT_EQ(slots[i].choices.size(), sizes[i]) << slots[i].name;
  }
  EXPECT_TRUE(pack.entry.tmpl.has_slot("input"));
  ASSERT_EQ(pack.statics.size(), 1u);
  EXPECT_EQ(pack.statics[0].label(), "Pros and Cons");
}

TEST(LoadFeedbackPackTest, ValenceChoices) {
  const auto pack = bundled_pack();
  const auto* valence = pack.entry.schema.find("valence");
  ASSERT_NE(valence, nullptr);
  EXPECT_TRUE(valence->allows("positive"));
  EXPECT_TRUE(valence->allows("critical"));
  EXPECT_TRUE(valence->allows("sandwich"));
}

TEST(LoadFeedbackPackTest, UndeclaredSlotIsMalformed) {
  TempDir dir;
  auto text = fixtures::slurp(fixtures::kPackDir / "feedback.json");
  const auto pos = text.find("{{genre}}");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 9, "{{audience}}");
  auto pack = load_feedback_pack(dir.write("feedback.json", text));
  ASSERT_FALSE(pack.has_value());
  bool found = false;
  for (const auto& d : pack.error().diagnostics) {
    if (d.code == "E_UNDECLARED_SLOT" && d.path == "templates[0].template_text") found = true;
  }
  EXPECT_TRUE(found) << pack.error().describe();
}

TEST(LoadFeedbackPackTest, EmptyFileIsMalformed) {
  TempDir dir;
  auto pack = load_feedback_pack(dir.write("feedback.json", ""));
  ASSERT_FALSE(pack.has_value());
  EXPECT_EQ(pack.error().diagnostics.at(0).code, "E_JSON");
}

TEST(LoadFeedbackPackTest, WrongDimensionsRejected) {
  TempDir dir;
  auto pack = load_feedback_pack(dir.write("feedback.json", R"({"pack_version": 1,
    "templates": [{"id": "feedback", "name": "F", "version": 1,
      "template_text": "{{valence}} {{input}}",
      "slots": [{"name": "valence", "label": "V", "kind": "single_choice",
                 "choices": [{"value": "positive", "label": "P"}]}]}]})"));
  ASSERT_FALSE(pack.has_value());
  EXPECT_EQ(pack.error().diagnostics.at(0).code, "E_FEEDBACK_SCHEMA");
}

TEST(EnumerateCombinationsTest, ProductOfChoiceCounts) {
  const auto pack = bundled_pack();
  std::size_t product = 1;
  for (const auto& s : pack.entry.schema.slots()) product *= s.choices.size();
  const auto combos = enumerate_combinations(pack.entry, "sample text");
  EXPECT_EQ(product, 72u);
  EXPECT_EQ(combos.size(), product);
}

TEST(EnumerateCombinationsTest, AllPromptsDistinct) {
  const auto pack = bundled_pack();
  const auto combos = enumerate_combinations(pack.entry, "sample text");
  std::set<std::string> texts;
  std::set<std::map<std::string, std::string>> selections;
  for (const auto& c : combos) {
    texts.insert(c.prompt.text);
    selections.insert(c.selection.bindings());
  }
  EXPECT_EQ(texts.size(), combos.size());
  EXPECT_EQ(selections.size(), combos.size());
}

TEST(EnumerateCombinationsTest, SingleSlotSingleChoice) {
  auto t = parse_template("Tone: {{tone}}. {{input}}", {"one", "One", 1});
  ASSERT_TRUE(t.has_value());
  auto s = OptionSchema::make(
      *t, {{"tone", "Tone", SlotKind::kSingleChoice, {{"calm", "Calm"}}, std::nullopt}});
  ASSERT_TRUE(s.has_value());
  const auto combos = enumerate_combinations({*t, *s}, "x");
  ASSERT_EQ(combos.size(), 1u);
  EXPECT_EQ(combos[0].prompt.text, "Tone: calm. x");
}

TEST(FeedbackPromptTest, SandwichAsksForCriticismBetweenPositives) {
  const auto pack = bundled_pack();
  for (const auto& c : enumerate_combinations(pack.entry, "My draft.")) {
    if (*c.selection.find("valence") != "sandwich") continue;
    EXPECT_NE(c.prompt.text.find("Valence: sandwich"), std::string::npos);
    EXPECT_NE(c.prompt.text.find("criticism between two positive comments"),
              std::string::npos);
  }
}

TEST(FeedbackPromptTest, SampleAppearsVerbatim) {
  const auto pack = bundled_pack();
  const std::string sample = "  Line one.\n\tLine \"two\" {{not a slot}}\n";
  for (const auto& c : enumerate_combinations(pack.entry, sample)) {
    EXPECT_NE(c.prompt.text.find(sample), std::string::npos);
  }
}

std::vector<SampleText> two_samples() {
  return {{"email", "Hi team, the report is late."},
          {"statement_of_purpose", "I want to study HCI."}};
}

TEST(VerifyGoldenTest, FreshCorpusHasNoDiffs) {
  const auto pack = bundled_pack();
  const auto corpus = build_golden_corpus(pack, two_samples());
  EXPECT_EQ(corpus.cases.size(), 144u);
  EXPECT_TRUE(verify_golden(pack, corpus).empty());
}

TEST(VerifyGoldenTest, TamperedCaseYieldsExactlyOneDiff) {
  const auto pack = bundled_pack();
  auto corpus = build_golden_corpus(pack, two_samples());
  auto& victim = corpus.cases[37];
  const std::size_t at = 120;
  victim.expected_prompt[at] = victim.expected_prompt[at] == 'x' ? 'y' : 'x';
  const auto report = verify_golden(pack, corpus);
  ASSERT_EQ(report.diffs.size(), 1u);
  EXPECT_EQ(report.diffs[0].case_id, victim.case_id);
  EXPECT_EQ(report.diffs[0].first_divergent_offset, at);
}

TEST(VerifyGoldenTest, TemplateEditFlagsEveryAffectedCase) {
  auto pack = bundled_pack();
  auto corpus = build_golden_corpus(pack, two_samples());
  auto segs = pack.entry.tmpl.segments();
  segs.insert(segs.begin(), Segment::literal("Please. "));
  pack.entry.tmpl = *Template::from_segments(segs, pack.entry.tmpl.info());
  const auto report = verify_golden(pack, corpus);
  EXPECT_EQ(report.diffs.size(), corpus.cases.size());
  for (const auto& d : report.diffs) EXPECT_EQ(d.first_divergent_offset, 0u);
}

TEST(VerifyGoldenTest, VersionMismatchIsReported) {
  const auto pack = bundled_pack();
  auto corpus = build_golden_corpus(pack, two_samples());
  corpus.pack_version += 1;
  const auto report = verify_golden(pack, corpus);
  ASSERT_EQ(report.diffs.size(), 1u);
  EXPECT_EQ(report.diffs[0].case_id, "*");
}

TEST(GoldenCorpusTest, JsonRoundTrip) {
  const auto pack = bundled_pack();
  const auto corpus = build_golden_corpus(pack, two_samples());
  auto back = golden_corpus_from_json(to_json(corpus).dump(), "mem");
  ASSERT_TRUE(back.has_value());
  ASSERT_EQ(back->cases.size(), corpus.cases.size());
  for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
    EXPECT_EQ(back->cases[i].case_id, corpus.cases[i].case_id);
    EXPECT_EQ(back->cases[i].selection, corpus.cases[i].selection);
    EXPECT_EQ(back->cases[i].expected_prompt, corpus.cases[i].expected_prompt);
  }
}

TEST(GoldenCorpusTest, CommittedCorpusMatches) {
  const auto pack = bundled_pack();
  auto corpus = load_golden_corpus(fixtures::kCorpus);
  ASSERT_TRUE(corpus.has_value()) << corpus.error().describe();
  std::map<std::string, int> per_context;
  for (const auto& c : corpus->cases) ++per_context[c.context];
  EXPECT_EQ(per_context.size(), 2u);
  for (const auto& [context, count] : per_context) EXPECT_EQ(count, 72) << context;
  EXPECT_TRUE(verify_golden(pack, *corpus).empty());
}

TEST(GoldenCorpusTest, SamplesDirectory) {
  auto samples = load_samples(fixtures::kSamplesDir);
  ASSERT_TRUE(samples.has_value());
  ASSERT_EQ(samples->size(), 2u);
  EXPECT_EQ((*samples)[0].context, "email");
  EXPECT_EQ((*samples)[1].context, "statement_of_purpose");
}

}  // namespace
}  // namespace promptmw
