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

// Loads the bundled feedback pack and prints the prompt for one option
// combination.
//
//   render_feedback data/packs/feedback.json "My draft text"

#include <iostream>

#include "promptmw/feedback.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: render_feedback <feedback.json> <text>\n";
    return 2;
  }
  auto pack = promptmw::load_feedback_pack(argv[1]);
  if (!pack) {
    std::cerr << pack.error().describe();
    return 1;
  }
  promptmw::Selection sel;
  (void)sel.bind("valence", "sandwich");
  (void)sel.bind("abstraction", "specific");
  (void)sel.bind("feedback_type", "content");
  (void)sel.bind("genre", "statement_of_purpose");
  (void)sel.bind("input", argv[2]);
  auto text = promptmw::render(pack->entry.tmpl, pack->entry.schema, sel);
  if (!text) {
    std::cerr << text.error().describe();
    return 1;
  }
  std::cout << *text << "\n";
  return 0;
}
