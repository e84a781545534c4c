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

// The `promptmw` command line: lint, render, golden, send, serve.
//
// stdout carries only the artifact (a prompt or a completion); diagnostics go
// to stderr. Exit codes: 0 success, 1 validation or lint failure, 2 usage
// error, 3 gateway failure.

#ifndef PROMPTMW_CLI_HPP_
#define PROMPTMW_CLI_HPP_

#include <filesystem>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "promptmw/feedback.hpp"
#include "promptmw/gateway.hpp"
#include "promptmw/http_transport.hpp"
#include "promptmw/middleware.hpp"
#include "promptmw/pack.hpp"
#include "promptmw/service.hpp"
#include "promptmw/template_engine.hpp"

namespace promptmw::cli {

enum ExitCode : int {
  kOk = 0,
  kValidationFailure = 1,
  kUsageError = 2,
  kGatewayFailure = 3,
};

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  EnvLookup env = process_env;
};

namespace detail {

inline std::string default_pack_dir(const EnvLookup& env) {
  if (auto v = env("PACK_DIR")) return *v;
  return "data/packs";
}

inline bool read_input(const std::string& source, Io& io, std::string& out) {
  if (source == "-") {
    out.assign(std::istreambuf_iterator<char>(io.in), std::istreambuf_iterator<char>());
    return true;
  }
  auto text = read_file(source);
  if (!text) return false;
  out = std::move(*text);
  return true;
}

// Parses repeated name=value flags into a selection.
inline bool parse_bindings(const std::vector<std::string>& sets, Selection& sel,
                           std::ostream& err) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      err << "error: --set expects name=value, got '" << kv << "'\n";
      return false;
    }
    if (!sel.bind(kv.substr(0, eq), kv.substr(eq + 1))) {
      err << "error: '" << kv.substr(0, eq) << "' is not a valid slot name\n";
      return false;
    }
  }
  return true;
}

inline void print_middleware_error(const MiddlewareError& e, std::ostream& err) {
  if (e.code == MiddlewareErrc::kValidation) {
    err << "error: selection for '" << e.id << "' is invalid\n";
    for (const auto& issue : e.report.issues) {
      err << "  " << to_string(issue.code) << "(" << issue.slot;
      if (issue.code == ValidationErrc::kIllegalValue) err << ", \"" << issue.value << "\"";
      err << ")\n";
    }
  } else {
    err << "error: " << e.describe() << "\n";
  }
}

struct PromptArgs {
  std::string template_id;
  std::vector<std::string> sets;
  std::string input;
  std::string static_id;
  std::optional<std::string> freeform;
};

// Builds the request described by the flags. Returns an exit code on failure.
inline std::optional<int> build_request(const PromptArgs& args, Io& io,
                                        PromptRequest& request) {
  if (args.freeform) {
    if (!args.template_id.empty() || !args.static_id.empty() || !args.sets.empty()) {
      io.err << "error: --freeform cannot be combined with other prompt sources\n";
      return kUsageError;
    }
    request = FreeFormRequest{*args.freeform};
    return std::nullopt;
  }
  std::optional<std::string> input;
  if (!args.input.empty()) {
    std::string text;
    if (!read_input(args.input, io, text)) {
      io.err << "error: cannot read input '" << args.input << "'\n";
      return kUsageError;
    }
    input = std::move(text);
  }
  if (!args.static_id.empty()) {
    if (!args.template_id.empty() || !args.sets.empty()) {
      io.err << "error: --static cannot be combined with a template\n";
      return kUsageError;
    }
    request = StaticRequest{args.static_id, input};
    return std::nullopt;
  }
  if (args.template_id.empty()) {
    io.err << "error: give a template id, --static or --freeform\n";
    return kUsageError;
  }
  TemplateRequest r{args.template_id, {}};
  if (!parse_bindings(args.sets, r.selection, io.err)) return kUsageError;
  if (input) (void)r.selection.bind(std::string(kInputSlot), *input);
  request = std::move(r);
  return std::nullopt;
}

inline std::optional<PackSet> load_packs_or_report(const std::string& dir, Io& io,
                                                   int& code) {
  auto set = load_pack_dir(dir);
  if (!set) {
    const bool io_error = set.error().diagnostics.size() == 1 &&
                          set.error().diagnostics[0].code == "E_IO";
    for (const auto& d : set.error().diagnostics) io.err << d.describe() << "\n";
    code = io_error ? kUsageError : kValidationFailure;
    return std::nullopt;
  }
  return std::move(*set);
}

}  // namespace detail

inline int cmd_lint(const std::string& dir, Io& io) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    io.err << "error: cannot read pack directory '" << dir << "'\n";
    return kUsageError;
  }
  auto set = load_pack_dir(dir);
  if (!set) {
    for (const auto& d : set.error().diagnostics) io.err << d.describe() << "\n";
    io.err << set.error().diagnostics.size() << " problem(s) found\n";
    return kValidationFailure;
  }
  io.err << "ok: " << set->files.size() << " pack file(s), "
         << set->registries.templates.size() << " template(s), "
         << set->registries.statics.size() << " static prompt(s)\n";
  return kOk;
}

inline int cmd_render(const std::string& dir, const detail::PromptArgs& args,
                      bool newline, Io& io) {
  PromptRequest request;
  if (args.template_id.empty()) {
    io.err << "error: render needs a template id\n";
    return kUsageError;
  }
  if (auto code = detail::build_request(args, io, request)) return *code;
  int code = kOk;
  auto set = detail::load_packs_or_report(dir, io, code);
  if (!set) return code;
  auto resolved = resolve(set->registries, request);
  if (!resolved) {
    detail::print_middleware_error(resolved.error(), io.err);
    return kValidationFailure;
  }
  io.out << resolved->text;
  if (newline) io.out << '\n';
  io.out.flush();
  return kOk;
}

inline int cmd_golden(bool write, bool check, const std::string& dir,
                      std::string pack_file, const std::string& samples_dir,
                      const std::string& corpus_path, Io& io) {
  if (write == check) {
    io.err << "error: give exactly one of --write or --check\n";
    return kUsageError;
  }
  if (pack_file.empty()) pack_file = (std::filesystem::path(dir) / "feedback.json").string();
  auto pack = load_feedback_pack(pack_file);
  if (!pack) {
    io.err << pack.error().describe();
    return kValidationFailure;
  }
  auto samples = load_samples(samples_dir);
  if (!samples) {
    io.err << samples.error().describe();
    return kUsageError;
  }
  if (samples->empty()) {
    io.err << "error: no *.txt samples in '" << samples_dir << "'\n";
    return kUsageError;
  }

  if (write) {
    const auto corpus = build_golden_corpus(*pack, *samples);
    if (!write_golden_corpus(corpus, corpus_path)) {
      io.err << "error: cannot write '" << corpus_path << "'\n";
      return kUsageError;
    }
    io.err << "wrote " << corpus.cases.size() << " case(s) to " << corpus_path << "\n";
    return kOk;
  }

  std::error_code ec;
  if (!std::filesystem::exists(corpus_path, ec)) {
    io.err << "error: corpus '" << corpus_path << "' does not exist\n";
    return kUsageError;
  }
  auto corpus = load_golden_corpus(corpus_path);
  if (!corpus) {
    io.err << corpus.error().describe();
    return kValidationFailure;
  }
  auto report = verify_golden(*pack, *corpus);
  // Cases present now but absent from the corpus also count as drift.
  const auto fresh = build_golden_corpus(*pack, *samples);
  for (const auto& c : fresh.cases) {
    const bool known = std::any_of(corpus->cases.begin(), corpus->cases.end(),
                                   [&](const GoldenCase& g) { return g.case_id == c.case_id; });
    if (!known) report.diffs.push_back({c.case_id, 0, "case missing from corpus"});
  }
  if (!report.empty()) {
    for (const auto& d : report.diffs) io.err << d.case_id << ": " << d.message << "\n";
    io.err << report.diffs.size() << " of " << corpus->cases.size()
           << " case(s) differ\n";
    return kValidationFailure;
  }
  io.err << "ok: " << corpus->cases.size() << " case(s) match\n";
  return kOk;
}

inline int cmd_send(const std::string& dir, const detail::PromptArgs& args, bool json,
                    Io& io) {
  PromptRequest request;
  if (auto code = detail::build_request(args, io, request)) return *code;

  Registries registries;
  if (!std::holds_alternative<FreeFormRequest>(request)) {
    int code = kOk;
    auto set = detail::load_packs_or_report(dir, io, code);
    if (!set) return code;
    registries = set->registries;
  }
  auto resolved = resolve(registries, request);
  if (!resolved) {
    detail::print_middleware_error(resolved.error(), io.err);
    return kValidationFailure;
  }

  auto config = provider_config_from_env(io.env);
  if (!config) {
    io.err << "error: " << config.error().describe() << "\n";
    return kGatewayFailure;
  }
  auto gateway = make_gateway(*config, io.env);
  auto result = gateway->complete(*resolved);
  if (!result) {
    io.err << "error: " << result.error().describe() << "\n";
    return kGatewayFailure;
  }
  if (json) {
    io.out << Json{{"text", result->text},
                   {"attempts", result->attempts},
                   {"latency_ms", result->latency.count()},
                   {"provider", to_string(result->provider)},
                   {"model", result->model},
                   {"provenance", provenance_to_json(resolved->provenance)}}
                  .dump()
           << "\n";
  } else {
    io.out << result->text;
  }
  io.out.flush();
  return kOk;
}

inline int cmd_serve(const std::string& dir, const std::string& bind, Io& io) {
  auto config = service_config_from_env(io.env);
  if (!config) {
    io.err << "error: " << config.error().describe() << "\n";
    return kUsageError;
  }
  config->pack_dir = dir;
  if (!bind.empty()) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) {
      io.err << "error: --bind expects host:port\n";
      return kUsageError;
    }
    config->bind_host = bind.substr(0, colon);
    try {
      config->bind_port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
      io.err << "error: --bind port must be an integer\n";
      return kUsageError;
    }
  }
  auto gateway = make_gateway(config->provider, io.env);
  std::ostream& err = io.err;
  Service service(*config, gateway, [&err](std::string_view line) { err << line << std::endl; });
  if (auto loaded = service.reload(); !loaded) {
    err << loaded.error().describe();
  }
  return service.run() ? kOk : kUsageError;
}

inline int run(int argc, const char* const* argv, Io io) {
  CLI::App app{"Prompt middleware: map UI options to LLM prompts", "promptmw"};
  app.require_subcommand(1);

  std::string pack_dir = detail::default_pack_dir(io.env);

  auto* lint = app.add_subcommand("lint", "Check every pack file in a directory");
  std::string lint_dir;
  lint->add_option("pack_dir", lint_dir, "Pack directory")->required();

  auto* render = app.add_subcommand("render", "Render a template to stdout");
  detail::PromptArgs render_args;
  bool newline = false;
  render->add_option("template_id", render_args.template_id, "Template id")->required();
  render->add_option("--set", render_args.sets, "Slot binding, name=value")
      ->allow_extra_args(false);
  render->add_option("--input", render_args.input, "Writing sample file, or - for stdin");
  render->add_option("--pack-dir", pack_dir, "Pack directory");
  render->add_flag("--newline", newline, "Append a newline to the output");

  auto* golden = app.add_subcommand("golden", "Write or check the golden corpus");
  bool write = false;
  bool check = false;
  std::string pack_file;
  std::string samples_dir = "data/samples";
  std::string corpus_path = "data/golden/feedback_corpus.json";
  golden->add_flag("--write", write, "Regenerate the corpus");
  golden->add_flag("--check", check, "Compare the corpus with current renders");
  golden->add_option("--pack-dir", pack_dir, "Pack directory");
  golden->add_option("--pack", pack_file, "Feedback pack file (default <pack-dir>/feedback.json)");
  golden->add_option("--samples-dir", samples_dir, "Directory of *.txt writing samples");
  golden->add_option("--corpus", corpus_path, "Corpus file");

  auto* send = app.add_subcommand("send", "Send one prompt to the configured provider");
  detail::PromptArgs send_args;
  bool json = false;
  send->add_option("template_id", send_args.template_id, "Template id");
  send->add_option("--set", send_args.sets, "Slot binding, name=value")
      ->allow_extra_args(false);
  send->add_option("--input", send_args.input, "Writing sample file, or - for stdin");
  send->add_option("--static", send_args.static_id, "Static prompt id");
  send->add_option("--freeform", send_args.freeform, "Free-form prompt text");
  send->add_option("--pack-dir", pack_dir, "Pack directory");
  send->add_flag("--json", json, "Print the full result as JSON");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string bind;
  serve->add_option("--pack-dir", pack_dir, "Pack directory");
  serve->add_option("--bind", bind, "host:port (default BIND_ADDR or 127.0.0.1:8080)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    io.out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    io.out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    io.err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  if (lint->parsed()) return cmd_lint(lint_dir, io);
  if (render->parsed()) return cmd_render(pack_dir, render_args, newline, io);
  if (golden->parsed()) {
    return cmd_golden(write, check, pack_dir, pack_file, samples_dir, corpus_path, io);
  }
  if (send->parsed()) return cmd_send(pack_dir, send_args, json, io);
  if (serve->parsed()) return cmd_serve(pack_dir, bind, io);
  return kUsageError;
}

}  // namespace promptmw::cli

#endif  // PROMPTMW_CLI_HPP_
