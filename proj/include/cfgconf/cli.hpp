#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cfgconf/pipeline.hpp"

namespace cfgconf {

enum ExitCode : int { exit_ok = 0, exit_spec_error = 1, exit_io_error = 2, exit_too_large = 3 };

/// Parsed command line.
struct RunConfig {
  std::string subcommand;
  std::string spec_path;
  std::optional<std::string> output;
  std::optional<std::string> format;
  std::vector<std::string> overrides;
  std::string diagnostics_format = "text";
  std::optional<std::string> debug_dump;
  std::size_t max_drawn_nodes = LayoutConfig{}.max_drawn_nodes;
  bool annotated = false;
  bool quiet = false;
};

inline int exit_code_for(const Diagnostics& diags) {
  bool io = false, too_large = false, error = false;
  for (const auto& d : diags) {
    if (!d.is_error()) continue;
    error = true;
    if (d.code == DiagCode::io) io = true;
    if (d.code == DiagCode::graph_too_large) too_large = true;
  }
  if (too_large) return exit_too_large;
  if (io) return exit_io_error;
  return error ? exit_spec_error : exit_ok;
}

inline void print_diagnostics(const Diagnostics& diags, const RunConfig& rc, std::ostream& err) {
  if (rc.diagnostics_format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : diags) arr.push_back(diagnostic_to_json(d));
    err << arr.dump() << "\n";
    return;
  }
  for (const auto& d : diags) {
    if (rc.quiet && !d.is_error()) continue;
    err << format_diagnostic(d) << "\n";
  }
}

/// Runs one parsed invocation; artifacts go to `out` (or the -o file),
/// diagnostics to `err`.
inline int run(const RunConfig& rc, std::ostream& out, std::ostream& err, std::istream& in = std::cin) {
  Diagnostics diags;
  auto finish = [&](int code) {
    print_diagnostics(diags, rc, err);
    return code;
  };

  std::string text;
  std::filesystem::path base = std::filesystem::current_path();
  if (rc.spec_path == "-") {
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    std::ifstream f(rc.spec_path, std::ios::binary);
    if (!f) {
      Diagnostic d = make_error("", fmt::format("cannot read spec file \"{}\"", rc.spec_path), DiagCode::io);
      d.file = rc.spec_path;
      diags.push_back(std::move(d));
      return finish(exit_io_error);
    }
    text.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    base = std::filesystem::absolute(rc.spec_path).parent_path();
  }

  std::vector<Override> overrides;
  for (const auto& s : rc.overrides) {
    auto o = parse_override(s);
    if (!o) {
      diags.push_back(make_error("", fmt::format("--set expects <json-pointer>=<value>, got \"{}\"", s)));
      return finish(exit_spec_error);
    }
    overrides.push_back(*o);
  }

  auto spec = load_spec(text, rc.spec_path == "-" ? std::optional<std::string>{} : rc.spec_path, overrides);
  append(diags, spec.diagnostics);
  if (!spec) return finish(exit_code_for(diags));
  auto prepared = prepare(*spec, filesystem_loader(base));
  append(diags, prepared.diagnostics);
  if (!prepared) return finish(exit_code_for(diags));

  if (rc.debug_dump) {
    std::ofstream dump(*rc.debug_dump, std::ios::binary);
    dump << debug_dump(*prepared).dump(2) << "\n";
    if (!dump) {
      diags.push_back(make_error("", fmt::format("cannot write debug dump \"{}\"", *rc.debug_dump), DiagCode::io));
      return finish(exit_io_error);
    }
  }
  if (rc.subcommand == "validate") return finish(exit_code_for(diags));

  std::string format = rc.format.value_or(rc.subcommand == "filter" ? "json" : rc.subcommand == "emit-dot" ? "dot" : "svg");
  if (rc.annotated) format = "dot-annotated";
  std::string artifact;
  if (rc.subcommand == "filter") {
    if (format == "json") {
      artifact = filtered_to_json(prepared->cfg, prepared->filtered).dump(2) + "\n";
    } else if (format == "dot" || format == "dot-annotated") {
      auto dg = build_draw_graph(prepared->cfg, prepared->filtered, prepared->spec.rendering);
      artifact = emit_dot(draw_graph_to_dot(dg, format == "dot" ? DotFlavor::plain : DotFlavor::annotated));
    } else {
      diags.push_back(make_error("", fmt::format("filter cannot write format \"{}\"; use json or dot", format)));
      return finish(exit_spec_error);
    }
  } else if (format == "dot" || format == "dot-annotated") {
    artifact = emit_dot(draw_graph_to_dot(prepared->draw, format == "dot" ? DotFlavor::plain : DotFlavor::annotated));
  } else if (format == "json") {
    artifact = draw_graph_to_json(prepared->draw).dump(2) + "\n";
  } else if (format == "svg") {
    LayoutConfig cfg;
    cfg.max_drawn_nodes = rc.max_drawn_nodes;
    auto geo = compute_layout(prepared->draw, cfg);
    append(diags, geo.diagnostics);
    if (!geo) return finish(exit_code_for(diags));
    artifact = render_svg(prepared->draw, *geo);
  } else {
    diags.push_back(make_error("", fmt::format("unknown output format \"{}\"", format)));
    return finish(exit_spec_error);
  }

  if (rc.output) {
    std::ofstream f(*rc.output, std::ios::binary);
    f << artifact;
    f.close();
    if (!f) {
      diags.push_back(make_error("", fmt::format("cannot write output file \"{}\"", *rc.output), DiagCode::io));
      return finish(exit_io_error);
    }
  } else {
    out << artifact;
  }
  return finish(exit_code_for(diags));
}

/// Parses argv and runs. Usage errors exit with code 1.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err, std::istream& in = std::cin) {
  CLI::App app{"Render control flow graphs from declarative JSON specifications", "cfgconf"};
  app.require_subcommand(1);
  RunConfig rc;
  const std::vector<std::string> formats{"svg", "dot", "dot-annotated", "json"};

  auto add_common = [&](CLI::App* sub, bool with_output) {
    sub->add_option("spec", rc.spec_path, "Spec file (- for stdin)")->required();
    sub->add_option("--set", rc.overrides, "Override a spec value: <json-pointer>=<value>")
        ->expected(1)
        ->take_all();
    sub->add_option("--diagnostics", rc.diagnostics_format, "Diagnostic format")
        ->check(CLI::IsMember({"text", "json"}));
    sub->add_flag("-q,--quiet", rc.quiet, "Only print errors");
    sub->add_option("--debug-dump", rc.debug_dump, "Write filter, collapse and drawn-graph stages as JSON");
    if (with_output) {
      sub->add_option("-o,--output", rc.output, "Output file (default stdout)");
      sub->add_option("--max-drawn-nodes", rc.max_drawn_nodes, "Refuse to lay out larger graphs");
    }
  };
  auto* render = app.add_subcommand("render", "Render a spec to SVG, dot or JSON");
  add_common(render, true);
  render->add_option("--format", rc.format, "Output format")->check(CLI::IsMember(formats));
  auto* validate = app.add_subcommand("validate", "Check a spec and its referenced files");
  add_common(validate, false);
  auto* filter = app.add_subcommand("filter", "Write the filtered graph before collapsing");
  add_common(filter, true);
  filter->add_option("--format", rc.format, "Output format")->check(CLI::IsMember({"json", "dot", "dot-annotated"}));
  auto* emit = app.add_subcommand("emit-dot", "Write the drawn graph as dot");
  add_common(emit, true);
  emit->add_flag("--annotated", rc.annotated, "Add loop layout hints for an external dot engine");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (!app.get_subcommands().empty()) err << "run with --help for usage\n";
    return exit_spec_error;
  }
  rc.subcommand = app.get_subcommands().front()->get_name();
  return run(rc, out, err, in);
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args), out, err);
}

}  // namespace cfgconf
