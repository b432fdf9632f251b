#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cfgconf/collapse.hpp"
#include "cfgconf/diagnostics.hpp"
#include "cfgconf/draw_graph.hpp"
#include "cfgconf/filter.hpp"
#include "cfgconf/graph_model.hpp"
#include "cfgconf/layout.hpp"
#include "cfgconf/render.hpp"
#include "cfgconf/resolve.hpp"
#include "cfgconf/spec_model.hpp"

namespace cfgconf {

/// Reads files relative to `base`; absolute paths are used as given.
inline FileLoader filesystem_loader(std::filesystem::path base) {
  return [base = std::move(base)](const std::string& path) -> std::optional<std::string> {
    std::filesystem::path p(path);
    if (p.is_relative()) p = base / p;
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) return std::nullopt;
    return ss.str();
  };
}

/// A `--set` override: JSON pointer and raw value text. Values that parse as
/// JSON are used as such, anything else as a string.
struct Override {
  std::string pointer;
  std::string value;
};

inline std::optional<Override> parse_override(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos) return std::nullopt;
  return Override{text.substr(0, eq), text.substr(eq + 1)};
}

inline Diagnostics apply_overrides(nlohmann::json& doc, const std::vector<Override>& overrides) {
  Diagnostics diags;
  for (const auto& o : overrides) {
    nlohmann::json value = nlohmann::json::parse(o.value, nullptr, false);
    if (value.is_discarded()) value = o.value;
    try {
      doc[nlohmann::json::json_pointer(o.pointer)] = std::move(value);
    } catch (const nlohmann::json::exception& e) {
      diags.push_back(make_error(o.pointer, fmt::format("cannot apply override \"{}={}\": {}", o.pointer, o.value,
                                                        e.what())));
    }
  }
  return diags;
}

/// Parses spec text, applies overrides, validates and fills defaults.
inline Result<Spec> load_spec(std::string_view text, const std::optional<std::string>& file = {},
                              const std::vector<Override>& overrides = {}) {
  Result<Spec> out;
  auto doc = parse_json_text(text, file);
  append(out.diagnostics, doc.diagnostics);
  if (!doc) return out;
  auto odiags = apply_overrides(*doc, overrides);
  append(out.diagnostics, odiags);
  if (has_errors(odiags)) return out;
  auto spec = parse_spec_document(*doc);
  for (auto d : spec.diagnostics) {
    if (file && !d.file) d.file = file;
    out.diagnostics.push_back(std::move(d));
  }
  if (spec) out.value = apply_defaults(std::move(*spec));
  return out;
}

/// Every intermediate product of one run, kept for inspection.
struct Prepared {
  Spec spec;
  Cfg cfg;
  FilteredGraph filtered;
  CollapsePlan plan;
  CollapsedGraph collapsed;
  DrawGraph draw;
};

/// Resolves files, builds the graph, filters, collapses and assembles the
/// drawn graph.
inline Result<Prepared> prepare(const Spec& spec, const FileLoader& loader) {
  Result<Prepared> out;
  auto& diags = out.diagnostics;
  auto inputs = resolve_files(spec, loader);
  append(diags, inputs.diagnostics);
  if (!inputs) return out;
  auto cfg = build_cfg(*inputs);
  detail::split_file_origins(cfg.diagnostics);
  append(diags, cfg.diagnostics);
  if (!cfg) return out;
  auto filtered = apply_filter(*cfg, spec.filtering);
  append(diags, filtered.diagnostics);
  if (!filtered) return out;

  CollapsePlan plan;
  if (const auto& rules = spec.rendering.function.collapsing_rules) {
    auto planned = plan_collapse(*cfg, *filtered, *rules);
    append(diags, planned.diagnostics);
    if (!planned) return out;
    plan = std::move(*planned);
  }
  auto collapsed = apply_collapse(*cfg, *filtered, plan);
  append(diags, collapsed.diagnostics);
  if (!collapsed) return out;
  auto draw = build_draw_graph(*cfg, *collapsed, spec.rendering);
  Prepared p{spec, std::move(*cfg), std::move(*filtered), std::move(plan), std::move(*collapsed), std::move(draw)};
  out.value = std::move(p);
  return out;
}

inline nlohmann::json plan_to_json(const Cfg& g, const CollapsePlan& plan) {
  nlohmann::json j = nlohmann::json::object();
  nlohmann::json collapsed = nlohmann::json::object(), exempted = nlohmann::json::object();
  for (const auto& [f, r] : plan.reason) collapsed[g.functions[f].id] = to_string(r);
  for (const auto& [f, r] : plan.exempted) exempted[g.functions[f].id] = to_string(r);
  j["collapsed"] = collapsed;
  j["exempted"] = exempted;
  return j;
}

/// Stage-by-stage dump used for debugging a run.
inline nlohmann::json debug_dump(const Prepared& p) {
  nlohmann::json j = nlohmann::json::object();
  j["filtered"] = filtered_to_json(p.cfg, p.filtered);
  j["collapse"] = plan_to_json(p.cfg, p.plan);
  j["drawn"] = draw_graph_to_json(p.draw);
  return j;
}

/// Full pipeline from spec text to SVG.
inline Result<std::string> render_spec_text(std::string_view text, const FileLoader& loader,
                                            const LayoutConfig& layout = {}) {
  Result<std::string> out;
  auto spec = load_spec(text);
  append(out.diagnostics, spec.diagnostics);
  if (!spec) return out;
  auto prepared = prepare(*spec, loader);
  append(out.diagnostics, prepared.diagnostics);
  if (!prepared) return out;
  auto geo = compute_layout(prepared->draw, layout);
  append(out.diagnostics, geo.diagnostics);
  if (!geo) return out;
  out.value = render_svg(prepared->draw, *geo);
  return out;
}

}  // namespace cfgconf
