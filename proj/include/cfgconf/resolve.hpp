#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "cfgconf/diagnostics.hpp"
#include "cfgconf/dot_io.hpp"
#include "cfgconf/graph_model.hpp"
#include "cfgconf/spec_model.hpp"

namespace cfgconf {

/// Returns the contents of a referenced file, or nothing if it cannot be
/// read. Embedders decide how paths are interpreted.
using FileLoader = std::function<std::optional<std::string>(const std::string& path)>;

enum class GraphFormat { dot, json };

/// Chooses a graph file format from its extension, falling back to content.
inline GraphFormat sniff_graph_format(const std::string& path, std::string_view text) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           detail::dot::lower(path.substr(path.size() - suffix.size())) == suffix;
  };
  if (ends_with(".dot") || ends_with(".gv")) return GraphFormat::dot;
  if (ends_with(".json")) return GraphFormat::json;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return (c == '{' || c == '[') ? GraphFormat::json : GraphFormat::dot;
  }
  return GraphFormat::dot;
}

namespace detail {

/// Diagnostics for declarations read from files carry origins like
/// "/data/analysisFile#/loops/3/nodes/1": the part before '#' points into the
/// spec, the rest into the file. Move the file part into the message.
inline void split_file_origins(Diagnostics& diags) {
  for (auto& d : diags) {
    auto hash = d.path.find('#');
    if (hash == std::string::npos) continue;
    auto inner = d.path.substr(hash + 1);
    d.path = d.path.substr(0, hash);
    if (!inner.empty()) d.message = fmt::format("{} (at {} in file)", d.message, inner);
  }
}

inline void prefix_origins(std::vector<LoopDecl>& loops, const std::string& prefix) {
  for (auto& l : loops) {
    l.origin = prefix + l.origin;
    prefix_origins(l.children, prefix);
  }
}

inline void name_file_loops(std::vector<LoopDecl>& loops, const std::string& prefix) {
  for (std::size_t i = 0; i < loops.size(); ++i) {
    auto& l = loops[i];
    if (!l.id) l.id = prefix + std::to_string(i);
    name_file_loops(l.children, *l.id + ".");
  }
}

inline void collect_loop_ids(const std::vector<LoopDecl>& loops, std::set<std::string>& ids) {
  for (const auto& l : loops) {
    if (l.id) ids.insert(*l.id);
    collect_loop_ids(l.children, ids);
  }
}

struct GraphFileContent {
  std::vector<NodeDecl> nodes;
  std::vector<EdgeDecl> edges;
};

inline void split_dot_attrs(const AttrMap& attrs, std::optional<std::string>& label, StyleMap& style,
                            std::optional<std::string>& css_class, std::set<std::string>& ignored) {
  for (const auto& [k, v] : attrs) {
    if (k == "label")
      label = v;
    else if (k == "class")
      css_class = v;
    else {
      style[k] = v;
      if (detail::honored_style_keys().count(k) == 0) ignored.insert(k);
    }
  }
}

inline std::optional<GraphFileContent> read_graph_file(const std::string& path, const std::string& text,
                                                       Diagnostics& diags) {
  const std::string base = "/data/graphFile";
  GraphFileContent out;
  if (sniff_graph_format(path, text) == GraphFormat::dot) {
    auto parsed = parse_dot(text, path);
    for (auto& d : parsed.diagnostics) d.path = base;
    append(diags, parsed.diagnostics);
    if (!parsed) return std::nullopt;
    std::set<std::string> ignored;
    for (std::size_t i = 0; i < parsed->nodes.size(); ++i) {
      const auto& n = parsed->nodes[i];
      NodeDecl decl;
      decl.id = n.id;
      decl.origin = base + "#/nodes/" + std::to_string(i);
      split_dot_attrs(n.attrs, decl.label, decl.style, decl.css_class, ignored);
      out.nodes.push_back(std::move(decl));
    }
    for (std::size_t i = 0; i < parsed->edges.size(); ++i) {
      const auto& e = parsed->edges[i];
      EdgeDecl decl;
      decl.source = e.source;
      decl.target = e.target;
      decl.origin = base + "#/edges/" + std::to_string(i);
      split_dot_attrs(e.attrs, decl.label, decl.style, decl.css_class, ignored);
      out.edges.push_back(std::move(decl));
    }
    if (!ignored.empty()) {
      std::string names;
      for (const auto& k : ignored) names += (names.empty() ? "" : ", ") + k;
      Diagnostic w = make_warning(
          base, fmt::format("dot attributes not used by the renderer are passed through: {}", names));
      w.file = path;
      diags.push_back(std::move(w));
    }
    return out;
  }

  auto doc = parse_json_text(text, path);
  for (auto& d : doc.diagnostics) d.path = base;
  append(diags, doc.diagnostics);
  if (!doc) return std::nullopt;
  SpecReader reader;
  if (!doc->is_object()) {
    diags.push_back(make_error(base, fmt::format("graph file {} must hold a JSON object", path)));
    return std::nullopt;
  }
  for (const auto& [key, value] : doc->items()) {
    const auto sub = base + "#/" + pointer_token(key);
    if (key == "nodes") {
      if (!value.is_array()) {
        reader.type_error(sub, "an array", value);
        continue;
      }
      for (std::size_t i = 0; i < value.size(); ++i)
        out.nodes.push_back(reader.read_node(value[i], join_pointer(sub, i)));
    } else if (key == "edges" || key == "links") {
      if (!value.is_array()) {
        reader.type_error(sub, "an array", value);
        continue;
      }
      for (std::size_t i = 0; i < value.size(); ++i)
        out.edges.push_back(reader.read_edge(value[i], join_pointer(sub, i)));
    } else {
      reader.unknown_key(base + "#", key, value);
    }
  }
  for (auto& d : reader.diags) d.file = path;
  append(diags, reader.diags);
  return out;
}

struct StructureFileContent {
  std::vector<LoopDecl> loops;
  std::vector<FunctionDecl> functions;
};

inline std::optional<StructureFileContent> read_structure_file(const std::string& key,
                                                               const std::string& path,
                                                               const std::string& text,
                                                               Diagnostics& diags) {
  const std::string base = "/data/" + key;
  auto doc = parse_json_text(text, path);
  for (auto& d : doc.diagnostics) d.path = base;
  append(diags, doc.diagnostics);
  if (!doc) return std::nullopt;
  if (!doc->is_object()) {
    diags.push_back(make_error(base, fmt::format("{} {} must hold a JSON object", key, path)));
    return std::nullopt;
  }
  SpecReader reader;
  StructureFileContent out;
  for (const auto& [k, value] : doc->items()) {
    const auto sub = base + "#/" + pointer_token(k);
    if (k == "loops") {
      if (!value.is_array()) {
        reader.type_error(sub, "an array", value);
        continue;
      }
      for (std::size_t i = 0; i < value.size(); ++i)
        out.loops.push_back(reader.read_loop(value[i], join_pointer(sub, i)));
    } else if (k == "functions") {
      if (!value.is_array()) {
        reader.type_error(sub, "an array", value);
        continue;
      }
      for (std::size_t i = 0; i < value.size(); ++i)
        out.functions.push_back(reader.read_function(value[i], join_pointer(sub, i)));
    } else {
      reader.unknown_key(base + "#", k, value);
    }
  }
  for (auto& d : reader.diags) d.file = path;
  append(diags, reader.diags);
  return out;
}

inline void check_loop_refs(const std::vector<LoopDecl>& loops, const std::set<std::string>& ids,
                            Diagnostics& diags) {
  for (const auto& l : loops) {
    for (std::size_t k = 0; k < l.nodes.size(); ++k)
      if (!ids.count(l.nodes[k]))
        diags.push_back(make_error(join_pointer(join_pointer(l.origin, "nodes"), k),
                                   fmt::format("loop \"{}\" references unknown node {}",
                                               l.id.value_or("?"), l.nodes[k])));
    if (l.header && !ids.count(*l.header))
      diags.push_back(make_error(join_pointer(l.origin, "header"),
                                 fmt::format("loop \"{}\" references unknown node {}",
                                             l.id.value_or("?"), *l.header)));
    check_loop_refs(l.children, ids, diags);
  }
}

}  // namespace detail

/// Merges graph, structure and analysis files into the inline data.
/// Inline declarations win over file declarations with the same id.
inline Result<GraphInputs> resolve_files(const Spec& spec, const FileLoader& loader) {
  Result<GraphInputs> out;
  auto& diags = out.diagnostics;
  const auto& data = spec.data;
  GraphInputs in;

  auto load = [&](const std::string& key, const std::string& path) -> std::optional<std::string> {
    std::optional<std::string> text;
    if (loader) text = loader(path);
    if (!text) {
      Diagnostic d = make_error("/data/" + key, fmt::format("cannot read {} \"{}\"", key, path),
                                DiagCode::io);
      d.file = path;
      diags.push_back(std::move(d));
    }
    return text;
  };

  if (data.graph_file) {
    if (auto text = load("graphFile", *data.graph_file)) {
      if (auto content = detail::read_graph_file(*data.graph_file, *text, diags)) {
        in.nodes = std::move(content->nodes);
        in.edges = std::move(content->edges);
      }
    }
  }

  std::map<std::string, std::size_t> node_slot;
  for (std::size_t i = 0; i < in.nodes.size(); ++i) node_slot.emplace(in.nodes[i].id, i);
  for (const auto& n : data.nodes) {
    auto it = node_slot.find(n.id);
    if (it != node_slot.end()) {
      diags.push_back(make_warning(join_pointer(n.origin, "id"),
                                   fmt::format("node {} overrides the graph file's declaration", n.id)));
      in.nodes[it->second] = n;
    } else {
      node_slot.emplace(n.id, in.nodes.size());
      in.nodes.push_back(n);
    }
  }
  in.edges.insert(in.edges.end(), data.edges.begin(), data.edges.end());

  std::set<std::string> inline_loop_ids;
  detail::collect_loop_ids(data.loops, inline_loop_ids);
  std::set<std::string> inline_fn_ids;
  for (const auto& f : data.functions) inline_fn_ids.insert(f.id.value_or(f.name));

  std::vector<LoopDecl> file_loops;
  std::vector<FunctionDecl> file_functions;
  for (const auto& [key, path] : {std::pair{std::string("structureFile"), data.structure_file},
                                  std::pair{std::string("analysisFile"), data.analysis_file}}) {
    if (!path) continue;
    auto text = load(key, *path);
    if (!text) continue;
    auto content = detail::read_structure_file(key, *path, *text, diags);
    if (!content) continue;
    detail::name_file_loops(content->loops, key == "analysisFile" ? "analysis.loop" : "structure.loop");
    for (auto& l : content->loops) {
      if (l.id && inline_loop_ids.count(*l.id)) {
        diags.push_back(make_warning(
            "/data/loops", fmt::format("inline loop \"{}\" overrides the one in {}", *l.id, *path)));
        continue;
      }
      file_loops.push_back(std::move(l));
    }
    for (auto& f : content->functions) {
      const auto id = f.id.value_or(f.name);
      if (!f.id) f.id = id;
      if (inline_fn_ids.count(id)) {
        diags.push_back(make_warning(
            "/data/functions", fmt::format("inline function \"{}\" overrides the one in {}", id, *path)));
        continue;
      }
      inline_fn_ids.insert(id);
      file_functions.push_back(std::move(f));
    }
  }
  in.loops = data.loops;
  in.loops.insert(in.loops.end(), file_loops.begin(), file_loops.end());
  in.functions = data.functions;
  in.functions.insert(in.functions.end(), file_functions.begin(), file_functions.end());

  std::set<std::string> ids;
  for (const auto& n : in.nodes) ids.insert(n.id);
  for (const auto& e : in.edges) {
    if (!ids.count(e.source))
      diags.push_back(make_error(join_pointer(e.origin, "source"),
                                 fmt::format("edge references unknown node {}", e.source)));
    if (!ids.count(e.target))
      diags.push_back(make_error(join_pointer(e.origin, "target"),
                                 fmt::format("edge references unknown node {}", e.target)));
  }
  detail::check_loop_refs(in.loops, ids, diags);
  for (const auto& f : in.functions)
    for (std::size_t k = 0; k < f.nodes.size(); ++k)
      if (!ids.count(f.nodes[k]))
        diags.push_back(make_error(join_pointer(join_pointer(f.origin, "nodes"), k),
                                   fmt::format("function \"{}\" references unknown node {}", f.name,
                                               f.nodes[k])));
  for (const auto& s : spec.filtering.selected_nodes) {
    if (!ids.count(s) && spec.filtering.hop_filter_on.value_or(false)) {
      auto it = std::find(spec.filtering.selected_nodes.begin(), spec.filtering.selected_nodes.end(), s);
      diags.push_back(make_error(
          join_pointer("/filtering/selectedNodes",
                       static_cast<std::size_t>(it - spec.filtering.selected_nodes.begin())),
          fmt::format("selected node {} is not in the graph", s)));
    }
  }

  detail::split_file_origins(diags);
  if (!has_errors(diags)) out.value = std::move(in);
  return out;
}

}  // namespace cfgconf
