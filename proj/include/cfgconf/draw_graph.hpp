#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cfgconf/collapse.hpp"
#include "cfgconf/diagnostics.hpp"
#include "cfgconf/dot_io.hpp"
#include "cfgconf/filter.hpp"
#include "cfgconf/graph_model.hpp"
#include "cfgconf/spec_model.hpp"

namespace cfgconf {

enum class DrawKind { block, proxy };

struct DrawNode {
  std::string id;
  DrawKind kind = DrawKind::block;
  std::string label;
  StyleMap style;  ///< global rendering style overlaid with the element's own
  std::optional<std::string> css_class;
  std::optional<std::string> function;       ///< id of the enclosing drawn function (blocks only)
  std::optional<std::string> function_name;  ///< collapsed function a proxy stands for

  bool operator==(const DrawNode&) const = default;
};

struct DrawEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  std::optional<std::string> label;
  StyleMap style;
  std::optional<std::string> css_class;
  bool back_edge = false;
  std::optional<std::size_t> loop;  ///< DrawGraph loop closed by a back edge

  bool operator==(const DrawEdge&) const = default;
};

struct DrawLoop {
  std::string id;
  std::optional<std::size_t> header;  ///< absent when the header was filtered out
  std::vector<std::size_t> members;   ///< ascending draw indices
  std::optional<std::size_t> parent;
  int depth = 0;

  bool operator==(const DrawLoop&) const = default;
};

struct DrawFunction {
  std::string id;
  std::string name;
  std::vector<std::size_t> members;

  bool operator==(const DrawFunction&) const = default;
};

struct DrawBoundary {
  std::size_t anchor = 0;
  Direction direction = Direction::incoming;
  std::vector<std::string> members;  ///< excluded node ids

  std::size_t count() const { return members.size(); }
  bool operator==(const DrawBoundary&) const = default;
};

/// Rendering switches resolved from the rendering section of a spec file.
struct RenderOptions {
  bool show_loop_background = defaults::show_loop_background;
  std::string loop_background_color{defaults::loop_background_color};
  std::string back_edge_color{defaults::back_edge_color};
  bool show_function_boundaries = defaults::show_function_boundaries;

  bool operator==(const RenderOptions&) const = default;
};

/// Everything that is drawn: surviving blocks and proxies (sorted by id),
/// drawn edges, loops and functions restricted to drawn nodes, and discs.
struct DrawGraph {
  std::vector<DrawNode> nodes;
  std::vector<DrawEdge> edges;
  std::vector<DrawLoop> loops;
  std::vector<DrawFunction> functions;
  std::vector<DrawBoundary> boundary;
  std::vector<std::string> collapsed_functions;
  RenderOptions options;

  bool operator==(const DrawGraph&) const = default;
};

inline RenderOptions render_options(const RenderSection& r) {
  RenderOptions o;
  o.show_loop_background = r.loop.show_background.value_or(defaults::show_loop_background);
  if (r.loop.background_color) o.loop_background_color = *r.loop.background_color;
  if (r.loop.back_edge_color) o.back_edge_color = *r.loop.back_edge_color;
  o.show_function_boundaries = r.function.show_boundaries.value_or(defaults::show_function_boundaries);
  return o;
}

namespace detail {

inline StyleMap overlay(StyleMap base, const StyleMap& top) {
  for (const auto& [k, v] : top) base[k] = v;
  return base;
}

inline std::string add_style_flag(const std::string& style, const std::string& flag) {
  if (style.empty()) return flag;
  if (("," + style + ",").find("," + flag + ",") != std::string::npos) return style;
  return style + "," + flag;
}

}  // namespace detail

/// Assembles the drawn graph from a filtered and collapsed CFG.
inline DrawGraph build_draw_graph(const Cfg& g, const CollapsedGraph& cg, const RenderSection& r) {
  DrawGraph dg;
  dg.options = render_options(r);
  const auto label_source = r.node.label.value_or(defaults::label_source);
  StyleMap node_base = r.node.style;
  if (!node_base.count("shape")) node_base["shape"] = std::string(defaults::node_shape);

  std::vector<std::pair<std::string, GraphRef>> entries;
  for (auto v : cg.surviving) entries.emplace_back(g.nodes[v].id, GraphRef{GraphRef::node, v});
  std::set<std::string> taken;
  for (const auto& e : entries) taken.insert(e.first);
  for (std::size_t p = 0; p < cg.proxies.size(); ++p) {
    auto id = cg.proxies[p].id;
    while (taken.count(id)) id += "'";
    taken.insert(id);
    entries.emplace_back(id, GraphRef{GraphRef::proxy, p});
  }
  std::sort(entries.begin(), entries.end());
  std::map<GraphRef, std::size_t> index;
  std::map<std::size_t, std::size_t> node_to_draw;
  for (const auto& [id, ref] : entries) {
    DrawNode n;
    n.id = id;
    if (ref.kind == GraphRef::node) {
      const auto& src = g.nodes[ref.index];
      n.kind = DrawKind::block;
      n.label = (label_source == LabelSource::label && src.label) ? *src.label : src.id;
      n.style = detail::overlay(node_base, src.style);
      n.css_class = src.css_class ? src.css_class : r.node.css_class;
      if (src.function) n.function = g.functions[*src.function].id;
      node_to_draw[ref.index] = dg.nodes.size();
    } else {
      const auto& proxy = cg.proxies[ref.index];
      const auto& fn = g.functions[proxy.function];
      n.kind = DrawKind::proxy;
      n.label = fn.name;
      n.style = node_base;
      n.style["shape"] = "box";
      n.style["style"] = detail::add_style_flag(n.style.count("style") ? n.style["style"] : "", "dashed");
      n.css_class = r.node.css_class;
      n.function_name = fn.name;
    }
    index[ref] = dg.nodes.size();
    dg.nodes.push_back(std::move(n));
  }

  std::vector<std::optional<std::size_t>> loop_to_draw(g.loop_tree.loops.size());
  for (std::size_t i = 0; i < g.loop_tree.loops.size(); ++i) {
    const auto& loop = g.loop_tree.loops[i];
    DrawLoop dl;
    dl.id = loop.id;
    for (auto m : loop.members)
      if (auto it = node_to_draw.find(m); it != node_to_draw.end()) dl.members.push_back(it->second);
    if (dl.members.empty()) continue;
    std::sort(dl.members.begin(), dl.members.end());
    if (auto it = node_to_draw.find(loop.header); it != node_to_draw.end()) dl.header = it->second;
    loop_to_draw[i] = dg.loops.size();
    dg.loops.push_back(std::move(dl));
  }
  for (std::size_t i = 0; i < g.loop_tree.loops.size(); ++i) {
    if (!loop_to_draw[i]) continue;
    auto p = g.loop_tree.loops[i].parent;
    while (p && !loop_to_draw[*p]) p = g.loop_tree.loops[*p].parent;
    if (p) dg.loops[*loop_to_draw[i]].parent = loop_to_draw[*p];
  }
  for (auto& l : dg.loops) {
    int depth = 0;
    for (auto p = l.parent; p; p = dg.loops[*p].parent) ++depth;
    l.depth = depth;
  }

  const std::set<std::size_t> collapsed(cg.collapsed_functions.begin(), cg.collapsed_functions.end());
  for (auto f : cg.collapsed_functions) dg.collapsed_functions.push_back(g.functions[f].id);
  for (std::size_t f = 0; f < g.functions.size(); ++f) {
    if (collapsed.count(f)) continue;
    DrawFunction df{g.functions[f].id, g.functions[f].name, {}};
    for (auto m : g.functions[f].members)
      if (auto it = node_to_draw.find(m); it != node_to_draw.end()) df.members.push_back(it->second);
    if (df.members.empty()) continue;
    std::sort(df.members.begin(), df.members.end());
    dg.functions.push_back(std::move(df));
  }

  StyleMap edge_base = r.edge.style;
  for (const auto& re : cg.edges) {
    const auto& src = g.edges[re.original];
    DrawEdge de;
    de.source = index.at(re.source);
    de.target = index.at(re.target);
    de.label = src.label;
    de.style = detail::overlay(edge_base, src.style);
    de.css_class = src.css_class ? src.css_class : r.edge.css_class;
    if (src.is_back_edge && src.loop && re.source.kind == GraphRef::node && re.target.kind == GraphRef::node &&
        loop_to_draw[*src.loop]) {
      de.back_edge = true;
      de.loop = loop_to_draw[*src.loop];
      if (!src.style.count("color")) de.style["color"] = dg.options.back_edge_color;
    }
    dg.edges.push_back(std::move(de));
  }
  std::stable_sort(dg.edges.begin(), dg.edges.end(), [](const DrawEdge& a, const DrawEdge& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });

  for (const auto& grp : cg.boundary_groups) {
    DrawBoundary b{index.at(grp.anchor), grp.direction, {}};
    for (auto m : grp.excluded_members) b.members.push_back(g.nodes[m].id);
    dg.boundary.push_back(std::move(b));
  }
  std::stable_sort(dg.boundary.begin(), dg.boundary.end(), [](const DrawBoundary& a, const DrawBoundary& b) {
    return std::tie(a.anchor, a.direction) < std::tie(b.anchor, b.direction);
  });
  return dg;
}

/// Drawn graph for an uncollapsed filtered view.
inline DrawGraph build_draw_graph(const Cfg& g, const FilteredGraph& fg, const RenderSection& r) {
  auto cg = apply_collapse(g, fg, CollapsePlan{});
  return build_draw_graph(g, *cg, r);
}

// ---------------------------------------------------------------------------
// Cluster hierarchy shared by layout and dot output.

struct Cluster {
  enum Kind { function, loop };
  Kind kind = loop;
  std::size_t index = 0;  ///< into DrawGraph::functions or DrawGraph::loops
  std::vector<std::size_t> members;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  int depth = 0;
};

struct ClusterTree {
  std::vector<Cluster> clusters;
  std::vector<std::size_t> roots;
  std::vector<std::optional<std::size_t>> owner;  ///< innermost cluster per drawn node, proxies included
  std::vector<std::size_t> dropped_functions;     ///< functions whose grouping conflicts with a loop
};

/// Nests loops and (when boundaries are shown) functions by containment. A
/// function that partially overlaps a loop is left out, with a warning.
inline ClusterTree build_cluster_tree(const DrawGraph& dg, Diagnostics* diags = nullptr) {
  ClusterTree tree;
  // A loop conflicts with a function when it holds both members and non-members of it.
  auto spans = [](const std::vector<std::size_t>& fn, const std::vector<std::size_t>& loop) {
    std::vector<std::size_t> common;
    std::set_intersection(fn.begin(), fn.end(), loop.begin(), loop.end(), std::back_inserter(common));
    return !common.empty() && common.size() != loop.size();
  };
  if (dg.options.show_function_boundaries) {
    for (std::size_t f = 0; f < dg.functions.size(); ++f) {
      const auto& fn = dg.functions[f];
      std::optional<std::size_t> conflict;
      for (std::size_t l = 0; l < dg.loops.size() && !conflict; ++l)
        if (spans(fn.members, dg.loops[l].members)) conflict = l;
      if (conflict) {
        tree.dropped_functions.push_back(f);
        if (diags)
          diags->push_back(make_warning(
              "/rendering/function/showBoundaries",
              fmt::format("loop \"{}\" crosses the boundary of function \"{}\"; the function is not grouped",
                          dg.loops[*conflict].id, fn.name)));
        continue;
      }
      tree.clusters.push_back({Cluster::function, f, fn.members, std::nullopt, {}, 0});
    }
  }
  for (std::size_t l = 0; l < dg.loops.size(); ++l)
    tree.clusters.push_back({Cluster::loop, l, dg.loops[l].members, std::nullopt, {}, 0});

  std::vector<std::size_t> order(tree.clusters.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t c) {
    const auto& cl = tree.clusters[c];
    const int loop_depth = cl.kind == Cluster::loop ? dg.loops[cl.index].depth : -1;
    return std::make_tuple(-static_cast<long>(cl.members.size()), static_cast<int>(cl.kind), loop_depth, cl.index);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  tree.owner.assign(dg.nodes.size(), std::nullopt);
  for (auto c : order) {
    auto& cl = tree.clusters[c];
    cl.parent = tree.owner[cl.members.front()];
    for (auto m : cl.members) tree.owner[m] = c;
  }
  for (auto c : order) {
    auto& cl = tree.clusters[c];
    if (cl.parent)
      tree.clusters[*cl.parent].children.push_back(c);
    else
      tree.roots.push_back(c);
  }
  for (auto c : order) {
    auto& cl = tree.clusters[c];
    cl.depth = cl.parent ? tree.clusters[*cl.parent].depth + 1 : 0;
  }

  // Proxies sit in the innermost cluster shared by all of their neighbours.
  auto lca = [&](std::optional<std::size_t> a, std::optional<std::size_t> b) -> std::optional<std::size_t> {
    while (a && b && *a != *b) {
      if (tree.clusters[*a].depth >= tree.clusters[*b].depth)
        a = tree.clusters[*a].parent;
      else
        b = tree.clusters[*b].parent;
    }
    return a && b ? a : std::nullopt;
  };
  std::vector<std::vector<std::size_t>> neighbours(dg.nodes.size());
  for (const auto& e : dg.edges) {
    neighbours[e.source].push_back(e.target);
    neighbours[e.target].push_back(e.source);
  }
  for (std::size_t v = 0; v < dg.nodes.size(); ++v) {
    if (dg.nodes[v].kind != DrawKind::proxy || tree.owner[v] || neighbours[v].empty()) continue;
    std::optional<std::size_t> shared = tree.owner[neighbours[v].front()];
    for (auto w : neighbours[v]) {
      if (dg.nodes[w].kind == DrawKind::proxy) {
        shared.reset();
        break;
      }
      shared = lca(shared, tree.owner[w]);
    }
    if (shared) tree.owner[v] = shared;
  }
  auto by_first_member = [&](std::size_t a, std::size_t b) {
    return std::make_pair(tree.clusters[a].members.front(), a) < std::make_pair(tree.clusters[b].members.front(), b);
  };
  std::sort(tree.roots.begin(), tree.roots.end(), by_first_member);
  for (auto& cl : tree.clusters) std::sort(cl.children.begin(), cl.children.end(), by_first_member);
  return tree;
}

inline std::string cluster_name(const DrawGraph& dg, const Cluster& c) {
  return c.kind == Cluster::loop ? "cluster_loop_" + dg.loops[c.index].id
                                 : "cluster_fn_" + dg.functions[c.index].id;
}

// ---------------------------------------------------------------------------
// Serialization.

inline nlohmann::json draw_graph_to_json(const DrawGraph& dg) {
  using nlohmann::json;
  json j = json::object();
  json nodes = json::array();
  for (const auto& n : dg.nodes) {
    json o = {{"id", n.id}, {"kind", n.kind == DrawKind::block ? "block" : "proxy"}, {"label", n.label}};
    o["style"] = n.style;
    if (n.css_class) o["class"] = *n.css_class;
    if (n.function) o["function"] = *n.function;
    if (n.function_name) o["collapsedFunction"] = *n.function_name;
    nodes.push_back(std::move(o));
  }
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& e : dg.edges) {
    json o = {{"source", dg.nodes[e.source].id}, {"target", dg.nodes[e.target].id}, {"backEdge", e.back_edge}};
    if (e.loop) o["loop"] = dg.loops[*e.loop].id;
    if (e.label) o["label"] = *e.label;
    o["style"] = e.style;
    if (e.css_class) o["class"] = *e.css_class;
    edges.push_back(std::move(o));
  }
  j["edges"] = std::move(edges);
  json loops = json::array();
  for (const auto& l : dg.loops) {
    json o = {{"id", l.id}};
    if (l.header) o["header"] = dg.nodes[*l.header].id;
    json members = json::array();
    for (auto m : l.members) members.push_back(dg.nodes[m].id);
    o["members"] = std::move(members);
    if (l.parent) o["parent"] = dg.loops[*l.parent].id;
    loops.push_back(std::move(o));
  }
  j["loops"] = std::move(loops);
  json functions = json::array();
  for (const auto& f : dg.functions) {
    json members = json::array();
    for (auto m : f.members) members.push_back(dg.nodes[m].id);
    functions.push_back({{"id", f.id}, {"name", f.name}, {"members", std::move(members)}});
  }
  j["functions"] = std::move(functions);
  json boundary = json::array();
  for (const auto& b : dg.boundary)
    boundary.push_back(
        {{"anchor", dg.nodes[b.anchor].id}, {"direction", to_string(b.direction)}, {"members", b.members}});
  j["boundary"] = std::move(boundary);
  j["collapsedFunctions"] = dg.collapsed_functions;
  return j;
}

/// Pre-collapse filter result: included nodes, induced edges and boundary groups.
inline nlohmann::json filtered_to_json(const Cfg& g, const FilteredGraph& fg) {
  using nlohmann::json;
  json j = json::object();
  json nodes = json::array();
  for (auto v : fg.included) {
    json o = {{"id", g.nodes[v].id}};
    if (!fg.hop_distance.empty() && fg.hop_distance[v]) o["hops"] = *fg.hop_distance[v];
    o["seed"] = std::binary_search(fg.seeds.begin(), fg.seeds.end(), v);
    nodes.push_back(std::move(o));
  }
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (auto e : fg.induced_edges)
    edges.push_back({{"source", g.nodes[g.edges[e].source].id}, {"target", g.nodes[g.edges[e].target].id}});
  j["edges"] = std::move(edges);
  json groups = json::array();
  for (const auto& b : fg.boundary_groups) {
    json members = json::array();
    for (auto m : b.excluded_members) members.push_back(g.nodes[m].id);
    groups.push_back({{"anchor", g.nodes[b.anchor].id},
                      {"direction", to_string(b.direction)},
                      {"count", b.count()},
                      {"members", std::move(members)}});
  }
  j["boundaryGroups"] = std::move(groups);
  return j;
}

enum class DotFlavor { plain, annotated };

inline std::string boundary_node_id(const DrawGraph& dg, const DrawBoundary& b) {
  return fmt::format("boundary_{}_{}", b.direction == Direction::incoming ? "in" : "out", dg.nodes[b.anchor].id);
}

/// Dot form of the drawn graph. Functions and loops become clusters. The
/// annotated flavor adds the hints an external dot engine needs to draw loops
/// the same way the native layout does: filled loop clusters, invisible
/// header-to-member edges, and back edges leaving and entering on the east
/// port without constraining the ranking.
inline DotGraph draw_graph_to_dot(const DrawGraph& dg, DotFlavor flavor) {
  DotGraph d;
  d.directed = true;
  for (const auto& n : dg.nodes) {
    DotNode dn{n.id, n.style};
    dn.attrs["label"] = n.label;
    if (n.css_class) dn.attrs["class"] = *n.css_class;
    d.nodes.push_back(std::move(dn));
  }
  for (const auto& b : dg.boundary) {
    DotNode dn{boundary_node_id(dg, b), {{"shape", "circle"}, {"width", "0.15"}, {"fixedsize", "true"}}};
    dn.attrs["label"] = b.count() > 1 ? std::to_string(b.count()) : "";
    d.nodes.push_back(std::move(dn));
  }
  for (const auto& e : dg.edges) {
    DotEdge de{dg.nodes[e.source].id, dg.nodes[e.target].id, e.style, std::nullopt, std::nullopt};
    if (e.label) de.attrs["label"] = *e.label;
    if (e.css_class) de.attrs["class"] = *e.css_class;
    if (e.back_edge && flavor == DotFlavor::annotated) {
      de.source_port = "e";
      de.target_port = "e";
      de.attrs["constraint"] = "false";
    }
    d.edges.push_back(std::move(de));
  }
  if (flavor == DotFlavor::annotated) {
    for (const auto& l : dg.loops) {
      if (!l.header) continue;
      for (auto m : l.members) {
        if (m == *l.header) continue;
        d.edges.push_back({dg.nodes[*l.header].id, dg.nodes[m].id, {{"style", "invis"}, {"weight", "10"}},
                           std::nullopt, std::nullopt});
      }
    }
  }
  for (const auto& b : dg.boundary) {
    DotEdge de{boundary_node_id(dg, b), dg.nodes[b.anchor].id, {{"style", "dashed"}, {"arrowhead", "none"}},
               std::nullopt, std::nullopt};
    if (b.direction == Direction::outgoing) std::swap(de.source, de.target);
    d.edges.push_back(std::move(de));
  }

  const auto tree = build_cluster_tree(dg);
  auto make = [&](auto&& self, std::size_t c) -> DotSubgraph {
    const auto& cl = tree.clusters[c];
    DotSubgraph s;
    s.name = cluster_name(dg, cl);
    if (cl.kind == Cluster::function) {
      s.attrs["label"] = dg.functions[cl.index].name;
      s.attrs["style"] = "solid";
    } else {
      s.attrs["label"] = "";
      if (flavor == DotFlavor::annotated && dg.options.show_loop_background) {
        s.attrs["style"] = "filled";
        s.attrs["fillcolor"] = dg.options.loop_background_color;
        s.attrs["color"] = dg.options.loop_background_color;
      }
    }
    for (auto m : cl.members)
      if (tree.owner[m] == c) s.nodes.push_back(dg.nodes[m].id);
    for (auto child : cl.children) s.subgraphs.push_back(self(self, child));
    return s;
  };
  for (auto r : tree.roots) d.subgraphs.push_back(make(make, r));
  return d;
}

}  // namespace cfgconf
