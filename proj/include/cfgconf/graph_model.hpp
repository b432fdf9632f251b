#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "cfgconf/diagnostics.hpp"
#include "cfgconf/spec_model.hpp"

namespace cfgconf {

/// Graph data after external files have been merged in.
struct GraphInputs {
  std::vector<NodeDecl> nodes;
  std::vector<EdgeDecl> edges;
  std::vector<LoopDecl> loops;
  std::vector<FunctionDecl> functions;
};

struct Node {
  std::string id;
  std::optional<std::string> label;
  StyleMap style;
  std::optional<std::string> css_class;
  std::optional<std::size_t> function;
};

struct Edge {
  std::size_t source = 0;
  std::size_t target = 0;
  std::optional<std::string> label;
  StyleMap style;
  std::optional<std::string> css_class;
  bool is_back_edge = false;
  std::optional<std::size_t> loop;  ///< loop this edge closes, when a back edge
};

struct Loop {
  std::string id;
  std::size_t header = 0;
  std::vector<std::size_t> members;  ///< sorted node indices, header included
  std::vector<std::size_t> back_edges;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  int depth = 0;
  std::string origin;

  bool contains(std::size_t node) const {
    return std::binary_search(members.begin(), members.end(), node);
  }
};

struct LoopTree {
  std::vector<Loop> loops;
  std::vector<std::size_t> roots;
};

struct FunctionInfo {
  std::string id;
  std::string name;
  std::vector<std::size_t> members;  ///< sorted node indices
};

/// The in-memory control flow graph. Nodes are indexed in lexicographic id
/// order and edges by (source id, target id, declaration order), so equal
/// inputs give equal indices regardless of declaration order.
struct Cfg {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  LoopTree loop_tree;
  std::vector<FunctionInfo> functions;
  std::map<std::string, std::size_t> node_index;
  std::vector<std::vector<std::size_t>> out_edges;
  std::vector<std::vector<std::size_t>> in_edges;

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = node_index.find(id);
    if (it == node_index.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> find_function_by_name(const std::string& name) const {
    for (std::size_t i = 0; i < functions.size(); ++i)
      if (functions[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t size() const { return nodes.size(); }
};

/// Loop declaration with node ids resolved, member sets flattened to include
/// nested declarations.
struct FlatLoop {
  std::string id;
  std::vector<std::size_t> members;
  std::optional<std::size_t> header;
  std::optional<std::vector<std::pair<std::size_t, std::size_t>>> back_edges;
  std::string origin;
};

/// Builds nodes, edges and function membership. Loops are handled by
/// infer_loop_nesting and identify_back_edges.
inline Result<Cfg> build_graph(const GraphInputs& inputs) {
  Result<Cfg> out;
  auto& diags = out.diagnostics;
  Cfg g;

  std::vector<std::size_t> order(inputs.nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return inputs.nodes[a].id < inputs.nodes[b].id;
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& decl = inputs.nodes[order[k]];
    if (g.node_index.count(decl.id)) {
      diags.push_back(make_error(join_pointer(decl.origin, "id"),
                                 fmt::format("duplicate node id \"{}\"", decl.id)));
      continue;
    }
    g.node_index.emplace(decl.id, g.nodes.size());
    g.nodes.push_back({decl.id, decl.label, decl.style, decl.css_class, std::nullopt});
  }

  struct PendingEdge {
    std::size_t decl;
    std::size_t source;
    std::size_t target;
  };
  std::vector<PendingEdge> pending;
  for (std::size_t i = 0; i < inputs.edges.size(); ++i) {
    const auto& e = inputs.edges[i];
    auto s = g.find(e.source);
    auto t = g.find(e.target);
    if (!s)
      diags.push_back(make_error(join_pointer(e.origin, "source"),
                                 fmt::format("edge source \"{}\" is not a declared node", e.source)));
    if (!t)
      diags.push_back(make_error(join_pointer(e.origin, "target"),
                                 fmt::format("edge target \"{}\" is not a declared node", e.target)));
    if (s && t) pending.push_back({i, *s, *t});
  }
  std::stable_sort(pending.begin(), pending.end(), [](const PendingEdge& a, const PendingEdge& b) {
    return std::pair(a.source, a.target) < std::pair(b.source, b.target);
  });
  for (const auto& p : pending) {
    const auto& decl = inputs.edges[p.decl];
    Edge e;
    e.source = p.source;
    e.target = p.target;
    e.label = decl.label;
    e.style = decl.style;
    e.css_class = decl.css_class;
    g.edges.push_back(std::move(e));
  }
  g.out_edges.assign(g.nodes.size(), {});
  g.in_edges.assign(g.nodes.size(), {});
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    g.out_edges[g.edges[i].source].push_back(i);
    g.in_edges[g.edges[i].target].push_back(i);
  }

  std::vector<std::size_t> fn_order(inputs.functions.size());
  std::iota(fn_order.begin(), fn_order.end(), 0);
  auto fn_id = [&](std::size_t i) {
    const auto& f = inputs.functions[i];
    return f.id.value_or(f.name);
  };
  std::stable_sort(fn_order.begin(), fn_order.end(),
                   [&](std::size_t a, std::size_t b) { return fn_id(a) < fn_id(b); });
  std::map<std::string, std::size_t> seen_fn;
  for (auto i : fn_order) {
    const auto& decl = inputs.functions[i];
    FunctionInfo info{fn_id(i), decl.name, {}};
    if (seen_fn.count(info.id)) {
      diags.push_back(make_error(decl.origin, fmt::format("duplicate function id \"{}\"", info.id)));
      continue;
    }
    const auto index = g.functions.size();
    seen_fn.emplace(info.id, index);
    for (std::size_t k = 0; k < decl.nodes.size(); ++k) {
      const auto& id = decl.nodes[k];
      auto n = g.find(id);
      if (!n) {
        diags.push_back(make_error(join_pointer(join_pointer(decl.origin, "nodes"), k),
                                   fmt::format("function \"{}\" lists unknown node {}", decl.name, id)));
        continue;
      }
      auto& node = g.nodes[*n];
      if (node.function && *node.function != index) {
        diags.push_back(make_error(
            join_pointer(join_pointer(decl.origin, "nodes"), k),
            fmt::format("node {} is claimed by functions \"{}\" and \"{}\"", id,
                        g.functions[*node.function].name, decl.name)));
        continue;
      }
      if (!node.function) info.members.push_back(*n);
      node.function = index;
    }
    std::sort(info.members.begin(), info.members.end());
    g.functions.push_back(std::move(info));
  }

  if (!has_errors(diags)) out.value = std::move(g);
  return out;
}

namespace detail {

inline void flatten_loop(const LoopDecl& decl, const Cfg& g, std::vector<FlatLoop>& out,
                         Diagnostics& diags) {
  const auto slot = out.size();
  out.emplace_back();
  std::vector<std::size_t> members;
  for (std::size_t k = 0; k < decl.nodes.size(); ++k) {
    if (auto n = g.find(decl.nodes[k]))
      members.push_back(*n);
    else
      diags.push_back(make_error(join_pointer(join_pointer(decl.origin, "nodes"), k),
                                 fmt::format("loop \"{}\" lists unknown node {}",
                                             decl.id.value_or("?"), decl.nodes[k])));
  }
  for (const auto& child : decl.children) {
    const auto child_slot = out.size();
    flatten_loop(child, g, out, diags);
    const auto& cm = out[child_slot].members;
    members.insert(members.end(), cm.begin(), cm.end());
  }
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());

  FlatLoop& fl = out[slot];
  fl.id = decl.id.value_or(fmt::format("loop{}", slot));
  fl.origin = decl.origin;
  fl.members = std::move(members);
  if (decl.header) {
    if (auto h = g.find(*decl.header))
      fl.header = *h;
    else
      diags.push_back(make_error(join_pointer(decl.origin, "header"),
                                 fmt::format("loop header {} is not a node", *decl.header)));
  }
  if (fl.header && !std::binary_search(fl.members.begin(), fl.members.end(), *fl.header))
    diags.push_back(make_error(join_pointer(decl.origin, "header"),
                               fmt::format("header {} is not a member of loop \"{}\"",
                                           *decl.header, fl.id)));
  if (decl.back_edges) {
    std::vector<std::pair<std::size_t, std::size_t>> be;
    for (std::size_t k = 0; k < decl.back_edges->size(); ++k) {
      const auto& [s, t] = (*decl.back_edges)[k];
      auto si = g.find(s);
      auto ti = g.find(t);
      if (!si || !ti) {
        diags.push_back(make_error(join_pointer(join_pointer(decl.origin, "backEdges"), k),
                                   fmt::format("back edge {} -> {} names an unknown node", s, t)));
        continue;
      }
      be.emplace_back(*si, *ti);
    }
    fl.back_edges = std::move(be);
  }
}

}  // namespace detail

/// Resolves node ids in (possibly nested) loop declarations.
inline Result<std::vector<FlatLoop>> flatten_loops(const std::vector<LoopDecl>& decls, const Cfg& g) {
  Result<std::vector<FlatLoop>> out;
  std::vector<FlatLoop> flat;
  for (const auto& d : decls) detail::flatten_loop(d, g, flat, out.diagnostics);
  if (!has_errors(out.diagnostics)) out.value = std::move(flat);
  return out;
}

/// Builds the loop forest by containment: each loop's parent is the smallest
/// loop strictly containing it (equal member sets nest in declaration
/// order). Loops that overlap without nesting are an error.
inline Result<LoopTree> infer_loop_nesting(const std::vector<FlatLoop>& loops, std::size_t node_count) {
  Result<LoopTree> out;
  auto& diags = out.diagnostics;
  LoopTree tree;
  std::map<std::string, std::size_t> ids;
  for (std::size_t i = 0; i < loops.size(); ++i) {
    if (!ids.emplace(loops[i].id, i).second)
      diags.push_back(make_error(loops[i].origin, fmt::format("duplicate loop id \"{}\"", loops[i].id)));
    if (loops[i].members.empty())
      diags.push_back(make_error(join_pointer(loops[i].origin, "nodes"),
                                 fmt::format("loop \"{}\" has no member nodes", loops[i].id)));
  }
  if (has_errors(diags)) return out;

  for (const auto& l : loops) {
    Loop loop;
    loop.id = l.id;
    loop.members = l.members;
    loop.origin = l.origin;
    loop.header = l.header.value_or(l.members.front());
    tree.loops.push_back(std::move(loop));
  }

  std::vector<std::size_t> order(loops.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return loops[a].members.size() > loops[b].members.size();
  });

  // owner[v] = innermost loop placed so far that contains v
  std::vector<std::optional<std::size_t>> owner(node_count);
  for (auto li : order) {
    auto& loop = tree.loops[li];
    const auto first = owner[loop.members.front()];
    std::optional<std::size_t> conflict;
    for (auto m : loop.members) {
      if (owner[m] != first) {
        conflict = owner[m] ? owner[m] : first;
        break;
      }
    }
    if (conflict) {
      diags.push_back(make_error(
          loop.origin, fmt::format("loops \"{}\" and \"{}\" overlap without nesting",
                                   tree.loops[*conflict].id, loop.id)));
      continue;
    }
    loop.parent = first;
    for (auto m : loop.members) owner[m] = li;
  }
  if (has_errors(diags)) return out;

  for (std::size_t i = 0; i < tree.loops.size(); ++i) {
    if (auto p = tree.loops[i].parent)
      tree.loops[*p].children.push_back(i);
    else
      tree.roots.push_back(i);
  }
  for (auto li : order) {
    auto& loop = tree.loops[li];
    loop.depth = loop.parent ? tree.loops[*loop.parent].depth + 1 : 0;
  }
  out.value = std::move(tree);
  return out;
}

/// Determines each loop's header and marks its back edges. Loops are handled
/// innermost first so an edge closes at most one loop.
inline Result<Cfg> identify_back_edges(Cfg g, LoopTree tree, const std::vector<FlatLoop>& decls) {
  Result<Cfg> out;
  auto& diags = out.diagnostics;
  for (auto& e : g.edges) {
    e.is_back_edge = false;
    e.loop.reset();
  }

  std::vector<std::size_t> order(tree.loops.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tree.loops[a].depth > tree.loops[b].depth;
  });

  for (auto li : order) {
    auto& loop = tree.loops[li];
    loop.back_edges.clear();
    const auto& decl = decls[li];
    std::optional<std::size_t> header = decl.header;

    if (decl.back_edges) {
      for (const auto& [s, t] : *decl.back_edges) {
        if (!loop.contains(s) || !loop.contains(t)) {
          diags.push_back(make_error(
              join_pointer(decl.origin, "backEdges"),
              fmt::format("back edge {} -> {} of loop \"{}\" leaves the loop", g.nodes[s].id,
                          g.nodes[t].id, loop.id)));
          continue;
        }
        if (header && *header != t) {
          diags.push_back(make_error(
              join_pointer(decl.origin, "backEdges"),
              fmt::format("back edge {} -> {} of loop \"{}\" does not target the header {}",
                          g.nodes[s].id, g.nodes[t].id, loop.id, g.nodes[*header].id)));
          continue;
        }
        header = t;
        bool found = false;
        for (auto ei : g.out_edges[s]) {
          auto& e = g.edges[ei];
          if (e.target != t) continue;
          found = true;
          if (e.is_back_edge) continue;
          e.is_back_edge = true;
          e.loop = li;
          loop.back_edges.push_back(ei);
        }
        if (!found)
          diags.push_back(make_error(join_pointer(decl.origin, "backEdges"),
                                     fmt::format("declared back edge {} -> {} is not an edge of the graph",
                                                 g.nodes[s].id, g.nodes[t].id)));
      }
      if (!header) {
        diags.push_back(make_error(decl.origin,
                                   fmt::format("loop \"{}\" declares no usable back edge", loop.id)));
        continue;
      }
      loop.header = *header;
      continue;
    }

    if (!header) {
      std::vector<std::size_t> entries;
      for (auto m : loop.members) {
        for (auto ei : g.in_edges[m]) {
          if (!loop.contains(g.edges[ei].source)) {
            entries.push_back(m);
            break;
          }
        }
      }
      if (entries.size() != 1) {
        std::string names;
        for (auto m : entries) names += (names.empty() ? "" : ", ") + g.nodes[m].id;
        diags.push_back(make_error(
            decl.origin,
            entries.empty()
                ? fmt::format("ambiguous header for loop \"{}\": no member has a predecessor "
                              "outside the loop; declare \"header\"",
                              loop.id)
                : fmt::format("ambiguous header for loop \"{}\": candidates {} all have "
                              "predecessors outside the loop; declare \"header\"",
                              loop.id, names)));
        continue;
      }
      header = entries.front();
    }
    loop.header = *header;
    for (auto ei : g.in_edges[*header]) {
      auto& e = g.edges[ei];
      if (!loop.contains(e.source) || e.is_back_edge) continue;
      e.is_back_edge = true;
      e.loop = li;
      loop.back_edges.push_back(ei);
    }
  }
  // keep back edge lists ordered by edge index
  for (auto& loop : tree.loops) std::sort(loop.back_edges.begin(), loop.back_edges.end());
  if (has_errors(diags)) return out;
  g.loop_tree = std::move(tree);
  out.value = std::move(g);
  return out;
}

/// build_graph + infer_loop_nesting + identify_back_edges.
inline Result<Cfg> build_cfg(const GraphInputs& inputs) {
  Result<Cfg> out;
  auto built = build_graph(inputs);
  append(out.diagnostics, built.diagnostics);
  if (!built) return out;
  auto flat = flatten_loops(inputs.loops, *built);
  append(out.diagnostics, flat.diagnostics);
  if (!flat) return out;
  auto tree = infer_loop_nesting(*flat, built->size());
  append(out.diagnostics, tree.diagnostics);
  if (!tree) return out;
  auto annotated = identify_back_edges(std::move(*built), std::move(*tree), *flat);
  append(out.diagnostics, annotated.diagnostics);
  out.value = std::move(annotated.value);
  return out;
}

/// Innermost loop containing each node, if any.
inline std::vector<std::optional<std::size_t>> innermost_loops(const Cfg& g) {
  std::vector<std::optional<std::size_t>> inner(g.size());
  for (std::size_t i = 0; i < g.loop_tree.loops.size(); ++i) {
    const auto& l = g.loop_tree.loops[i];
    for (auto m : l.members)
      if (!inner[m] || g.loop_tree.loops[*inner[m]].depth < l.depth) inner[m] = i;
  }
  return inner;
}

/// Nodes that belong to at least one declared loop.
inline std::vector<bool> loop_member_mask(const Cfg& g) {
  std::vector<bool> mask(g.size(), false);
  for (const auto& l : g.loop_tree.loops)
    for (auto m : l.members) mask[m] = true;
  return mask;
}

}  // namespace cfgconf
