#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "cfgconf/diagnostics.hpp"
#include "cfgconf/graph_model.hpp"
#include "cfgconf/spec_model.hpp"

namespace cfgconf {

enum class Direction { incoming, outgoing };

inline const char* to_string(Direction d) { return d == Direction::incoming ? "incoming" : "outgoing"; }

/// Excluded neighbours of one included node in one direction, drawn as a disc
/// (or a stack of discs) next to the anchor.
struct BoundaryGroup {
  std::size_t anchor = 0;
  Direction direction = Direction::incoming;
  std::vector<std::size_t> excluded_members;  ///< ascending node index, i.e. id order

  std::size_t count() const { return excluded_members.size(); }
  bool operator==(const BoundaryGroup&) const = default;
};

/// Node indices refer to the Cfg the graph was filtered from.
struct FilteredGraph {
  std::vector<std::size_t> included;       ///< ascending
  std::vector<std::size_t> induced_edges;  ///< edge indices, ascending
  std::vector<std::size_t> seeds;          ///< ascending
  std::vector<std::size_t> loop_closure;   ///< seeds plus pulled-in loop members, ascending
  std::vector<std::optional<std::size_t>> hop_distance;  ///< per Cfg node; empty when not filtered
  std::vector<BoundaryGroup> boundary_groups;
  std::vector<bool> included_mask;

  bool contains(std::size_t node) const { return node < included_mask.size() && included_mask[node]; }
  bool operator==(const FilteredGraph&) const = default;
};

/// The filter parameters with defaults resolved.
struct FilterParams {
  bool hop_filter_on = false;
  std::vector<std::string> selected_nodes;
  bool loop_filter_on = false;
  std::size_t max_hops = static_cast<std::size_t>(defaults::max_hops);
  std::size_t min_nodes = static_cast<std::size_t>(defaults::min_nodes);
  std::optional<std::size_t> max_nodes;
};

inline FilterParams filter_params(const FilterSection& f) {
  FilterParams p;
  p.hop_filter_on = f.hop_filter_on.value_or(false);
  p.selected_nodes = f.selected_nodes;
  p.loop_filter_on = f.loop_filter_on.value_or(p.hop_filter_on);
  p.max_hops = static_cast<std::size_t>(f.max_hops.value_or(defaults::max_hops));
  p.min_nodes = static_cast<std::size_t>(f.min_nodes.value_or(defaults::min_nodes));
  if (f.max_nodes) p.max_nodes = static_cast<std::size_t>(*f.max_nodes);
  return p;
}

/// Undirected BFS distances from a set of sources.
inline std::vector<std::optional<std::size_t>> undirected_distances(const Cfg& g,
                                                                    const std::vector<std::size_t>& sources) {
  std::vector<std::optional<std::size_t>> dist(g.size());
  std::deque<std::size_t> queue;
  for (auto s : sources) {
    if (dist[s]) continue;
    dist[s] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    auto visit = [&](std::size_t w) {
      if (dist[w]) return;
      dist[w] = *dist[v] + 1;
      queue.push_back(w);
    };
    for (auto e : g.out_edges[v]) visit(g.edges[e].target);
    for (auto e : g.in_edges[v]) visit(g.edges[e].source);
  }
  return dist;
}

/// Excluded neighbours of each included node, grouped per (anchor, direction).
inline std::vector<BoundaryGroup> compute_boundary(const Cfg& g, const FilteredGraph& fg) {
  std::vector<BoundaryGroup> groups;
  for (auto v : fg.included) {
    BoundaryGroup in{v, Direction::incoming, {}};
    for (auto e : g.in_edges[v])
      if (!fg.contains(g.edges[e].source)) in.excluded_members.push_back(g.edges[e].source);
    BoundaryGroup out{v, Direction::outgoing, {}};
    for (auto e : g.out_edges[v])
      if (!fg.contains(g.edges[e].target)) out.excluded_members.push_back(g.edges[e].target);
    for (auto* grp : {&in, &out}) {
      auto& m = grp->excluded_members;
      std::sort(m.begin(), m.end());
      m.erase(std::unique(m.begin(), m.end()), m.end());
      if (!m.empty()) groups.push_back(std::move(*grp));
    }
  }
  return groups;
}

namespace detail {

inline void finish_filtered(const Cfg& g, FilteredGraph& fg) {
  fg.included.clear();
  for (std::size_t v = 0; v < g.size(); ++v)
    if (fg.included_mask[v]) fg.included.push_back(v);
  fg.induced_edges.clear();
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    if (fg.included_mask[g.edges[e].source] && fg.included_mask[g.edges[e].target])
      fg.induced_edges.push_back(e);
  fg.boundary_groups = compute_boundary(g, fg);
}

}  // namespace detail

/// The whole graph as a FilteredGraph, with no boundary.
inline FilteredGraph whole_graph(const Cfg& g, std::vector<std::size_t> seeds = {}) {
  FilteredGraph fg;
  fg.included_mask.assign(g.size(), true);
  fg.seeds = std::move(seeds);
  fg.loop_closure = fg.seeds;
  detail::finish_filtered(g, fg);
  return fg;
}

/// Loop-preserving k-hop filter. Seeds are expanded by every loop they touch
/// (to a fixpoint), then grown breadth-first over the undirected graph.
inline Result<FilteredGraph> apply_filter(const Cfg& g, const FilterParams& p) {
  Result<FilteredGraph> out;
  auto& diags = out.diagnostics;

  std::vector<std::size_t> seeds;
  for (std::size_t i = 0; i < p.selected_nodes.size(); ++i) {
    auto n = g.find(p.selected_nodes[i]);
    if (!n) {
      diags.push_back(make_error(join_pointer("/filtering/selectedNodes", i),
                                 fmt::format("selected node {} is not in the graph", p.selected_nodes[i])));
      continue;
    }
    seeds.push_back(*n);
  }
  if (has_errors(diags)) return out;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  if (!p.hop_filter_on) {
    out.value = whole_graph(g, seeds);
    return out;
  }
  if (p.min_nodes > g.size()) {
    diags.push_back(make_warning(
        "/filtering/minNodes",
        fmt::format("minNodes {} exceeds the graph's {} nodes; the whole graph is shown", p.min_nodes, g.size())));
    out.value = whole_graph(g, seeds);
    out.value->hop_distance = undirected_distances(g, seeds);
    return out;
  }

  FilteredGraph fg;
  fg.seeds = seeds;
  fg.included_mask.assign(g.size(), false);
  for (auto s : seeds) fg.included_mask[s] = true;

  if (p.loop_filter_on) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& loop : g.loop_tree.loops) {
        bool touches = std::any_of(loop.members.begin(), loop.members.end(),
                                   [&](std::size_t m) { return fg.included_mask[m]; });
        if (!touches) continue;
        for (auto m : loop.members)
          if (!fg.included_mask[m]) {
            fg.included_mask[m] = true;
            changed = true;
          }
      }
    }
  }
  for (std::size_t v = 0; v < g.size(); ++v)
    if (fg.included_mask[v]) fg.loop_closure.push_back(v);
  if (p.max_nodes && fg.loop_closure.size() > *p.max_nodes)
    diags.push_back(make_warning(
        "/filtering/maxNodes",
        fmt::format("the seeds and their loops already have {} nodes, more than maxNodes {}; all are kept",
                    fg.loop_closure.size(), *p.max_nodes)));

  fg.hop_distance = undirected_distances(g, fg.loop_closure);

  // Candidates in (distance, id) order; unreachable nodes sort last by id.
  constexpr auto unreachable = std::numeric_limits<std::size_t>::max();
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!fg.included_mask[v]) candidates.emplace_back(fg.hop_distance[v].value_or(unreachable), v);
  std::sort(candidates.begin(), candidates.end());

  std::size_t count = fg.loop_closure.size();
  std::size_t next = 0;
  for (; next < candidates.size(); ++next) {
    if (candidates[next].first > p.max_hops) break;
    if (p.max_nodes && count >= *p.max_nodes) break;
    fg.included_mask[candidates[next].second] = true;
    ++count;
  }
  for (; next < candidates.size() && count < p.min_nodes && !(p.max_nodes && count >= *p.max_nodes);
       ++next) {
    fg.included_mask[candidates[next].second] = true;
    ++count;
  }

  detail::finish_filtered(g, fg);
  out.value = std::move(fg);
  return out;
}

inline Result<FilteredGraph> apply_filter(const Cfg& g, const FilterSection& f) {
  return apply_filter(g, filter_params(f));
}

}  // namespace cfgconf
