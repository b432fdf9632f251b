#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "cfgconf/diagnostics.hpp"
#include "cfgconf/filter.hpp"
#include "cfgconf/graph_model.hpp"
#include "cfgconf/spec_model.hpp"

namespace cfgconf {

enum class CollapseReason { always_list, degree_heuristic };
enum class ExemptReason { never_list, contains_loop, too_large };

inline const char* to_string(CollapseReason r) {
  return r == CollapseReason::always_list ? "always_list" : "degree_heuristic";
}

inline const char* to_string(ExemptReason r) {
  switch (r) {
    case ExemptReason::never_list: return "never_list";
    case ExemptReason::contains_loop: return "contains_loop";
    case ExemptReason::too_large: return "too_large";
  }
  return "";
}

/// Function indices refer to Cfg::functions. Functions with no included node
/// appear in neither map.
struct CollapsePlan {
  std::vector<std::size_t> collapsed_functions;  ///< ascending, i.e. function id order
  std::map<std::size_t, CollapseReason> reason;
  std::map<std::size_t, ExemptReason> exempted;

  bool collapses(std::size_t fn) const { return reason.count(fn) != 0; }
  bool operator==(const CollapsePlan&) const = default;
};

/// A drawn vertex: either a surviving CFG node or a proxy.
struct GraphRef {
  enum Kind { node, proxy };
  Kind kind = node;
  std::size_t index = 0;

  auto operator<=>(const GraphRef&) const = default;
};

/// One call site of a collapsed function.
struct Proxy {
  std::string id;
  std::size_t function = 0;
  std::optional<std::size_t> call_edge;    ///< Cfg edge from outside into the function
  std::optional<std::size_t> return_edge;  ///< Cfg edge from the function back out

  bool operator==(const Proxy&) const = default;
};

struct RewrittenEdge {
  GraphRef source;
  GraphRef target;
  std::size_t original = 0;  ///< Cfg edge index

  bool operator==(const RewrittenEdge&) const = default;
};

struct AnchoredGroup {
  GraphRef anchor;
  Direction direction = Direction::incoming;
  std::vector<std::size_t> excluded_members;

  std::size_t count() const { return excluded_members.size(); }
  bool operator==(const AnchoredGroup&) const = default;
};

struct CollapsedGraph {
  std::vector<std::size_t> surviving;      ///< ascending node indices
  std::vector<std::size_t> removed_nodes;  ///< ascending node indices
  std::vector<std::size_t> collapsed_functions;
  std::vector<Proxy> proxies;
  std::vector<RewrittenEdge> edges;
  std::vector<AnchoredGroup> boundary_groups;

  bool operator==(const CollapsedGraph&) const = default;
};

namespace detail {

inline std::optional<std::size_t> find_function(const Cfg& g, const std::string& name) {
  for (std::size_t i = 0; i < g.functions.size(); ++i)
    if (g.functions[i].name == name || g.functions[i].id == name) return i;
  return std::nullopt;
}

}  // namespace detail

/// Chooses which functions to collapse. Precedence, strongest first: never
/// list, always list, loop exemption, size cap, degree thresholds.
inline Result<CollapsePlan> plan_collapse(const Cfg& g, const FilteredGraph& fg, const CollapsingRules& rules) {
  Result<CollapsePlan> out;
  auto& diags = out.diagnostics;
  CollapsePlan plan;
  const std::string base = "/rendering/function/collapsingRules";

  std::vector<std::vector<std::size_t>> included_members(g.functions.size());
  for (auto v : fg.included)
    if (g.nodes[v].function) included_members[*g.nodes[v].function].push_back(v);

  auto resolve_list = [&](const std::vector<std::string>& names, const std::string& key) {
    std::vector<bool> listed(g.functions.size(), false);
    for (std::size_t i = 0; i < names.size(); ++i) {
      auto fn = detail::find_function(g, names[i]);
      const auto path = join_pointer(join_pointer(base, key), i);
      if (!fn)
        diags.push_back(make_warning(path, fmt::format("no function named \"{}\"", names[i])));
      else if (included_members[*fn].empty())
        diags.push_back(
            make_warning(path, fmt::format("function \"{}\" has no nodes in the filtered graph", names[i])));
      else
        listed[*fn] = true;
    }
    return listed;
  };
  const auto never = resolve_list(rules.never_collapse, "neverCollapseList");
  const auto always = resolve_list(rules.always_collapse, "alwaysCollapseList");
  const auto in_loop = loop_member_mask(g);

  for (std::size_t f = 0; f < g.functions.size(); ++f) {
    const auto& members = included_members[f];
    if (members.empty()) continue;
    const bool has_loop = std::any_of(members.begin(), members.end(), [&](std::size_t v) { return in_loop[v]; });
    if (never[f]) {
      plan.exempted[f] = ExemptReason::never_list;
      continue;
    }
    if (always[f]) {
      if (has_loop)
        diags.push_back(make_warning(join_pointer(base, "alwaysCollapseList"),
                                     fmt::format("function \"{}\" contains loop nodes but is collapsed because "
                                                 "it is listed in alwaysCollapseList",
                                                 g.functions[f].name)));
      plan.reason[f] = CollapseReason::always_list;
      continue;
    }
    if (has_loop) {
      plan.exempted[f] = ExemptReason::contains_loop;
      continue;
    }
    if (rules.max_collapse_size) {
      const auto& cap = *rules.max_collapse_size;
      const auto n = static_cast<double>(members.size());
      const bool too_large = cap.percent ? n * 100.0 >= cap.value * static_cast<double>(fg.included.size())
                                         : n > cap.value;
      if (too_large) {
        plan.exempted[f] = ExemptReason::too_large;
        continue;
      }
    }
    bool heavy = false;
    for (auto v : members) {
      std::size_t in_count = 0, out_count = 0;
      for (auto e : g.in_edges[v]) {
        auto u = g.edges[e].source;
        if (fg.contains(u) && g.nodes[u].function != f) ++in_count;
      }
      for (auto e : g.out_edges[v]) {
        auto w = g.edges[e].target;
        if (fg.contains(w) && g.nodes[w].function != f) ++out_count;
      }
      if (rules.min_incoming_edges && static_cast<std::int64_t>(in_count) >= *rules.min_incoming_edges) heavy = true;
      if (rules.min_outgoing_edges && static_cast<std::int64_t>(out_count) >= *rules.min_outgoing_edges) heavy = true;
    }
    if (heavy) plan.reason[f] = CollapseReason::degree_heuristic;
  }
  for (const auto& [f, r] : plan.reason) plan.collapsed_functions.push_back(f);
  out.value = std::move(plan);
  return out;
}

/// Replaces each collapsed function by one proxy per call site. Calls and
/// returns are paired in id order within the same external function.
inline Result<CollapsedGraph> apply_collapse(const Cfg& g, const FilteredGraph& fg, const CollapsePlan& plan) {
  Result<CollapsedGraph> out;
  auto& diags = out.diagnostics;
  CollapsedGraph cg;
  cg.collapsed_functions = plan.collapsed_functions;

  auto collapsed_fn = [&](std::size_t v) -> std::optional<std::size_t> {
    const auto& f = g.nodes[v].function;
    if (f && plan.collapses(*f)) return f;
    return std::nullopt;
  };
  for (auto v : fg.included) (collapsed_fn(v) ? cg.removed_nodes : cg.surviving).push_back(v);

  std::map<std::size_t, GraphRef> call_proxy;    // edge -> proxy taking it as call
  std::map<std::size_t, GraphRef> return_proxy;  // edge -> proxy taking it as return
  for (auto f : plan.collapsed_functions) {
    std::vector<std::size_t> calls, returns;
    for (auto e : fg.induced_edges) {
      const auto& edge = g.edges[e];
      auto fs = collapsed_fn(edge.source), ft = collapsed_fn(edge.target);
      if (ft == f && !fs) calls.push_back(e);
      if (fs == f && !ft) returns.push_back(e);
    }
    const auto& nodes = g.nodes;
    std::stable_sort(calls.begin(), calls.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(nodes[g.edges[a].source].id, nodes[g.edges[a].target].id) <
             std::tie(nodes[g.edges[b].source].id, nodes[g.edges[b].target].id);
    });
    std::stable_sort(returns.begin(), returns.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(nodes[g.edges[a].target].id, nodes[g.edges[a].source].id) <
             std::tie(nodes[g.edges[b].target].id, nodes[g.edges[b].source].id);
    });
    std::vector<bool> used(returns.size(), false);
    std::size_t k = 0;
    auto add_proxy = [&](std::optional<std::size_t> call, std::optional<std::size_t> ret) {
      Proxy p{fmt::format("{}#{}", g.functions[f].id, ++k), f, call, ret};
      GraphRef ref{GraphRef::proxy, cg.proxies.size()};
      if (call) call_proxy[*call] = ref;
      if (ret) return_proxy[*ret] = ref;
      cg.proxies.push_back(std::move(p));
    };
    for (auto c : calls) {
      const auto caller_fn = nodes[g.edges[c].source].function;
      std::optional<std::size_t> partner;
      for (std::size_t r = 0; r < returns.size(); ++r) {
        if (used[r] || nodes[g.edges[returns[r]].target].function != caller_fn) continue;
        used[r] = true;
        partner = returns[r];
        break;
      }
      add_proxy(c, partner);
    }
    for (std::size_t r = 0; r < returns.size(); ++r)
      if (!used[r]) add_proxy(std::nullopt, returns[r]);
  }

  for (auto e : fg.induced_edges) {
    const auto& edge = g.edges[e];
    auto fs = collapsed_fn(edge.source), ft = collapsed_fn(edge.target);
    if (!fs && !ft) {
      cg.edges.push_back({{GraphRef::node, edge.source}, {GraphRef::node, edge.target}, e});
    } else if (!fs) {
      cg.edges.push_back({{GraphRef::node, edge.source}, call_proxy.at(e), e});
    } else if (!ft) {
      cg.edges.push_back({return_proxy.at(e), {GraphRef::node, edge.target}, e});
    } else if (*fs != *ft) {
      diags.push_back(make_warning(
          "/rendering/function/collapsingRules",
          fmt::format("edge {} -> {} joins collapsed functions \"{}\" and \"{}\" and is not drawn",
                      g.nodes[edge.source].id, g.nodes[edge.target].id, g.functions[*fs].name,
                      g.functions[*ft].name)));
    }
  }

  for (const auto& grp : fg.boundary_groups) {
    if (!collapsed_fn(grp.anchor)) {
      cg.boundary_groups.push_back({{GraphRef::node, grp.anchor}, grp.direction, grp.excluded_members});
      continue;
    }
    std::optional<GraphRef> target;
    for (std::size_t p = 0; p < cg.proxies.size() && !target; ++p) {
      const auto& proxy = cg.proxies[p];
      if (grp.direction == Direction::incoming && proxy.call_edge && g.edges[*proxy.call_edge].target == grp.anchor)
        target = GraphRef{GraphRef::proxy, p};
      if (grp.direction == Direction::outgoing && proxy.return_edge &&
          g.edges[*proxy.return_edge].source == grp.anchor)
        target = GraphRef{GraphRef::proxy, p};
    }
    if (target) {
      cg.boundary_groups.push_back({*target, grp.direction, grp.excluded_members});
    } else {
      diags.push_back(make_warning(
          "/rendering/function/collapsingRules",
          fmt::format("{} boundary node(s) {} {} were hidden by collapsing \"{}\"", grp.count(),
                      grp.direction == Direction::incoming ? "entering" : "leaving", g.nodes[grp.anchor].id,
                      g.functions[*g.nodes[grp.anchor].function].name)));
    }
  }

  out.value = std::move(cg);
  return out;
}

}  // namespace cfgconf
