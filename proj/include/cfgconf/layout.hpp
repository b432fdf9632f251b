#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "cfgconf/diagnostics.hpp"
#include "cfgconf/draw_graph.hpp"
#include "cfgconf/geometry.hpp"

namespace cfgconf {

/// Pixel metrics and limits. Text metrics assume a monospace face.
struct LayoutConfig {
  double char_width = 8;
  double label_padding = 16;
  double line_height = 16;
  double box_vertical_padding = 12;
  double base_font_size = 13;
  double layer_gap = 60;
  double node_gap = 24;
  double group_gap = 12;
  double hull_padding = 10;
  double hull_nesting_padding = 12;
  double back_edge_gap = 8;
  double function_padding = 8;
  double function_label_height = 16;
  double disc_radius = 5;
  double disc_offset = 18;
  double disc_nudge = 6;
  double stack_offset = 3;
  int sweeps = 8;
  std::size_t exhaustive_layer_limit = 6;
  std::size_t max_drawn_nodes = 2000;
};

struct EdgeRoute {
  std::vector<Point> points;  ///< from the edge's source to its target
  bool back_edge = false;
  bool self_loop = false;
};

struct LoopHull {
  std::vector<Point> polygon;
  int depth = 0;
  double padding = 0;
};

struct DiscPlacement {
  Point center;
  double radius = 0;
  std::size_t count = 0;
  Point stub_end;  ///< point on the anchor box the stub reaches
};

/// One slot in a layer: a drawn node or a dummy on a long edge.
struct LayerItem {
  bool dummy = false;
  std::size_t node = 0;  ///< drawn node, when not a dummy
  std::size_t edge = 0;  ///< drawn edge, when a dummy
  std::optional<std::size_t> cluster;
};

/// Combinatorial layering exposed for checking: items per layer in final
/// order, and the segments between adjacent layers (item-index pairs).
struct LayerStructure {
  std::vector<std::vector<std::size_t>> layers;
  std::vector<std::vector<std::size_t>> initial_layers;
  std::vector<LayerItem> items;
  std::vector<std::pair<std::size_t, std::size_t>> segments;  ///< upper item, lower item
  ClusterTree clusters;
};

struct LayoutGeometry {
  std::vector<Rect> node_boxes;
  std::vector<int> layer_of;
  std::vector<int> order_in_layer;  ///< rank among drawn nodes of the layer
  std::vector<EdgeRoute> edge_routes;
  std::vector<bool> reversed;  ///< per drawn edge: reversed for layering
  std::vector<std::optional<LoopHull>> loop_hulls;
  std::vector<std::optional<Rect>> function_rects;
  std::vector<DiscPlacement> discs;
  double width = 0;
  double height = 0;
  std::size_t initial_crossings = 0;
  std::size_t crossings = 0;
  LayerStructure structure;
};

// ---------------------------------------------------------------------------
// Cycle breaking and layering.

/// Reverses declared back edges, then every retreat edge of an id-ordered DFS
/// over what remains. Self-loops are left alone. Returns per-edge flags.
inline std::vector<bool> break_cycles(const DrawGraph& dg, Diagnostics* diags = nullptr) {
  const std::size_t n = dg.nodes.size();
  std::vector<bool> reversed(dg.edges.size(), false);
  for (std::size_t e = 0; e < dg.edges.size(); ++e)
    if (dg.edges[e].back_edge && dg.edges[e].source != dg.edges[e].target) reversed[e] = true;

  auto tail = [&](std::size_t e) { return reversed[e] ? dg.edges[e].target : dg.edges[e].source; };
  auto head = [&](std::size_t e) { return reversed[e] ? dg.edges[e].source : dg.edges[e].target; };
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t e = 0; e < dg.edges.size(); ++e) {
    if (dg.edges[e].source == dg.edges[e].target) continue;
    out[tail(e)].push_back(e);
    ++indegree[head(e)];
  }
  for (auto& adj : out)
    std::stable_sort(adj.begin(), adj.end(), [&](std::size_t a, std::size_t b) { return head(a) < head(b); });

  enum { white, grey, black };
  std::vector<int> colour(n, white);
  std::vector<std::size_t> flips;
  auto dfs = [&](std::size_t root) {
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    colour[root] = grey;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next == out[v].size()) {
        colour[v] = black;
        stack.pop_back();
        continue;
      }
      const auto e = out[v][next++];
      const auto w = head(e);
      if (colour[w] == grey)
        flips.push_back(e);
      else if (colour[w] == white) {
        colour[w] = grey;
        stack.emplace_back(w, 0);
      }
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0 && colour[v] == white) dfs(v);
  for (std::size_t v = 0; v < n; ++v)
    if (colour[v] == white) dfs(v);
  for (auto e : flips) {
    reversed[e] = !reversed[e];
    if (dg.edges[e].back_edge && diags)
      diags->push_back(make_warning(
          "/data/loops", fmt::format("back edge {} -> {} could not be drawn upward without creating a cycle",
                                     dg.nodes[dg.edges[e].source].id, dg.nodes[dg.edges[e].target].id)));
  }
  return reversed;
}

/// Longest-path layering over the acyclic orientation. Loop headers are kept
/// on their loop's top layer by header-to-member constraints wherever those
/// do not close a cycle.
inline std::vector<int> assign_layers(const DrawGraph& dg, const std::vector<bool>& reversed) {
  const std::size_t n = dg.nodes.size();
  std::vector<std::vector<std::size_t>> succ(n);
  for (std::size_t e = 0; e < dg.edges.size(); ++e) {
    const auto& edge = dg.edges[e];
    if (edge.source == edge.target) continue;
    const auto t = reversed[e] ? edge.target : edge.source;
    const auto h = reversed[e] ? edge.source : edge.target;
    succ[t].push_back(h);
  }
  auto reaches = [&](std::size_t from, std::size_t to) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (v == to) return true;
      for (auto w : succ[v])
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
    }
    return false;
  };
  std::vector<std::size_t> order(dg.loops.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dg.loops[a].depth > dg.loops[b].depth; });
  for (auto l : order) {
    const auto& loop = dg.loops[l];
    if (!loop.header) continue;
    for (auto m : loop.members)
      if (m != *loop.header && !reaches(m, *loop.header)) succ[*loop.header].push_back(m);
  }

  std::vector<std::size_t> indegree(n, 0);
  for (const auto& adj : succ)
    for (auto w : adj) ++indegree[w];
  std::vector<int> layer(n, 0);
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  std::size_t head = 0;
  while (head < ready.size()) {
    auto v = ready[head++];
    for (auto w : succ[v]) {
      layer[w] = std::max(layer[w], layer[v] + 1);
      if (--indegree[w] == 0) ready.push_back(w);
    }
  }
  return layer;
}

// ---------------------------------------------------------------------------
// Crossing reduction.

namespace detail::layout {

struct Ordering {
  const ClusterTree& tree;
  std::vector<LayerItem>& items;
  std::vector<std::string>& tie;  ///< per item; ids for nodes
  std::vector<std::vector<std::size_t>>& layers;
  std::vector<std::vector<std::size_t>>& up;    ///< neighbours in the layer above
  std::vector<std::vector<std::size_t>>& down;  ///< neighbours in the layer below
  std::vector<std::size_t> pos;

  void refresh_positions(std::size_t l) {
    for (std::size_t i = 0; i < layers[l].size(); ++i) pos[layers[l][i]] = i;
  }

  /// Child of `group` on the path from the root to `c`.
  std::optional<std::size_t> child_toward(std::optional<std::size_t> c, std::optional<std::size_t> group) const {
    while (c && tree.clusters[*c].parent != group) c = tree.clusters[*c].parent;
    return c;
  }

  bool within(std::optional<std::size_t> c, std::size_t group) const {
    for (; c; c = tree.clusters[*c].parent)
      if (*c == group) return true;
    return false;
  }

  /// Orders `members` (items of one layer inside `group`) by key, keeping
  /// every cluster contiguous.
  std::vector<std::size_t> arrange(std::optional<std::size_t> group, const std::vector<std::size_t>& members,
                                   const std::vector<double>& key) const {
    struct Unit {
      double key = 0;
      std::string tie;
      std::vector<std::size_t> items;
    };
    std::vector<Unit> units;
    std::map<std::size_t, std::vector<std::size_t>> blocks;
    for (auto it : members) {
      auto c = items[it].cluster;
      if (c == group)
        units.push_back({key[it], tie[it], {it}});
      else
        blocks[*child_toward(c, group)].push_back(it);
    }
    for (auto& [child, block] : blocks) {
      Unit u;
      u.items = arrange(child, block, key);
      double sum = 0;
      for (auto it : u.items) sum += key[it];
      u.key = sum / static_cast<double>(u.items.size());
      u.tie = tie[u.items.front()];
      for (auto it : u.items) u.tie = std::min(u.tie, tie[it]);
      units.push_back(std::move(u));
    }
    std::stable_sort(units.begin(), units.end(),
                     [](const Unit& a, const Unit& b) { return std::tie(a.key, a.tie) < std::tie(b.key, b.tie); });
    std::vector<std::size_t> result;
    for (const auto& u : units) result.insert(result.end(), u.items.begin(), u.items.end());
    return result;
  }

  void order_by_barycenter(std::size_t l, bool use_up) {
    std::vector<double> key(items.size(), 0);
    for (auto it : layers[l]) {
      const auto& nb = use_up ? up[it] : down[it];
      if (nb.empty()) {
        key[it] = static_cast<double>(pos[it]);
        continue;
      }
      double sum = 0;
      for (auto w : nb) sum += static_cast<double>(pos[w]);
      key[it] = sum / static_cast<double>(nb.size());
    }
    layers[l] = arrange(std::nullopt, layers[l], key);
    refresh_positions(l);
  }

  void order_by_id(std::size_t l) {
    std::vector<double> key(items.size(), 0);
    layers[l] = arrange(std::nullopt, layers[l], key);
    refresh_positions(l);
  }

  static std::size_t count_pairs(std::vector<std::pair<std::size_t, std::size_t>>& segs) {
    std::sort(segs.begin(), segs.end());
    std::size_t max_v = 0;
    for (const auto& s : segs) max_v = std::max(max_v, s.second);
    std::vector<std::size_t> fenwick(max_v + 2, 0);
    std::size_t total = 0, seen = 0;
    for (const auto& [u, v] : segs) {
      std::size_t le = 0;
      for (std::size_t i = v + 1; i > 0; i -= i & (~i + 1)) le += fenwick[i];
      total += seen - le;
      for (std::size_t i = v + 1; i < fenwick.size(); i += i & (~i + 1)) ++fenwick[i];
      ++seen;
    }
    return total;
  }

  std::size_t crossings_between(std::size_t l) const {
    std::vector<std::pair<std::size_t, std::size_t>> segs;
    for (auto it : layers[l])
      for (auto w : down[it]) segs.emplace_back(pos[it], pos[w]);
    return count_pairs(segs);
  }

  std::size_t total_crossings() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) total += crossings_between(l);
    return total;
  }

  std::size_t local_crossings(std::size_t l) const {
    std::size_t c = (l + 1 < layers.size()) ? crossings_between(l) : 0;
    return c + (l > 0 ? crossings_between(l - 1) : 0);
  }

  bool respects_clusters(const std::vector<std::size_t>& order) const {
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> span;  // cluster -> (first, count)
    for (std::size_t i = 0; i < order.size(); ++i)
      for (auto c = items[order[i]].cluster; c; c = tree.clusters[*c].parent) {
        auto it = span.try_emplace(*c, i, 0).first;
        ++it->second.second;
        if (it->second.first + it->second.second != i + 1) return false;
      }
    return true;
  }

  /// Exhaustive search over the cluster-respecting permutations of a small
  /// layer. Returns true if the crossing count dropped.
  bool optimise_small_layer(std::size_t l) {
    auto best = layers[l];
    std::size_t best_cost = local_crossings(l);
    if (best_cost == 0) return false;
    auto perm = layers[l];
    std::sort(perm.begin(), perm.end());
    bool improved = false;
    do {
      if (!respects_clusters(perm)) continue;
      layers[l] = perm;
      refresh_positions(l);
      const auto cost = local_crossings(l);
      if (cost < best_cost) {
        best_cost = cost;
        best = perm;
        improved = true;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    layers[l] = best;
    refresh_positions(l);
    return improved;
  }
};

/// Isotonic regression (pool adjacent violators): nondecreasing y closest to
/// `target` in least squares.
inline std::vector<double> isotonic(const std::vector<double>& target) {
  struct Block {
    double sum;
    double count;
  };
  std::vector<Block> blocks;
  for (double t : target) {
    blocks.push_back({t, 1});
    while (blocks.size() > 1) {
      auto& b = blocks[blocks.size() - 1];
      auto& a = blocks[blocks.size() - 2];
      if (a.sum / a.count <= b.sum / b.count) break;
      a.sum += b.sum;
      a.count += b.count;
      blocks.pop_back();
    }
  }
  std::vector<double> out;
  for (const auto& b : blocks)
    for (int i = 0; i < static_cast<int>(b.count); ++i) out.push_back(b.sum / b.count);
  return out;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

}  // namespace detail::layout

inline std::pair<double, double> label_box_size(const DrawNode& n, const LayoutConfig& cfg) {
  const auto lines = label_lines(n.label);
  std::size_t widest = 0;
  for (const auto& l : lines) widest = std::max(widest, display_length(l));
  double scale = 1;
  if (auto it = n.style.find("fontsize"); it != n.style.end()) {
    try {
      const double fs = std::stod(it->second);
      if (fs > 0 && std::isfinite(fs)) scale = fs / cfg.base_font_size;
    } catch (...) {
    }
  }
  const double w = cfg.char_width * scale * static_cast<double>(widest) + cfg.label_padding;
  const double h = cfg.box_vertical_padding + cfg.line_height * scale * static_cast<double>(lines.size());
  return {w, h};
}

/// Lays out a drawn graph. Fails only when the graph exceeds the drawn-node
/// limit.
inline Result<LayoutGeometry> compute_layout(const DrawGraph& dg, const LayoutConfig& cfg = {}) {
  Result<LayoutGeometry> out;
  auto& diags = out.diagnostics;
  const std::size_t n = dg.nodes.size();
  if (n > cfg.max_drawn_nodes) {
    diags.push_back(make_error(
        "/filtering",
        fmt::format("the graph has {} nodes to draw, more than the limit of {}; enable filtering "
                    "(isHopFilterOn with selectedNodes) or raise the limit with --max-drawn-nodes",
                    n, cfg.max_drawn_nodes),
        DiagCode::graph_too_large));
    return out;
  }

  LayoutGeometry geo;
  geo.reversed = break_cycles(dg, &diags);
  geo.layer_of = assign_layers(dg, geo.reversed);
  int layer_count = 0;
  for (auto l : geo.layer_of) layer_count = std::max(layer_count, l + 1);

  auto& st = geo.structure;
  st.clusters = build_cluster_tree(dg, &diags);
  const auto& tree = st.clusters;

  // Items: nodes first, then dummies for every edge spanning several layers.
  std::vector<std::string> tie;
  for (std::size_t v = 0; v < n; ++v) {
    st.items.push_back({false, v, 0, tree.owner[v]});
    tie.push_back(dg.nodes[v].id);
  }
  auto lca = [&](std::optional<std::size_t> a, std::optional<std::size_t> b) -> std::optional<std::size_t> {
    std::vector<std::size_t> chain;
    for (auto c = a; c; c = tree.clusters[*c].parent) chain.push_back(*c);
    for (auto c = b; c; c = tree.clusters[*c].parent)
      if (std::find(chain.begin(), chain.end(), *c) != chain.end()) return c;
    return std::nullopt;
  };
  std::vector<std::vector<std::size_t>> up(n), down(n);
  std::vector<std::vector<std::size_t>> chains(dg.edges.size());
  for (std::size_t e = 0; e < dg.edges.size(); ++e) {
    const auto& edge = dg.edges[e];
    if (edge.source == edge.target || edge.back_edge) continue;
    auto top = geo.reversed[e] ? edge.target : edge.source;
    auto bottom = geo.reversed[e] ? edge.source : edge.target;
    auto& chain = chains[e];
    chain.push_back(top);
    const auto cluster = lca(tree.owner[top], tree.owner[bottom]);
    for (int l = geo.layer_of[top] + 1; l < geo.layer_of[bottom]; ++l) {
      chain.push_back(st.items.size());
      st.items.push_back({true, 0, e, cluster});
      tie.push_back(fmt::format("{}\x1f{}\x1f{:08}", dg.nodes[top].id, dg.nodes[bottom].id, e));
      up.emplace_back();
      down.emplace_back();
    }
    chain.push_back(bottom);
    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
      down[chain[k]].push_back(chain[k + 1]);
      up[chain[k + 1]].push_back(chain[k]);
      st.segments.emplace_back(chain[k], chain[k + 1]);
    }
  }
  std::vector<int> item_layer(st.items.size());
  for (std::size_t v = 0; v < n; ++v) item_layer[v] = geo.layer_of[v];
  for (std::size_t e = 0; e < dg.edges.size(); ++e)
    for (std::size_t k = 1; k + 1 < chains[e].size(); ++k)
      item_layer[chains[e][k]] = geo.layer_of[chains[e].front()] + static_cast<int>(k);

  st.layers.assign(static_cast<std::size_t>(layer_count), {});
  for (std::size_t it = 0; it < st.items.size(); ++it) st.layers[static_cast<std::size_t>(item_layer[it])].push_back(it);

  detail::layout::Ordering ord{tree, st.items, tie, st.layers, up, down, std::vector<std::size_t>(st.items.size())};
  for (std::size_t l = 0; l < st.layers.size(); ++l) ord.order_by_id(l);
  st.initial_layers = st.layers;
  geo.initial_crossings = ord.total_crossings();

  auto best_layers = st.layers;
  std::size_t best = geo.initial_crossings;
  for (int sweep = 0; sweep < cfg.sweeps && best > 0; ++sweep) {
    if (sweep % 2 == 0)
      for (std::size_t l = 1; l < st.layers.size(); ++l) ord.order_by_barycenter(l, true);
    else
      for (std::size_t l = st.layers.size(); l-- > 1;) ord.order_by_barycenter(l - 1, false);
    const auto c = ord.total_crossings();
    if (c < best) {
      best = c;
      best_layers = st.layers;
    }
  }
  st.layers = best_layers;
  for (std::size_t l = 0; l < st.layers.size(); ++l) ord.refresh_positions(l);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t l = 0; l < st.layers.size(); ++l)
      if (st.layers[l].size() > 1 && st.layers[l].size() <= cfg.exhaustive_layer_limit)
        changed = ord.optimise_small_layer(l) || changed;
  }
  geo.crossings = ord.total_crossings();

  geo.order_in_layer.assign(n, 0);
  for (const auto& layer : st.layers) {
    int rank = 0;
    for (auto it : layer)
      if (!st.items[it].dummy) geo.order_in_layer[st.items[it].node] = rank++;
  }

  // Coordinates.
  std::vector<double> width(st.items.size(), 0), height(st.items.size(), 0);
  for (std::size_t v = 0; v < n; ++v) std::tie(width[v], height[v]) = label_box_size(dg.nodes[v], cfg);
  std::vector<double> layer_top(st.layers.size(), 0), layer_height(st.layers.size(), 0);
  double y = 0;
  for (std::size_t l = 0; l < st.layers.size(); ++l) {
    for (auto it : st.layers[l]) layer_height[l] = std::max(layer_height[l], height[it]);
    layer_top[l] = y;
    y += layer_height[l] + cfg.layer_gap;
  }
  auto separation = [&](std::size_t a, std::size_t b) {
    std::size_t borders = 0;
    for (auto c = st.items[a].cluster; c; c = tree.clusters[*c].parent)
      if (!ord.within(st.items[b].cluster, *c)) ++borders;
    for (auto c = st.items[b].cluster; c; c = tree.clusters[*c].parent)
      if (!ord.within(st.items[a].cluster, *c)) ++borders;
    return width[a] / 2 + cfg.node_gap + cfg.group_gap * static_cast<double>(borders) + width[b] / 2;
  };
  std::vector<double> cx(st.items.size(), 0);
  for (const auto& layer : st.layers)
    for (std::size_t i = 1; i < layer.size(); ++i) cx[layer[i]] = cx[layer[i - 1]] + separation(layer[i - 1], layer[i]);
  auto place_layer = [&](std::size_t l, bool use_up) {
    const auto& layer = st.layers[l];
    if (layer.empty()) return;
    std::vector<double> offset(layer.size(), 0), target(layer.size());
    for (std::size_t i = 1; i < layer.size(); ++i) offset[i] = offset[i - 1] + separation(layer[i - 1], layer[i]);
    for (std::size_t i = 0; i < layer.size(); ++i) {
      const auto& nb = use_up ? up[layer[i]] : down[layer[i]];
      double desired = cx[layer[i]];
      if (!nb.empty()) {
        std::vector<double> xs;
        for (auto w : nb) xs.push_back(cx[w]);
        desired = detail::layout::median(xs);
      }
      target[i] = desired - offset[i];
    }
    const auto fitted = detail::layout::isotonic(target);
    for (std::size_t i = 0; i < layer.size(); ++i) cx[layer[i]] = fitted[i] + offset[i];
  };
  for (std::size_t l = 1; l < st.layers.size(); ++l) place_layer(l, true);
  for (std::size_t l = st.layers.size(); l-- > 1;) place_layer(l - 1, false);

  std::vector<int> nest_height(dg.loops.size(), 0);
  {
    std::vector<std::size_t> order(dg.loops.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dg.loops[a].depth > dg.loops[b].depth; });
    for (auto l : order)
      if (auto p = dg.loops[l].parent) nest_height[*p] = std::max(nest_height[*p], nest_height[l] + 1);
  }
  auto hull_pad = [&](std::size_t loop) { return cfg.hull_padding + cfg.hull_nesting_padding * nest_height[loop]; };

  // Keep foreign items clear of every cluster's full horizontal extent (hull,
  // back-edge lanes, function frame) across the layers the cluster spans.
  {
    const std::size_t items = st.items.size();
    const std::size_t nc = tree.clusters.size();
    auto lo = [&](std::size_t c) { return items + 2 * c; };
    auto hi = [&](std::size_t c) { return items + 2 * c + 1; };
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(items + 2 * nc);
    std::vector<std::size_t> lanes(dg.loops.size(), 0);
    for (const auto& e : dg.edges)
      if (e.back_edge && e.loop) ++lanes[*e.loop];
    auto pad_of = [&](std::size_t c) {
      const auto& cl = tree.clusters[c];
      return cl.kind == Cluster::loop ? hull_pad(cl.index) : cfg.function_padding;
    };
    auto right_reach = [&](std::size_t c) {
      const auto& cl = tree.clusters[c];
      return pad_of(c) + (cl.kind == Cluster::loop ? cfg.back_edge_gap * static_cast<double>(lanes[cl.index]) : 0.0);
    };
    for (std::size_t v = 0; v < n; ++v)
      if (auto c = st.items[v].cluster) {
        adj[v].push_back({hi(*c), width[v] / 2 + right_reach(*c)});
        adj[lo(*c)].push_back({v, width[v] / 2 + pad_of(*c)});
      }
    for (std::size_t c = 0; c < nc; ++c)
      if (auto p = tree.clusters[c].parent) {
        adj[hi(c)].push_back({hi(*p), std::max(0.0, right_reach(*p) - pad_of(c)) + 4});
        adj[lo(*p)].push_back({lo(c), std::max(0.0, pad_of(*p) - pad_of(c)) + 4});
      }
    for (const auto& layer : st.layers)
      for (std::size_t i = 1; i < layer.size(); ++i)
        adj[layer[i - 1]].push_back({layer[i], separation(layer[i - 1], layer[i])});

    auto reaches = [&](std::size_t from, std::size_t to) {
      std::vector<char> seen(adj.size(), 0);
      std::vector<std::size_t> stack{from};
      seen[from] = 1;
      while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        if (v == to) return true;
        for (const auto& [w, d] : adj[v])
          if (!seen[w]) {
            seen[w] = 1;
            stack.push_back(w);
          }
      }
      return false;
    };
    auto add_guarded = [&](std::size_t a, std::size_t b, double d) {
      if (!reaches(b, a)) adj[a].push_back({b, d});
    };
    // A neighbour of cluster c's run, lifted to the sibling block that holds it.
    auto block_left = [&](std::size_t f, std::optional<std::size_t> common) -> std::pair<std::size_t, double> {
      if (auto d = ord.child_toward(st.items[f].cluster, common)) return {lo(*d), 0.0};
      return {f, width[f] / 2};
    };
    auto block_right = [&](std::size_t f, std::optional<std::size_t> common) -> std::pair<std::size_t, double> {
      if (auto d = ord.child_toward(st.items[f].cluster, common)) return {hi(*d), 0.0};
      return {f, width[f] / 2};
    };
    for (std::size_t c = 0; c < nc; ++c) {
      const auto parent = tree.clusters[c].parent;
      for (const auto& layer : st.layers) {
        std::optional<std::size_t> first, last;
        for (std::size_t i = 0; i < layer.size(); ++i)
          if (ord.within(st.items[layer[i]].cluster, c)) {
            if (!first) first = i;
            last = i;
          }
        if (!first) continue;
        if (*last + 1 < layer.size()) {
          const auto f = layer[*last + 1];
          if (ord.within(st.items[f].cluster, parent ? *parent : nc) || !parent) {
            auto [b, w] = block_left(f, parent);
            add_guarded(hi(c), b, w + cfg.group_gap);
          }
        }
        if (*first > 0) {
          const auto f = layer[*first - 1];
          if (ord.within(st.items[f].cluster, parent ? *parent : nc) || !parent) {
            auto [b, w] = block_right(f, parent);
            add_guarded(b, lo(c), w + cfg.group_gap);
          }
        }
      }
    }

    std::vector<std::size_t> indegree(adj.size(), 0);
    for (const auto& out_edges : adj)
      for (const auto& [w, d] : out_edges) ++indegree[w];
    std::vector<double> pos(adj.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t it = 0; it < items; ++it) pos[it] = cx[it];
    std::vector<std::size_t> queue;
    for (std::size_t v = 0; v < adj.size(); ++v)
      if (indegree[v] == 0) queue.push_back(v);
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const auto v = queue[qi];
      for (const auto& [w, d] : adj[v]) {
        pos[w] = std::max(pos[w], pos[v] + d);
        if (--indegree[w] == 0) queue.push_back(w);
      }
    }
    for (std::size_t it = 0; it < items; ++it) cx[it] = pos[it];
  }

  geo.node_boxes.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto l = static_cast<std::size_t>(geo.layer_of[v]);
    geo.node_boxes[v] = {cx[v] - width[v] / 2, layer_top[l], width[v], height[v]};
  }
  auto item_mid = [&](std::size_t it) {
    const auto l = static_cast<std::size_t>(item_layer[it]);
    return Point{cx[it], layer_top[l] + layer_height[l] / 2};
  };

  // Loop hulls, padded more for loops that enclose other loops.
  std::vector<std::size_t> loop_cluster(dg.loops.size(), 0);
  for (std::size_t c = 0; c < tree.clusters.size(); ++c)
    if (tree.clusters[c].kind == Cluster::loop) loop_cluster[tree.clusters[c].index] = c;
  geo.loop_hulls.assign(dg.loops.size(), std::nullopt);
  for (std::size_t l = 0; l < dg.loops.size(); ++l) {
    const double pad = hull_pad(l);
    std::vector<Point> corners;
    auto boxed = dg.loops[l].members;
    for (std::size_t v = 0; v < n; ++v)
      if (dg.nodes[v].kind == DrawKind::proxy && ord.within(tree.owner[v], loop_cluster[l])) boxed.push_back(v);
    for (auto m : boxed) {
      const auto r = geo.node_boxes[m].inflated(pad);
      corners.insert(corners.end(), {{r.x, r.y}, {r.right(), r.y}, {r.right(), r.bottom()}, {r.x, r.bottom()}});
    }
    geo.loop_hulls[l] = LoopHull{convex_hull(corners), dg.loops[l].depth, pad};
  }
  auto hull_right = [&](std::size_t l) {
    double x = -std::numeric_limits<double>::infinity();
    for (const auto& p : geo.loop_hulls[l]->polygon) x = std::max(x, p.x);
    return x;
  };

  // Edge routes.
  geo.edge_routes.resize(dg.edges.size());
  std::map<std::size_t, int> back_edges_seen;
  for (std::size_t e = 0; e < dg.edges.size(); ++e) {
    const auto& edge = dg.edges[e];
    auto& route = geo.edge_routes[e];
    route.back_edge = edge.back_edge;
    const auto& sb = geo.node_boxes[edge.source];
    const auto& tb = geo.node_boxes[edge.target];
    if (edge.back_edge && edge.loop) {
      const int k = back_edges_seen[*edge.loop]++;
      const double x = hull_right(*edge.loop) + cfg.back_edge_gap * (k + 1);
      if (edge.source == edge.target) {
        route.self_loop = true;
        route.points = {{sb.right(), sb.cy() - 4}, {x, sb.cy() - 4}, {x, sb.cy() + 4}, {sb.right(), sb.cy() + 4}};
      } else {
        route.points = {{sb.right(), sb.cy()}, {x, sb.cy()}, {x, tb.cy()}, {tb.right(), tb.cy()}};
      }
      continue;
    }
    if (edge.source == edge.target) {
      route.self_loop = true;
      const double x = sb.right() + 14;
      route.points = {{sb.right(), sb.cy() - 6}, {x, sb.cy() - 6}, {x, sb.cy() + 6}, {sb.right(), sb.cy() + 6}};
      continue;
    }
    const auto& chain = chains[e];
    std::vector<Point> pts;
    const auto& top = geo.node_boxes[st.items[chain.front()].node];
    const auto& bottom = geo.node_boxes[st.items[chain.back()].node];
    pts.push_back({top.cx(), top.bottom()});
    for (std::size_t k = 1; k + 1 < chain.size(); ++k) pts.push_back(item_mid(chain[k]));
    pts.push_back({bottom.cx(), bottom.y});
    if (geo.reversed[e]) {
      std::reverse(pts.begin(), pts.end());
      pts.front() = {sb.cx(), sb.y};
      pts.back() = {tb.cx(), tb.bottom()};
    }
    route.points = std::move(pts);
  }

  // Function rectangles around member boxes and the hulls of loops inside.
  geo.function_rects.assign(dg.functions.size(), std::nullopt);
  for (const auto& cl : tree.clusters) {
    if (cl.kind != Cluster::function) continue;
    std::optional<Rect> box;
    auto grow = [&](const Rect& r) { box = box ? bounding_box(*box, r) : r; };
    const auto self_index = static_cast<std::size_t>(&cl - tree.clusters.data());
    for (std::size_t v = 0; v < n; ++v)
      if (ord.within(tree.owner[v], self_index)) grow(geo.node_boxes[v]);
    auto add_loops = [&](auto&& self, std::size_t c) -> void {
      for (auto child : tree.clusters[c].children) {
        const auto& sub = tree.clusters[child];
        if (sub.kind == Cluster::loop) {
          for (const auto& p : geo.loop_hulls[sub.index]->polygon) grow({p.x, p.y, 0, 0});
          for (std::size_t e = 0; e < dg.edges.size(); ++e)
            if (dg.edges[e].back_edge && dg.edges[e].loop == sub.index)
              for (const auto& p : geo.edge_routes[e].points) grow({p.x, p.y, 0, 0});
        }
        self(self, child);
      }
    };
    add_loops(add_loops, self_index);
    Rect r = box->inflated(cfg.function_padding);
    r.y -= cfg.function_label_height;
    r.h += cfg.function_label_height;
    geo.function_rects[cl.index] = r;
  }

  // Boundary discs.
  for (const auto& b : dg.boundary) {
    const auto& anchor = geo.node_boxes[b.anchor];
    const double reach = cfg.disc_radius + (b.count() > 1 ? cfg.stack_offset : 0);
    const double cy = b.direction == Direction::incoming ? anchor.y - cfg.disc_offset : anchor.bottom() + cfg.disc_offset;
    auto clear = [&](double x) {
      const Rect r{x - reach, cy - reach, 2 * reach, 2 * reach};
      for (const auto& box : geo.node_boxes)
        if (box.overlaps(r)) return false;
      for (const auto& d : geo.discs) {
        const double rr = d.radius + (d.count > 1 ? cfg.stack_offset : 0);
        if (std::abs(d.center.x - x) < rr + reach && std::abs(d.center.y - cy) < rr + reach) return false;
      }
      return true;
    };
    double x = anchor.cx();
    for (int step = 1; step <= 200 && !clear(x); ++step) {
      const double dx = cfg.disc_nudge * ((step + 1) / 2);
      x = anchor.cx() + (step % 2 ? dx : -dx);
    }
    const Point stub{anchor.cx(), b.direction == Direction::incoming ? anchor.y : anchor.bottom()};
    geo.discs.push_back({{x, cy}, cfg.disc_radius, b.count(), stub});
  }

  // Translate so the drawing starts at the origin.
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  auto extend = [&](double x0, double y0, double x1, double y1) {
    min_x = std::min(min_x, x0);
    min_y = std::min(min_y, y0);
    max_x = std::max(max_x, x1);
    max_y = std::max(max_y, y1);
  };
  for (const auto& r : geo.node_boxes) extend(r.x, r.y, r.right(), r.bottom());
  for (const auto& h : geo.loop_hulls)
    for (const auto& p : h->polygon) extend(p.x, p.y, p.x, p.y);
  for (const auto& r : geo.function_rects)
    if (r) extend(r->x, r->y, r->right(), r->bottom());
  for (const auto& route : geo.edge_routes)
    for (const auto& p : route.points) extend(p.x, p.y, p.x, p.y);
  for (const auto& d : geo.discs) {
    const double rr = d.radius + (d.count > 1 ? cfg.stack_offset : 0);
    extend(d.center.x - rr, d.center.y - rr, d.center.x + rr, d.center.y + rr);
  }
  if (n == 0) {
    out.value = std::move(geo);
    return out;
  }
  auto shift = [&](Point& p) {
    p.x -= min_x;
    p.y -= min_y;
  };
  for (auto& r : geo.node_boxes) {
    r.x -= min_x;
    r.y -= min_y;
  }
  for (auto& h : geo.loop_hulls)
    for (auto& p : h->polygon) shift(p);
  for (auto& r : geo.function_rects)
    if (r) {
      r->x -= min_x;
      r->y -= min_y;
    }
  for (auto& route : geo.edge_routes)
    for (auto& p : route.points) shift(p);
  for (auto& d : geo.discs) {
    shift(d.center);
    shift(d.stub_end);
  }
  geo.width = max_x - min_x;
  geo.height = max_y - min_y;
  out.value = std::move(geo);
  return out;
}

}  // namespace cfgconf
