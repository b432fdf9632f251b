#include <catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace cfgconf;
using namespace cfgconf::testing;

namespace {

FilterParams hops(std::vector<std::string> seeds, std::size_t max_hops, std::size_t min_nodes = 0,
                  bool loops = false, std::optional<std::size_t> max_nodes = std::nullopt) {
  FilterParams p;
  p.hop_filter_on = true;
  p.selected_nodes = std::move(seeds);
  p.loop_filter_on = loops;
  p.max_hops = max_hops;
  p.min_nodes = min_nodes;
  p.max_nodes = max_nodes;
  return p;
}

Cfg path_graph() { return make_cfg({"a", "b", "c", "d", "e"}, {{"a", "b"}, {"b", "c"}, {"c", "d"}, {"d", "e"}}); }

Prepared prepared_sample(const std::string& rel) {
  auto p = prepare_file(source_path(rel));
  REQUIRE(p);
  return std::move(*p);
}

/// main calls printf from three sites; each call returns to the next block.
Cfg printf_graph() {
  return make_cfg({"m1", "m2", "m3", "m4", "m5", "m6", "p1", "p2"},
                  {{"m1", "p1"}, {"p2", "m2"}, {"m2", "m3"}, {"m3", "p1"}, {"p2", "m4"}, {"m4", "m5"},
                   {"m5", "p1"}, {"p2", "m6"}, {"p1", "p2"}},
                  {}, {{"main", {"m1", "m2", "m3", "m4", "m5", "m6"}}, {"printf", {"p1", "p2"}}});
}

CollapsingRules degree_rules(std::int64_t min_in) {
  CollapsingRules r;
  r.min_incoming_edges = min_in;
  r.max_collapse_size = CollapseSize{false, 1000};
  return r;
}

CollapsedGraph collapse_all(const Cfg& g, const CollapsingRules& rules) {
  const auto fg = whole_graph(g);
  auto plan = plan_collapse(g, fg, rules);
  REQUIRE(plan);
  auto cg = apply_collapse(g, fg, *plan);
  REQUIRE(cg);
  return std::move(*cg);
}

std::pair<std::size_t, std::size_t> proxy_degree(const CollapsedGraph& cg, std::size_t proxy) {
  std::size_t in = 0, out = 0;
  for (const auto& e : cg.edges) {
    if (e.target == GraphRef{GraphRef::proxy, proxy}) ++in;
    if (e.source == GraphRef{GraphRef::proxy, proxy}) ++out;
  }
  return {in, out};
}

}  // namespace

// ---------------------------------------------------------------------------
// filter

TEST_CASE("one hop around the middle of a path") {
  const auto g = path_graph();
  auto fg = apply_filter(g, hops({"c"}, 1));
  REQUIRE(fg);
  CHECK(ids_of(g, fg->included) == std::vector<std::string>{"b", "c", "d"});
}

TEST_CASE("loop members enter regardless of hops") {
  const auto g = make_cfg({"n1", "n2", "n3", "n4"}, {{"n1", "n2"}, {"n2", "n3"}, {"n3", "n2"}, {"n2", "n4"}},
                          {{"L", {"n2", "n3"}, std::nullopt, {}}});
  auto fg = apply_filter(g, hops({"n2"}, 0, 0, true));
  REQUIRE(fg);
  CHECK(ids_of(g, fg->included) == std::vector<std::string>{"n2", "n3"});
}

TEST_CASE("loop closure is transitive") {
  const auto g = make_cfg({"a", "b", "c", "d", "e"}, {{"a", "b"}, {"b", "a"}, {"b", "c"}, {"c", "b"}, {"d", "e"}},
                          {{"L1", {"a", "b", "c"}, "a", {}}, {"L2", {"b", "c"}, "b", {}}});
  auto fg = apply_filter(g, hops({"c"}, 0, 0, true));
  REQUIRE(fg);
  CHECK(ids_of(g, fg->included) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("boundary groups of a filtered path") {
  const auto g = path_graph();
  auto fg = apply_filter(g, hops({"c"}, 1));
  REQUIRE(fg);
  REQUIRE(fg->boundary_groups.size() == 2);
  CHECK(g.nodes[fg->boundary_groups[0].anchor].id == "b");
  CHECK(fg->boundary_groups[0].direction == Direction::incoming);
  CHECK(ids_of(g, fg->boundary_groups[0].excluded_members) == std::vector<std::string>{"a"});
  CHECK(g.nodes[fg->boundary_groups[1].anchor].id == "d");
  CHECK(fg->boundary_groups[1].direction == Direction::outgoing);
  CHECK(ids_of(g, fg->boundary_groups[1].excluded_members) == std::vector<std::string>{"e"});
}

TEST_CASE("whole graph has no boundary") {
  const auto g = path_graph();
  CHECK(whole_graph(g).boundary_groups.empty());
  auto fg = apply_filter(g, hops({"c"}, 10));
  REQUIRE(fg);
  CHECK(fg->boundary_groups.empty());
}

TEST_CASE("hop filter off returns the whole graph") {
  const auto g = path_graph();
  FilterParams p;
  p.hop_filter_on = false;
  auto fg = apply_filter(g, p);
  REQUIRE(fg);
  CHECK(fg->included.size() == 5);
  CHECK(fg->boundary_groups.empty());
}

TEST_CASE("unknown selected node is an error naming it") {
  const auto g = path_graph();
  auto fg = apply_filter(g, hops({"c", "nope"}, 1));
  CHECK_FALSE(fg);
  REQUIRE_FALSE(fg.diagnostics.empty());
  CHECK(fg.diagnostics.front().message.find("nope") != std::string::npos);
  CHECK(fg.diagnostics.front().path == "/filtering/selectedNodes/1");
}

TEST_CASE("minNodes above the graph size warns and keeps everything") {
  const auto g = path_graph();
  auto fg = apply_filter(g, hops({"c"}, 0, 50));
  REQUIRE(fg);
  CHECK(fg->included.size() == 5);
  CHECK_FALSE(fg.diagnostics.empty());
  CHECK_FALSE(fg.diagnostics.front().is_error());
}

TEST_CASE("minNodes extends past maxHops in distance then id order") {
  const auto g = path_graph();
  auto fg = apply_filter(g, hops({"a"}, 0, 3));
  REQUIRE(fg);
  CHECK(ids_of(g, fg->included) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("maxNodes caps hop expansion but never evicts loop members") {
  const auto g = make_cfg({"a", "b", "c", "d", "e"}, {{"a", "b"}, {"b", "a"}, {"b", "c"}, {"c", "d"}, {"d", "e"}},
                          {{"L", {"a", "b"}, "a", {}}});
  auto capped = apply_filter(g, hops({"a"}, 3, 0, true, 3));
  REQUIRE(capped);
  CHECK(ids_of(g, capped->included) == std::vector<std::string>{"a", "b", "c"});
  auto tight = apply_filter(g, hops({"a"}, 3, 0, true, 1));
  REQUIRE(tight);
  CHECK(ids_of(g, tight->included) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("LTIMES task 3.1 filter") {
  auto p = prepared_sample("samples/ltimes/task3_1.json");
  const auto& g = p.cfg;
  const auto& fg = p.filtered;
  CHECK(fg.included.size() <= 25);
  for (const auto& id : p.spec.filtering.selected_nodes) CHECK(fg.contains(*g.find(id)));
  for (const auto& loop : g.loop_tree.loops) {
    const bool touches = std::any_of(loop.members.begin(), loop.members.end(), [&](std::size_t m) {
      return std::binary_search(fg.loop_closure.begin(), fg.loop_closure.end(), m);
    });
    if (touches)
      for (auto m : loop.members) CHECK(fg.contains(m));
  }
  for (auto v : fg.included) {
    if (std::binary_search(fg.loop_closure.begin(), fg.loop_closure.end(), v)) continue;
    REQUIRE(fg.hop_distance[v]);
    CHECK(*fg.hop_distance[v] <= 3);
  }
}

TEST_CASE("operator entry with three excluded callers forms one incoming group") {
  auto p = prepared_sample("samples/ltimes/task3_1.json");
  auto fg = apply_filter(p.cfg, hops({"B4052"}, 0));
  REQUIRE(fg);
  REQUIRE(fg->boundary_groups.size() == 2);
  const auto& in = fg->boundary_groups[0];
  CHECK(in.direction == Direction::incoming);
  CHECK(in.count() == 3);
  CHECK(ids_of(p.cfg, in.excluded_members) == std::vector<std::string>{"B1978", "B1986", "B1993"});
}

TEST_CASE("filter agrees with the brute-force reference on random small graphs") {
  Rng rng(1234);
  for (int round = 0; round < 1500; ++round) {
    const auto c = random_small_case(rng);
    const auto g = make_cfg(c.nodes, c.edges, c.loops);
    auto p = hops({}, pick(rng, 0, 3), pick(rng, 0, 8), coin(rng, 0.5));
    if (coin(rng, 0.5)) p.max_nodes = pick(rng, 0, 8);
    p.hop_filter_on = coin(rng, 0.9);
    for (std::size_t k = pick(rng, 0, 3); k > 0; --k) p.selected_nodes.push_back(c.nodes[pick(rng, 0, c.nodes.size() - 1)]);
    auto fg = apply_filter(g, p);
    REQUIRE(fg);
    const auto mismatch = compare_with_reference(g, *fg, reference_filter(g, p));
    INFO("round " << round);
    CHECK(mismatch.empty());
  }
}

TEST_CASE("filter invariants") {
  Rng rng(99);
  for (int round = 0; round < 500; ++round) {
    const auto c = random_small_case(rng);
    const auto g = make_cfg(c.nodes, c.edges, c.loops);
    auto p = hops({c.nodes[pick(rng, 0, c.nodes.size() - 1)]}, pick(rng, 0, 3), pick(rng, 0, 8), true,
                  pick(rng, 0, 8));
    auto fg = apply_filter(g, p);
    REQUIRE(fg);
    for (auto s : fg->seeds) CHECK(fg->contains(s));
    for (const auto& loop : g.loop_tree.loops) {
      const bool hit = std::any_of(loop.members.begin(), loop.members.end(), [&](std::size_t m) {
        return std::binary_search(fg->loop_closure.begin(), fg->loop_closure.end(), m);
      });
      if (hit)
        for (auto m : loop.members) CHECK(fg->contains(m));
    }
    if (p.min_nodes <= g.size()) CHECK(fg->included.size() <= std::max(*p.max_nodes, fg->loop_closure.size()));
  }
}

// ---------------------------------------------------------------------------
// collapse

TEST_CASE("printf called from three sites becomes three proxies") {
  const auto g = printf_graph();
  const auto cg = collapse_all(g, degree_rules(3));
  REQUIRE(cg.proxies.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(proxy_degree(cg, k) == std::pair<std::size_t, std::size_t>{1, 1});
    CHECK(cg.proxies[k].id == fmt::format("printf#{}", k + 1));
  }
  CHECK(cg.removed_nodes.size() == 2);
}

TEST_CASE("proxies pair each call with the return to the same caller") {
  const auto g = printf_graph();
  const auto cg = collapse_all(g, degree_rules(3));
  for (const auto& p : cg.proxies) {
    REQUIRE(p.call_edge);
    REQUIRE(p.return_edge);
    const auto caller = g.nodes[g.edges[*p.call_edge].source].id;
    const auto back = g.nodes[g.edges[*p.return_edge].target].id;
    CHECK(caller.substr(1) < back.substr(1));
  }
}

TEST_CASE("a callee that never returns gets a call-only proxy") {
  const auto g = make_cfg({"a", "b", "x"}, {{"a", "x"}, {"a", "b"}}, {}, {{"main", {"a", "b"}}, {"abort", {"x"}}});
  CollapsingRules rules;
  rules.always_collapse = {"abort"};
  const auto cg = collapse_all(g, rules);
  REQUIRE(cg.proxies.size() == 1);
  CHECK(proxy_degree(cg, 0) == std::pair<std::size_t, std::size_t>{1, 0});
}

TEST_CASE("an empty plan leaves the graph unchanged") {
  const auto g = printf_graph();
  const auto fg = whole_graph(g);
  auto cg = apply_collapse(g, fg, CollapsePlan{});
  REQUIRE(cg);
  CHECK(cg->surviving == fg.included);
  CHECK(cg->proxies.empty());
  REQUIRE(cg->edges.size() == fg.induced_edges.size());
  for (std::size_t i = 0; i < cg->edges.size(); ++i) {
    CHECK(cg->edges[i].original == fg.induced_edges[i]);
    CHECK(cg->edges[i].source == GraphRef{GraphRef::node, g.edges[fg.induced_edges[i]].source});
  }
}

TEST_CASE("loop-containing functions are exempt unless always collapsed") {
  const auto g = make_cfg({"m1", "m2", "m3", "h", "b"}, {{"m1", "h"}, {"h", "b"}, {"b", "h"}, {"h", "m2"}, {"m2", "h"},
                                                        {"m3", "h"}},
                          {{"L", {"h", "b"}, "h", {}}}, {{"main", {"m1", "m2", "m3"}}, {"work", {"h", "b"}}});
  const auto fg = whole_graph(g);
  auto plan = plan_collapse(g, fg, degree_rules(1));
  REQUIRE(plan);
  const auto work = *g.find_function_by_name("work");
  CHECK(plan->exempted.at(work) == ExemptReason::contains_loop);
  CollapsingRules forced = degree_rules(1);
  forced.always_collapse = {"work"};
  auto forced_plan = plan_collapse(g, fg, forced);
  REQUIRE(forced_plan);
  CHECK(forced_plan->reason.at(work) == CollapseReason::always_list);
  CHECK_FALSE(forced_plan.diagnostics.empty());
}

TEST_CASE("never list beats the degree heuristic") {
  const auto g = printf_graph();
  CollapsingRules rules = degree_rules(1);
  rules.never_collapse = {"printf"};
  auto plan = plan_collapse(g, whole_graph(g), rules);
  REQUIRE(plan);
  CHECK(plan->exempted.at(*g.find_function_by_name("printf")) == ExemptReason::never_list);
}

TEST_CASE("size cap exempts large functions") {
  const auto g = printf_graph();
  CollapsingRules rules;
  rules.min_incoming_edges = 3;
  rules.max_collapse_size = CollapseSize{true, 25};  // printf holds 2 of 8 nodes: exactly 25 percent
  auto plan = plan_collapse(g, whole_graph(g), rules);
  REQUIRE(plan);
  CHECK(plan->exempted.at(*g.find_function_by_name("printf")) == ExemptReason::too_large);
  rules.max_collapse_size = CollapseSize{true, 26};
  plan = plan_collapse(g, whole_graph(g), rules);
  REQUIRE(plan);
  CHECK(plan->collapses(*g.find_function_by_name("printf")));
  rules.max_collapse_size = CollapseSize{false, 1};
  plan = plan_collapse(g, whole_graph(g), rules);
  REQUIRE(plan);
  CHECK(plan->exempted.at(*g.find_function_by_name("printf")) == ExemptReason::too_large);
}

TEST_CASE("unknown collapse list names warn") {
  const auto g = printf_graph();
  CollapsingRules rules = degree_rules(3);
  rules.never_collapse = {"no_such_function"};
  auto plan = plan_collapse(g, whole_graph(g), rules);
  REQUIRE(plan);
  REQUIRE(plan.diagnostics.size() == 1);
  CHECK_FALSE(plan.diagnostics.front().is_error());
  CHECK(plan.diagnostics.front().path == "/rendering/function/collapsingRules/neverCollapseList/0");
}

TEST_CASE("Fig. 7 collapsing on the LTIMES fixture") {
  auto p = prepared_sample("samples/ltimes/fig7.json");
  const auto op = *p.cfg.find_function_by_name("main::$_6::operator");
  CHECK(p.plan.collapses(op));
  REQUIRE(p.collapsed.proxies.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(proxy_degree(p.collapsed, k) == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(p.plan.exempted.at(*p.cfg.find_function_by_name(".omp_outlined.")) == ExemptReason::contains_loop);
}

TEST_CASE("Task 4 keeps __kmpc_fork_call") {
  auto p = prepared_sample("samples/ltimes/task4.json");
  const auto kmpc = *p.cfg.find_function_by_name("__kmpc_fork_call");
  CHECK(p.plan.exempted.at(kmpc) == ExemptReason::never_list);
  for (auto v : p.filtered.included)
    if (p.cfg.nodes[v].function == kmpc) CHECK(std::binary_search(p.collapsed.surviving.begin(), p.collapsed.surviving.end(), v));
}

TEST_CASE("collapse invariants on random function graphs") {
  Rng rng(4242);
  for (int round = 0; round < 300; ++round) {
    const auto c = random_layout_case(rng, 30);
    if (c.functions.size() < 2) continue;
    const auto g = make_cfg(c.nodes, c.edges, c.loops, c.functions);
    const auto fg = whole_graph(g);
    auto plan = plan_collapse(g, fg, degree_rules(static_cast<std::int64_t>(pick(rng, 1, 2))));
    REQUIRE(plan);
    auto cg = apply_collapse(g, fg, *plan);
    REQUIRE(cg);
    std::set<std::size_t> collapsed(plan->collapsed_functions.begin(), plan->collapsed_functions.end());
    for (auto v : cg->surviving) CHECK_FALSE((g.nodes[v].function && collapsed.count(*g.nodes[v].function)));
    std::map<std::size_t, std::size_t> rewritten;
    for (const auto& e : cg->edges) ++rewritten[e.original];
    std::map<std::size_t, std::size_t> boundary_edges;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const auto& ed = g.edges[e];
      auto fn_of = [&](std::size_t v) { return g.nodes[v].function; };
      const bool s_gone = fn_of(ed.source) && collapsed.count(*fn_of(ed.source));
      const bool t_gone = fn_of(ed.target) && collapsed.count(*fn_of(ed.target));
      if (!s_gone && !t_gone) CHECK(rewritten[e] == 1);
      if (s_gone != t_gone) {
        CHECK(rewritten[e] == 1);
        ++boundary_edges[*fn_of(s_gone ? ed.source : ed.target)];
      }
    }
    std::map<std::size_t, std::size_t> proxies;
    for (const auto& p : cg->proxies) ++proxies[p.function];
    for (const auto& [f, count] : proxies) CHECK(count <= boundary_edges[f]);
  }
}
