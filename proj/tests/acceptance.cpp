// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// CFGCONF_FUZZ_SECONDS sets the fuzzing budget of criterion 7 (default 600).

#include <cstdlib>
#include <iostream>
#include <queue>

#include "test_support.hpp"

using namespace cfgconf;
using namespace cfgconf::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;     ///< measurements, always printed
  std::vector<std::string> failures;  ///< first few reasons, printed on failure

  void note(std::string s) { notes.push_back(std::move(s)); }
  void expect(bool ok, const std::string& why) {
    if (ok) return;
    pass = false;
    if (failures.size() < 8) failures.push_back(why);
  }
};

std::filesystem::path sample(const std::string& rel) { return source_path("samples/" + rel); }
std::filesystem::path golden(const std::string& rel) { return source_path("tests/golden/" + rel); }

Prepared must_prepare(const std::filesystem::path& spec) {
  auto p = prepare_file(spec);
  if (!p) {
    std::string msg = "cannot prepare " + spec.string();
    for (const auto& d : p.diagnostics) msg += "; " + format_diagnostic(d);
    throw std::runtime_error(msg);
  }
  return std::move(*p);
}

LayoutGeometry must_layout(const DrawGraph& dg) {
  auto geo = compute_layout(dg, LayoutConfig{});
  if (!geo) throw std::runtime_error("layout rejected the graph");
  return std::move(*geo);
}

std::optional<std::size_t> drawn_index(const DrawGraph& dg, const std::string& id) {
  for (std::size_t i = 0; i < dg.nodes.size(); ++i)
    if (dg.nodes[i].id == id) return i;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// 1. while-loop golden

Outcome while_loop_golden() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto p = must_prepare(sample("while_loop.json"));
  const auto geo = must_layout(p.draw);
  const auto svg = render_svg(p.draw, geo);
  const auto annotated = emit_dot(draw_graph_to_dot(p.draw, DotFlavor::annotated));
  const double elapsed = seconds_since(t0);
  o.note(fmt::format("{:.1f} ms", elapsed * 1000));
  o.expect(elapsed < 0.1, "pipeline took 100 ms or more");

  const auto& dg = p.draw;
  const auto n1 = drawn_index(dg, "n1"), n2 = drawn_index(dg, "n2"), n3 = drawn_index(dg, "n3"),
             n4 = drawn_index(dg, "n4");
  if (!n1 || !n2 || !n3 || !n4 || dg.loops.size() != 1) {
    o.expect(false, "fixture does not have nodes n1..n4 and one loop");
    return o;
  }
  o.expect(dg.loops[0].header == n2, "header is not n2");
  o.expect(geo.layer_of[*n2] < geo.layer_of[*n3], "header is not above the body");
  o.expect(geo.node_boxes[*n2].bottom() < geo.node_boxes[*n3].y, "header box is not above the body box");

  const auto& hull = geo.loop_hulls[0];
  o.expect(hull.has_value(), "no hull drawn");
  if (hull) {
    for (auto m : {*n2, *n3})
      for (Point c : {Point{geo.node_boxes[m].x, geo.node_boxes[m].y},
                      Point{geo.node_boxes[m].right(), geo.node_boxes[m].bottom()},
                      Point{geo.node_boxes[m].x, geo.node_boxes[m].bottom()},
                      Point{geo.node_boxes[m].right(), geo.node_boxes[m].y}})
        o.expect(inside_convex(hull->polygon, c, 1e-6), "hull misses a corner of " + dg.nodes[m].id);
    for (auto outsider : {*n1, *n4})
      o.expect(!rect_intersects_convex(hull->polygon, geo.node_boxes[outsider]),
               "hull covers non-member " + dg.nodes[outsider].id);
    double hull_right = -1e18;
    for (const auto& pt : hull->polygon) hull_right = std::max(hull_right, pt.x);
    std::size_t back_edges = 0;
    for (std::size_t e = 0; e < dg.edges.size(); ++e) {
      if (!dg.edges[e].back_edge) continue;
      ++back_edges;
      const auto& pts = geo.edge_routes[e].points;
      o.expect(pts.size() >= 4, "back edge route has no middle section");
      for (std::size_t k = 1; k + 1 < pts.size(); ++k)
        o.expect(pts[k].x > hull_right, "back edge middle point lies inside the hull's x-extent");
      for (std::size_t k = 1; k + 2 < pts.size(); ++k)
        o.expect(!segment_enters_convex(hull->polygon, pts[k], pts[k + 1]), "back edge passes through the hull");
    }
    o.expect(back_edges == 1, "expected exactly one back edge");
  }
  o.expect(well_formed_xml(svg), "svg is not well-formed");
  for (const auto& v : layout_violations(dg, geo)) o.expect(false, v);

  o.expect(count_occurrences(annotated, "subgraph") >= 1, "annotated dot has no subgraph");
  o.expect(count_occurrences(annotated, "style=invis") >= 1, "annotated dot has no invisible edge");
  bool ported = false;
  std::istringstream lines(annotated);
  for (std::string line; std::getline(lines, line);)
    if (line.find("n3:") != std::string::npos && line.find("-> n2:") != std::string::npos &&
        line.find("constraint=false") != std::string::npos)
      ported = true;
  o.expect(ported, "back edge n3->n2 lacks port suffixes or constraint=false");
  return o;
}

// ---------------------------------------------------------------------------
// 2. filtering reproduction

/// Checks the loop-preserving k-hop properties independently of the filter's own bookkeeping.
void check_filter_properties(Outcome& o, const std::string& what, const Cfg& g, const FilteredGraph& fg,
                             const std::vector<std::string>& seed_ids, std::size_t hops, std::size_t cap) {
  const std::set<std::size_t> inc(fg.included.begin(), fg.included.end());
  o.expect(inc.size() <= cap, fmt::format("{}: {} nodes exceed the cap of {}", what, inc.size(), cap));
  std::set<std::size_t> closure;
  for (const auto& id : seed_ids) {
    const auto v = g.find(id);
    o.expect(v.has_value(), what + ": unknown seed " + id);
    if (!v) continue;
    closure.insert(*v);
    o.expect(inc.count(*v) > 0, what + ": seed " + id + " missing");
  }
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& l : g.loop_tree.loops) {
      const bool hit = std::any_of(l.members.begin(), l.members.end(), [&](std::size_t m) { return closure.count(m); });
      if (!hit) continue;
      for (auto m : l.members) grew = closure.insert(m).second || grew;
    }
  }
  for (auto v : closure) o.expect(inc.count(v) > 0, what + ": loop member " + g.nodes[v].id + " missing");
  std::vector<std::vector<std::size_t>> adj(g.size());
  for (const auto& e : g.edges) {
    adj[e.source].push_back(e.target);
    adj[e.target].push_back(e.source);
  }
  std::vector<std::size_t> dist(g.size(), SIZE_MAX);
  std::queue<std::size_t> q;
  for (auto v : closure) {
    dist[v] = 0;
    q.push(v);
  }
  while (!q.empty()) {
    const auto v = q.front();
    q.pop();
    for (auto w : adj[v])
      if (dist[w] == SIZE_MAX) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
  }
  for (auto v : inc)
    if (!closure.count(v))
      o.expect(dist[v] <= hops, fmt::format("{}: {} is {} hops from the expanded seeds", what, g.nodes[v].id,
                                            dist[v] == SIZE_MAX ? std::string("unreachable") : std::to_string(dist[v])));
}

Outcome filtering_reproduction() {
  Outcome o;
  const auto p = must_prepare(sample("ltimes/task3_1.json"));
  const auto& f = p.spec.filtering;
  o.expect(f.selected_nodes.size() == 10, "Task 3.1 spec does not list 10 seeds");
  o.expect(f.max_hops == 3 && f.max_nodes == 25, "Task 3.1 spec does not ask for 3 hops and 25 nodes");
  check_filter_properties(o, "LTIMES", p.cfg, p.filtered, f.selected_nodes, 3, 25);
  o.note(fmt::format("LTIMES {} of {} nodes", p.filtered.included.size(), p.cfg.size()));

  const auto s = synthetic_cfg(20000, 2026);
  auto t0 = Clock::now();
  auto g = build_graph(synthetic_inputs(s));
  const double build_s = seconds_since(t0);
  if (!g) {
    o.expect(false, "synthetic graph rejected");
    return o;
  }
  FilterParams params{true, {}, true, 3, 25, 25};
  for (std::size_t k = 0; k < 10; ++k) params.selected_nodes.push_back(g->nodes[(k * 1979 + 17) % g->size()].id);
  t0 = Clock::now();
  auto fg = apply_filter(*g, params);
  const double filter_s = seconds_since(t0);
  o.expect(fg.ok(), "synthetic filter failed");
  if (fg) check_filter_properties(o, "synthetic", *g, *fg, params.selected_nodes, 3, 25);
  o.note(fmt::format("20K synthetic: build {:.0f} ms, filter {:.1f} ms", build_s * 1000, filter_s * 1000));
  o.expect(filter_s < 1.0, "filtering the 20K-node graph took 1 s or more");
  return o;
}

// ---------------------------------------------------------------------------
// 3. collapsing reproduction

void check_golden_graph(Outcome& o, const std::string& name, const DrawGraph& dg) {
  const auto path = golden(name + "_drawn.json");
  if (!std::filesystem::exists(path)) {
    o.expect(false, "missing golden " + path.string());
    return;
  }
  const auto want = nlohmann::json::parse(read_file(path));
  const auto got = draw_graph_to_json(dg);
  if (want == got) return;
  const auto diff = nlohmann::json::diff(want, got);
  o.expect(false, fmt::format("{} differs from its golden in {} places, first at {}", name, diff.size(),
                              diff.empty() ? "" : diff[0]["path"].get<std::string>()));
}

/// Functions of `p` that own a loop member.
std::set<std::size_t> loop_functions(const Prepared& p) {
  std::set<std::size_t> out;
  for (const auto& l : p.cfg.loop_tree.loops)
    for (auto m : l.members)
      if (p.cfg.nodes[m].function) out.insert(*p.cfg.nodes[m].function);
  return out;
}

void check_survivors(Outcome& o, const std::string& what, const Prepared& p, std::size_t fn) {
  for (auto v : p.filtered.included)
    if (p.cfg.nodes[v].function == fn)
      o.expect(drawn_index(p.draw, p.cfg.nodes[v].id).has_value(),
               fmt::format("{}: {} of {} was not kept", what, p.cfg.nodes[v].id, p.cfg.functions[fn].name));
}

Outcome collapsing_reproduction() {
  Outcome o;
  const auto fig7 = must_prepare(sample("ltimes/fig7.json"));
  const auto& rules = fig7.spec.rendering.function.collapsing_rules;
  o.expect(rules && rules->min_incoming_edges == 3 && rules->max_collapse_size &&
               rules->max_collapse_size->percent && rules->max_collapse_size->value == 25,
           "fig7 spec does not use minIncomingEdges=3 and maxCollapseSize=25p");
  const auto op = fig7.cfg.find_function_by_name("main::$_6::operator");
  o.expect(op.has_value() && fig7.plan.collapses(*op), "operator function is not collapsed");

  std::size_t proxies = 0;
  for (std::size_t v = 0; v < fig7.draw.nodes.size(); ++v) {
    const auto& n = fig7.draw.nodes[v];
    if (n.kind != DrawKind::proxy) continue;
    ++proxies;
    const auto style = n.style.find("style");
    o.expect(style != n.style.end() && style->second.find("dashed") != std::string::npos, n.id + " is not dashed");
    std::size_t in = 0, out = 0;
    for (const auto& e : fig7.draw.edges) {
      in += e.target == v;
      out += e.source == v;
    }
    o.expect(in <= 1 && out <= 1, fmt::format("{} has {} in and {} out edges", n.id, in, out));
  }
  o.expect(proxies >= 2, "operator is not duplicated per call site");
  if (op)
    for (const auto& n : fig7.draw.nodes)
      o.expect(n.kind == DrawKind::proxy || !fig7.cfg.find(n.id) || fig7.cfg.nodes[*fig7.cfg.find(n.id)].function != *op,
               "operator block " + n.id + " is still drawn");
  for (auto fn : loop_functions(fig7)) check_survivors(o, "fig7", fig7, fn);
  check_golden_graph(o, "fig7", fig7.draw);

  const auto task4 = must_prepare(sample("ltimes/task4.json"));
  const auto kmpc = task4.cfg.find_function_by_name("__kmpc_fork_call");
  o.expect(kmpc.has_value(), "no __kmpc_fork_call in the fixture");
  if (kmpc) {
    const auto it = task4.plan.exempted.find(*kmpc);
    o.expect(it != task4.plan.exempted.end() && it->second == ExemptReason::never_list,
             "__kmpc_fork_call is not exempted by the never list");
    check_survivors(o, "task4", task4, *kmpc);
  }
  for (auto fn : loop_functions(task4)) check_survivors(o, "task4", task4, fn);
  check_golden_graph(o, "task4", task4.draw);
  o.note(fmt::format("{} proxies", proxies));
  return o;
}

// ---------------------------------------------------------------------------
// 4. filter oracle equivalence

Outcome filter_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(20260414);
  constexpr std::size_t graphs = 10000;
  std::size_t runs = 0;
  for (std::size_t round = 0; round < graphs; ++round) {
    const auto c = random_small_case(rng);
    const auto g = make_cfg(c.nodes, c.edges, c.loops);
    std::vector<std::string> seeds;
    for (std::size_t k = pick(rng, 1, 3); k > 0; --k) seeds.push_back(c.nodes[pick(rng, 0, c.nodes.size() - 1)]);
    // The (min, max) cap pair cycles through all 90 combinations; hops and the loop switch are swept.
    const std::size_t pair = round % 90;
    const std::size_t min_nodes = pair / 10;
    const std::optional<std::size_t> max_nodes =
        pair % 10 == 9 ? std::nullopt : std::optional<std::size_t>(pair % 10);
    for (std::size_t hops = 0; hops <= 3; ++hops)
      for (bool loops : {false, true}) {
        FilterParams p{true, seeds, loops, hops, min_nodes, max_nodes};
        auto fg = apply_filter(g, p);
        ++runs;
        if (!fg) {
          o.expect(false, fmt::format("case {}: filter rejected valid parameters", round));
          continue;
        }
        const auto mismatch = compare_with_reference(g, *fg, reference_filter(g, p));
        o.expect(mismatch.empty(), fmt::format("case {} (hops {}, loops {}, min {}, max {}): {}", round, hops, loops,
                                               min_nodes, max_nodes ? std::to_string(*max_nodes) : "none", mismatch));
      }
  }
  const double elapsed = seconds_since(t0);
  o.note(fmt::format("{} graphs, {} filter runs, {:.1f} s", graphs, runs, elapsed));
  o.expect(elapsed < 60, "took 60 s or more");
  return o;
}

// ---------------------------------------------------------------------------
// 5. layout invariants

Outcome layout_invariants() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(60);
  std::size_t loops = 0, nested = 0, violating = 0;
  for (int round = 0; round < 1000; ++round) {
    const auto c = random_layout_case(rng, 60);
    const auto g = make_cfg(c.nodes, c.edges, c.loops, c.functions);
    const auto dg = draw_whole(g);
    auto geo = compute_layout(dg, LayoutConfig{});
    if (!geo) {
      o.expect(false, fmt::format("case {}: layout rejected", round));
      continue;
    }
    loops += dg.loops.size();
    for (const auto& l : dg.loops) nested += l.parent ? 1 : 0;
    const auto v = layout_violations(dg, *geo, true);
    if (!v.empty()) ++violating;
    for (const auto& s : v) o.expect(false, fmt::format("case {}: {}", round, s));
  }
  const double elapsed = seconds_since(t0);
  o.note(fmt::format("1000 cases, {} loops ({} nested), {} violating, {:.1f} s", loops, nested, violating, elapsed));
  o.expect(elapsed < 120, "took 120 s or more");
  return o;
}

// ---------------------------------------------------------------------------
// 6. round trips and determinism

std::string random_token(Rng& rng, bool awkward) {
  static const std::vector<std::string> plain = {"a", "B1", "_x", "node7", "loop_head", "x_y_z", "Q"};
  static const std::vector<std::string> odd = {"two words", "say \"hi\"", "back\\slash", "multi\nline", "é",
                                               "-1.5", "42", "node", "Digraph", "a->b", "{x}", "semi;colon", ""};
  if (awkward && coin(rng, 0.4)) return odd[pick(rng, 0, odd.size() - 1)];
  auto s = plain[pick(rng, 0, plain.size() - 1)];
  if (coin(rng, 0.5)) s += std::to_string(pick(rng, 0, 99));
  return s;
}

AttrMap random_attrs(Rng& rng) {
  static const std::vector<std::string> keys = {"label", "color", "shape", "style", "fillcolor", "weight", "tooltip"};
  AttrMap a;
  for (std::size_t k = pick(rng, 0, 3); k > 0; --k) a[keys[pick(rng, 0, keys.size() - 1)]] = random_token(rng, true);
  return a;
}

DotGraph random_dot(Rng& rng) {
  DotGraph d;
  if (coin(rng, 0.5)) d.name = random_token(rng, false);
  if (coin(rng, 0.3)) d.graph_attrs["rankdir"] = "TB";
  if (coin(rng, 0.2)) d.node_defaults["shape"] = "box";
  if (coin(rng, 0.2)) d.edge_defaults["color"] = random_token(rng, true);
  std::set<std::string> ids;
  for (std::size_t k = pick(rng, 0, 14); k > 0; --k) {
    auto id = random_token(rng, true);
    if (id.empty() || !ids.insert(id).second) continue;
    d.nodes.push_back({id, random_attrs(rng)});
  }
  for (std::size_t k = d.nodes.empty() ? 0 : pick(rng, 0, 20); k > 0; --k)
    d.edges.push_back({d.nodes[pick(rng, 0, d.nodes.size() - 1)].id, d.nodes[pick(rng, 0, d.nodes.size() - 1)].id,
                       random_attrs(rng), std::nullopt, std::nullopt});
  for (std::size_t k = d.nodes.empty() ? 0 : pick(rng, 0, 2); k > 0; --k) {
    DotSubgraph s;
    s.name = fmt::format("cluster_{}", k);
    if (coin(rng, 0.5)) s.attrs["label"] = random_token(rng, true);
    std::set<std::string> members;
    for (std::size_t m = pick(rng, 1, 4); m > 0; --m) members.insert(d.nodes[pick(rng, 0, d.nodes.size() - 1)].id);
    s.nodes.assign(members.begin(), members.end());
    if (coin(rng, 0.3)) s.subgraphs.push_back({std::string("cluster_inner"), {}, {s.nodes.front()}, {}});
    d.subgraphs.push_back(std::move(s));
  }
  return d;
}

std::vector<std::filesystem::path> sample_specs() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(source_path("samples"))) {
    if (e.path().extension() != ".json") continue;
    const auto text = read_file(e.path());
    if (text.find("\"data\"") == std::string::npos) continue;  // analysis files
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome round_trips() {
  Outcome o;
  Rng rng(6);
  std::size_t round_trips = 0;
  for (int round = 0; round < 1000; ++round) {
    const auto d = random_dot(rng);
    const auto text = emit_dot(d);
    auto back = parse_dot(text);
    if (!back) {
      o.expect(false, fmt::format("graph {} does not re-parse: {}", round, format_diagnostic(back.diagnostics.front())));
      continue;
    }
    o.expect(*back == d, fmt::format("graph {} changed across emit/parse:\n{}", round, text));
    o.expect(emit_dot(*back) == text, fmt::format("graph {} re-emits differently", round));
    ++round_trips;
  }
  std::size_t specs = 0;
  for (const auto& spec : sample_specs()) {
    for (const char* format : {"svg", "dot", "dot-annotated"}) {
      const auto a = run_tool({"render", spec.string(), "--format", format});
      const auto b = run_tool({"render", spec.string(), "--format", format});
      o.expect(a.code == 0, fmt::format("{} --format {} exits {}", spec.filename().string(), format, a.code));
      o.expect(a.out == b.out && !a.out.empty(), fmt::format("{} --format {} is not deterministic", spec.filename().string(), format));
    }
    ++specs;
  }
  o.note(fmt::format("{} dot round trips, {} specs rendered twice", round_trips, specs));
  return o;
}

// ---------------------------------------------------------------------------
// 7. robustness

/// Printable excerpt of a fuzz input for failure messages.
std::string excerpt(const std::string& s) {
  std::string out;
  for (unsigned char c : s.substr(0, 240)) out += (c >= 32 && c < 127) ? std::string(1, static_cast<char>(c)) : fmt::format("\\x{:02x}", c);
  return s.size() > 240 ? out + "..." : out;
}

std::string mutate(Rng& rng, std::string s, const std::vector<std::string>& dictionary) {
  for (std::size_t n = pick(rng, 1, 6); n > 0; --n) {
    const std::size_t at = s.empty() ? 0 : pick(rng, 0, s.size() - 1);
    switch (pick(rng, 0, 6)) {
      case 0:
        if (!s.empty()) s[at] = static_cast<char>(pick(rng, 0, 255));
        break;
      case 1:
        s.insert(at, 1, static_cast<char>(pick(rng, 0, 255)));
        break;
      case 2:
        if (!s.empty()) s.erase(at, pick(rng, 1, std::min<std::size_t>(32, s.size() - at)));
        break;
      case 3:
        s.insert(at, dictionary[pick(rng, 0, dictionary.size() - 1)]);
        break;
      case 4: {
        if (s.empty()) break;
        const auto len = pick(rng, 1, std::min<std::size_t>(64, s.size() - at));
        s.insert(pick(rng, 0, s.size()), s.substr(at, len));
        break;
      }
      case 5:
        s = s.substr(0, at);
        break;
      default:
        if (!s.empty()) s[at] = "{}[]\",:-> ;=\\"[pick(rng, 0, 12)];
        break;
    }
  }
  return s;
}

struct Corpus {
  std::vector<std::string> specs;
  std::map<std::string, std::string> files;  ///< referenced dot and analysis files by name
  std::vector<std::string> dots;
};

Corpus load_corpus() {
  Corpus c;
  for (const auto& e : std::filesystem::recursive_directory_iterator(source_path("samples"))) {
    const auto name = e.path().filename().string();
    if (e.path().extension() == ".dot") {
      c.files[name] = read_file(e.path());
      c.dots.push_back(c.files[name]);
    } else if (e.path().extension() == ".json") {
      const auto text = read_file(e.path());
      if (text.find("\"data\"") != std::string::npos) c.specs.push_back(text);
      else c.files[name] = text;
    }
  }
  const auto s = synthetic_cfg(300, 1);
  c.dots.push_back(synthetic_dot(s));
  for (int seed = 0; seed < 4; ++seed) {
    Rng rng(seed);
    c.dots.push_back(emit_dot(random_dot(rng)));
  }
  std::sort(c.specs.begin(), c.specs.end());
  std::sort(c.dots.begin(), c.dots.end());
  return c;
}

/// Unknown keys spliced into every object of a spec must leave the output untouched.
void unknown_key_differential(Outcome& o, std::size_t& variants) {
  Rng rng(7);
  for (const auto& spec : sample_specs()) {
    const auto text = read_file(spec);
    const auto loader = filesystem_loader(spec.parent_path());
    auto render = [&](const std::string& t) {
      std::string out;
      auto svg = render_spec_text(t, loader);
      out += svg ? *svg : "<rejected>";
      auto s = load_spec(t);
      if (s) {
        auto p = prepare(*s, loader);
        if (p) out += emit_dot(draw_graph_to_dot(p->draw, DotFlavor::annotated));
      }
      return std::make_pair(out, svg.diagnostics);
    };
    const auto [base, base_diags] = render(text);
    const auto doc = nlohmann::json::parse(text);
    std::vector<nlohmann::json::json_pointer> objects;
    std::function<void(const nlohmann::json&, const nlohmann::json::json_pointer&)> walk =
        [&](const nlohmann::json& j, const nlohmann::json::json_pointer& at) {
          if (j.is_object()) {
            objects.push_back(at);
            for (const auto& [k, v] : j.items()) walk(v, at / k);
          } else if (j.is_array()) {
            for (std::size_t i = 0; i < j.size(); ++i) walk(j[i], at / i);
          }
        };
    walk(doc, nlohmann::json::json_pointer{});
    for (int v = 0; v < 12; ++v) {
      auto changed = doc;
      const auto& where = objects[pick(rng, 0, objects.size() - 1)];
      const auto key = fmt::format("unknownOption{}", pick(rng, 0, 9999));
      const std::vector<nlohmann::json> values = {1, "x", true, nullptr, nlohmann::json::object(), {1, 2},
                                                  {{"nodes", {"a"}}}};
      changed[where][key] = values[pick(rng, 0, values.size() - 1)];
      const auto [out, diags] = render(changed.dump(1));
      ++variants;
      o.expect(out == base, fmt::format("{}: unknown key {} at \"{}\" changed the output", spec.filename().string(), key,
                                        where.to_string()));
      const bool warned = std::any_of(diags.begin(), diags.end(), [&](const Diagnostic& d) {
        return !d.is_error() && d.message.find(key) != std::string::npos;
      });
      o.expect(warned, fmt::format("{}: unknown key {} was not reported", spec.filename().string(), key));
    }
  }
}

Outcome robustness() {
  Outcome o;
  double budget = 600;
  if (const char* env = std::getenv("CFGCONF_FUZZ_SECONDS")) budget = std::strtod(env, nullptr);
  const auto corpus = load_corpus();
  const std::vector<std::string> dictionary = {
      "{", "}", "[", "]", "\"", ",", ":", "->", "--", ";", "=", "null", "true", "false", "0", "-1", "1e308", "\"\\u0000\"",
      "digraph", "subgraph", "strict", "graph", "node", "edge", "/*", "*/", "//", "#", "\n", "\"data\"", "\"nodes\"",
      "\"edges\"", "\"loops\"", "\"functions\"", "\"header\"", "\"backEdges\"", "\"filtering\"", "\"rendering\"",
      "\"selectedNodes\"", "\"maxHops\"", "\"collapsingRules\"", "\"25p\"", "\"graphFile\"", "\"analysisFile\"",
      "[[\"a\",\"b\"]]", "{\"id\":\"a\"}", "[label=\"x\"]", ":port", "\xff\xfe", "\xc3\xa9"};
  const FileLoader loader = [&](const std::string& name) -> std::optional<std::string> {
    const auto it = corpus.files.find(std::filesystem::path(name).filename().string());
    if (it == corpus.files.end()) return std::nullopt;
    return it->second;
  };
  Rng rng(777);
  std::size_t specs = 0, dots = 0, accepted_specs = 0, accepted_dots = 0, laid_out = 0;
  const auto t0 = Clock::now();
  while (seconds_since(t0) < budget) {
    try {
      if (coin(rng, 0.5)) {
        const auto text = mutate(rng, corpus.specs[pick(rng, 0, corpus.specs.size() - 1)], dictionary);
        ++specs;
        auto spec = load_spec(text);
        if (!spec) {
          o.expect(std::any_of(spec.diagnostics.begin(), spec.diagnostics.end(), [](const Diagnostic& d) { return d.is_error(); }),
                   "spec rejected without an error diagnostic");
          continue;
        }
        ++accepted_specs;
        auto p = prepare(*spec, loader);
        if (p && p->draw.nodes.size() <= 400) {
          LayoutConfig cfg;
          auto geo = compute_layout(p->draw, cfg);
          if (geo) {
            ++laid_out;
            o.expect(well_formed_xml(render_svg(p->draw, *geo)), "fuzzed spec rendered malformed svg");
          }
        }
      } else {
        const auto text = mutate(rng, corpus.dots[pick(rng, 0, corpus.dots.size() - 1)], dictionary);
        ++dots;
        auto g = parse_dot(text);
        if (!g) {
          o.expect(!g.diagnostics.empty() && g.diagnostics.front().line.has_value(),
                   "dot rejected without a positioned diagnostic");
          continue;
        }
        ++accepted_dots;
        auto again = parse_dot(emit_dot(*g));
        o.expect(again && *again == *g, "accepted fuzzed dot does not round-trip: " + excerpt(text));
      }
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception escaped: ") + e.what());
    } catch (...) {
      o.expect(false, "non-standard exception escaped");
    }
  }
  o.note(fmt::format("fuzz {:.0f} s: {} specs ({} accepted, {} laid out), {} dot inputs ({} accepted)", budget, specs,
                     accepted_specs, laid_out, dots, accepted_dots));

  std::size_t variants = 0;
  unknown_key_differential(o, variants);
  o.note(fmt::format("{} unknown-key variants", variants));

  const auto dir = scratch_dir("acceptance_guard");
  const auto big = synthetic_cfg(18700, 11);
  write_file(dir / "big.dot", synthetic_dot(big));
  write_file(dir / "big_analysis.json", synthetic_analysis_json(big));
  write_file(dir / "big.json", R"({"data": {"graphFile": "big.dot", "analysisFile": "big_analysis.json"}})");
  const auto guard = run_tool({"render", (dir / "big.json").string()});
  o.expect(guard.code == 3, fmt::format("oversized graph exits {} instead of 3", guard.code));
  o.expect(guard.err.find(std::to_string(big.nodes.size())) != std::string::npos &&
               guard.err.find("filtering") != std::string::npos,
           "oversized-graph diagnostic does not name the node count and filtering");
  return o;
}

// ---------------------------------------------------------------------------
// 8. global-style golden

Outcome global_style_golden() {
  Outcome o;
  const auto r = run_tool({"render", sample("global_style.json").string()});
  o.expect(r.code == 0, fmt::format("render exits {}", r.code));
  const auto path = golden("global_style.svg");
  o.expect(std::filesystem::exists(path), "missing golden " + path.string());
  if (std::filesystem::exists(path)) o.expect(r.out == read_file(path), "svg differs from the committed golden");

  const auto p = must_prepare(sample("global_style.json"));
  const std::map<std::string, std::pair<std::string, std::string>> expected = {
      {"entry", {"polygon", "green"}}, {"cond", {"polygon", "green"}}, {"then", {"polygon", "green"}},
      {"else", {"rect", "yellow"}},    {"join", {"polygon", "green"}}, {"exit", {"polygon", "white"}}};
  o.expect(p.draw.nodes.size() == expected.size(), "unexpected node count");
  for (const auto& [id, want] : expected) {
    const auto tag = fmt::format("<{} id=\"node-{}\" class=\"node\" fill=\"{}\"", want.first, id, want.second);
    o.expect(r.out.find(tag) != std::string::npos, "node " + id + " is not drawn as " + want.first + " " + want.second);
  }
  o.expect(r.out.find(">cmp eax, 0</text>") != std::string::npos, "label source \"label\" not applied");
  std::size_t red = 0, gray = 0;
  for (std::size_t e = 0; e < p.draw.edges.size(); ++e) {
    const auto color = p.draw.edges[e].style.count("color") ? p.draw.edges.at(e).style.at("color") : "";
    const bool is_else = p.draw.nodes[p.draw.edges[e].target].id == "else";
    o.expect(color == (is_else ? "red" : "#666666"), "edge " + std::to_string(e) + " has color " + color);
    (is_else ? red : gray) += 1;
  }
  o.expect(red == 1, "the per-edge color override is not unique");
  o.expect(count_occurrences(r.out, "stroke=\"#666666\"") >= gray && count_occurrences(r.out, "fill=\"#666666\"") >= gray,
           "global edge color missing in the svg");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"while-loop golden", while_loop_golden},
      {"filtering reproduction", filtering_reproduction},
      {"collapsing reproduction", collapsing_reproduction},
      {"filter oracle equivalence", filter_oracle},
      {"layout invariant suite", layout_invariants},
      {"round trips and determinism", round_trips},
      {"robustness", robustness},
      {"global-style golden", global_style_golden},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    std::string notes;
    for (const auto& n : o.notes) notes += (notes.empty() ? "" : "; ") + n;
    std::cout << fmt::format("{} criterion {}: {} ({:.1f} s){}{}\n", o.pass ? "PASS" : "FAIL", index, c.name,
                             seconds_since(t0), notes.empty() ? "" : " | ", notes);
    for (const auto& f : o.failures) std::cout << "    " << f << "\n";
    std::cout.flush();
    failed += o.pass ? 0 : 1;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", index - failed, index);
  return failed ? 1 : 0;
}
