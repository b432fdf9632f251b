#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "cfgconf/draw_graph.hpp"
#include "cfgconf/geometry.hpp"
#include "cfgconf/layout.hpp"

namespace cfgconf {

/// Final per-element presentation after global and element styles merge.
struct ResolvedStyle {
  std::string fill = "white";
  std::string stroke = "black";
  double stroke_width = 1;
  std::string dash;  ///< SVG dash array, empty for solid
  std::string shape = "box";
  std::string font_family = "monospace";
  double font_size = 13;
  std::string font_color = "black";
  bool invisible = false;
  bool rounded = false;
  std::optional<std::string> css_class;
};

namespace detail::svg {

inline std::string num(double v) {
  if (!std::isfinite(v)) v = 0;
  auto s = fmt::format("{:.2f}", v);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0" || s.empty()) s = "0";
  return s;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20 && c != '\t' && c != '\n' && c != '\r') break;
        out += c;
    }
  }
  return out;
}

inline bool has_flag(const StyleMap& style, std::string_view flag) {
  auto it = style.find("style");
  if (it == style.end()) return false;
  std::string_view s = it->second;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    auto token = s.substr(start, end - start);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (token == flag) return true;
    start = end + 1;
  }
  return false;
}

inline double number_or(const StyleMap& style, const std::string& key, double fallback) {
  auto it = style.find(key);
  if (it == style.end()) return fallback;
  try {
    const double v = std::stod(it->second);
    return std::isfinite(v) && v >= 0 ? v : fallback;
  } catch (...) {
    return fallback;
  }
}

inline std::string points(const std::vector<Point>& pts) {
  std::string out;
  for (const auto& p : pts) {
    if (!out.empty()) out += ' ';
    out += num(p.x) + "," + num(p.y);
  }
  return out;
}

}  // namespace detail::svg

inline ResolvedStyle resolve_node_style(const DrawNode& n) {
  using namespace detail::svg;
  ResolvedStyle s;
  const auto& st = n.style;
  if (auto it = st.find("shape"); it != st.end()) s.shape = it->second;
  if (auto it = st.find("color"); it != st.end()) s.stroke = it->second;
  if (auto it = st.find("fillcolor"); it != st.end())
    s.fill = it->second;
  else if (has_flag(st, "filled"))
    s.fill = st.count("color") ? st.at("color") : "lightgrey";
  s.stroke_width = number_or(st, "penwidth", 1);
  if (has_flag(st, "bold")) s.stroke_width = std::max(s.stroke_width, 2.0);
  if (has_flag(st, "dashed")) s.dash = "5,3";
  if (has_flag(st, "dotted")) s.dash = "1,3";
  s.invisible = has_flag(st, "invis");
  s.rounded = has_flag(st, "rounded") || s.shape == "Mrecord";
  if (auto it = st.find("fontname"); it != st.end()) s.font_family = it->second;
  s.font_size = number_or(st, "fontsize", s.font_size);
  if (auto it = st.find("fontcolor"); it != st.end()) s.font_color = it->second;
  s.css_class = n.css_class;
  return s;
}

inline ResolvedStyle resolve_edge_style(const DrawEdge& e) {
  using namespace detail::svg;
  ResolvedStyle s;
  s.fill = "none";
  const auto& st = e.style;
  if (auto it = st.find("color"); it != st.end()) s.stroke = it->second;
  s.stroke_width = number_or(st, "penwidth", 1);
  if (has_flag(st, "bold")) s.stroke_width = std::max(s.stroke_width, 2.0);
  if (e.back_edge) s.stroke_width += 1;
  if (has_flag(st, "dashed")) s.dash = "5,3";
  if (has_flag(st, "dotted")) s.dash = "1,3";
  s.invisible = has_flag(st, "invis");
  if (auto it = st.find("fontname"); it != st.end()) s.font_family = it->second;
  s.font_size = number_or(st, "fontsize", s.font_size);
  if (auto it = st.find("fontcolor"); it != st.end()) s.font_color = it->second;
  s.css_class = e.css_class;
  return s;
}

inline double hull_opacity(int depth) { return std::min(0.35 + 0.15 * depth, 0.8); }

/// Standalone SVG. Document order is loop hulls (outermost first), function
/// rectangles, edges, nodes, boundary discs, then labels.
inline std::string render_svg(const DrawGraph& dg, const LayoutGeometry& geo, double margin = 20) {
  using namespace detail::svg;
  std::string out;
  const double vw = geo.width + 2 * margin, vh = geo.height + 2 * margin;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"{} {} {} {}\" "
      "font-family=\"monospace\" font-size=\"13\">\n",
      num(vw), num(vh), num(-margin), num(-margin), num(vw), num(vh));

  out += "<g id=\"loops\">\n";
  if (dg.options.show_loop_background) {
    std::vector<std::size_t> order(dg.loops.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dg.loops[a].depth < dg.loops[b].depth; });
    for (auto l : order) {
      const auto& hull = geo.loop_hulls[l];
      if (!hull) continue;
      out += fmt::format("<polygon id=\"loop-{}\" class=\"loop\" points=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\"/>\n",
                         escape(dg.loops[l].id), points(hull->polygon), escape(dg.options.loop_background_color),
                         num(hull_opacity(hull->depth)));
    }
  }
  out += "</g>\n<g id=\"functions\">\n";
  if (dg.options.show_function_boundaries)
    for (std::size_t f = 0; f < dg.functions.size(); ++f) {
      const auto& r = geo.function_rects[f];
      if (!r) continue;
      out += fmt::format(
          "<rect id=\"fn-{}\" class=\"function\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
          "stroke=\"#555555\"/>\n",
          escape(dg.functions[f].id), num(r->x), num(r->y), num(r->w), num(r->h));
    }

  out += "</g>\n<g id=\"edges\">\n";
  for (std::size_t e = 0; e < dg.edges.size(); ++e) {
    const auto& edge = dg.edges[e];
    const auto& route = geo.edge_routes[e];
    const auto s = resolve_edge_style(edge);
    if (route.points.size() < 2) continue;
    std::string cls = edge.back_edge ? "edge back-edge" : "edge";
    if (s.css_class) cls += " " + *s.css_class;
    out += fmt::format("<g id=\"edge-{}\" class=\"{}\"{}>\n", e, escape(cls), s.invisible ? " visibility=\"hidden\"" : "");
    std::string d = "M" + num(route.points[0].x) + "," + num(route.points[0].y);
    for (std::size_t k = 1; k < route.points.size(); ++k) d += " L" + num(route.points[k].x) + "," + num(route.points[k].y);
    out += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n", d, escape(s.stroke),
                       num(s.stroke_width), s.dash.empty() ? "" : " stroke-dasharray=\"" + s.dash + "\"");
    const auto& tip = route.points.back();
    const auto& prev = route.points[route.points.size() - 2];
    const double len = std::hypot(tip.x - prev.x, tip.y - prev.y);
    if (len > 0) {
      const double ux = (tip.x - prev.x) / len, uy = (tip.y - prev.y) / len;
      const double size = 8 + s.stroke_width;
      const Point base{tip.x - ux * size, tip.y - uy * size};
      const std::vector<Point> head{tip, {base.x - uy * size / 2.5, base.y + ux * size / 2.5},
                                    {base.x + uy * size / 2.5, base.y - ux * size / 2.5}};
      out += fmt::format("<polygon points=\"{}\" fill=\"{}\" stroke=\"none\"/>\n", points(head), escape(s.stroke));
    }
    out += "</g>\n";
  }

  out += "</g>\n<g id=\"nodes\">\n";
  for (std::size_t v = 0; v < dg.nodes.size(); ++v) {
    const auto& node = dg.nodes[v];
    const auto& r = geo.node_boxes[v];
    const auto s = resolve_node_style(node);
    std::string cls = node.kind == DrawKind::proxy ? "node proxy" : "node";
    if (s.css_class) cls += " " + *s.css_class;
    const std::string common = fmt::format(
        "id=\"node-{}\" class=\"{}\" fill=\"{}\" stroke=\"{}\" stroke-width=\"{}\"{}{}", escape(node.id), escape(cls),
        escape(s.fill), escape(s.stroke), num(s.stroke_width), s.dash.empty() ? "" : " stroke-dasharray=\"" + s.dash + "\"",
        s.invisible ? " visibility=\"hidden\"" : "");
    const bool plain = s.shape == "plaintext" || s.shape == "plain" || s.shape == "none";
    if (s.shape == "diamond") {
      out += fmt::format("<polygon {} points=\"{}\"/>\n", common,
                         points({{r.cx(), r.y}, {r.right(), r.cy()}, {r.cx(), r.bottom()}, {r.x, r.cy()}}));
    } else if (s.shape == "ellipse" || s.shape == "oval" || s.shape == "circle") {
      out += fmt::format("<ellipse {} cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\"/>\n", common, num(r.cx()), num(r.cy()),
                         num(r.w / 2), num(r.h / 2));
    } else {
      out += fmt::format("<rect {} x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"{}{}/>\n", common, num(r.x), num(r.y),
                         num(r.w), num(r.h), s.rounded ? " rx=\"6\"" : "", plain ? " stroke-opacity=\"0\"" : "");
    }
  }

  out += "</g>\n<g id=\"discs\">\n";
  for (std::size_t i = 0; i < geo.discs.size(); ++i) {
    const auto& d = geo.discs[i];
    const auto& b = dg.boundary[i];
    const double toward = b.direction == Direction::incoming ? 1 : -1;
    out += fmt::format("<g id=\"disc-{}-{}\" class=\"boundary\" data-count=\"{}\">\n",
                       b.direction == Direction::incoming ? "in" : "out", escape(dg.nodes[b.anchor].id), d.count);
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", num(d.center.x),
                       num(d.center.y + toward * d.radius), num(d.stub_end.x), num(d.stub_end.y));
    if (d.count > 1)
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"white\" stroke=\"black\"/>\n", num(d.center.x + 3),
                         num(d.center.y - 3), num(d.radius));
    out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"white\" stroke=\"black\"/>\n", num(d.center.x),
                       num(d.center.y), num(d.radius));
    if (d.count > 1)
      out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"9\">{}</text>\n", num(d.center.x + d.radius + 5),
                         num(d.center.y - 4), d.count);
    out += "</g>\n";
  }

  out += "</g>\n<g id=\"labels\">\n";
  if (dg.options.show_function_boundaries)
    for (std::size_t f = 0; f < dg.functions.size(); ++f) {
      const auto& r = geo.function_rects[f];
      if (!r) continue;
      out += fmt::format("<text class=\"function-label\" x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#555555\">{}</text>\n",
                         num(r->x + 4), num(r->y + 12), escape(dg.functions[f].name));
    }
  for (std::size_t v = 0; v < dg.nodes.size(); ++v) {
    const auto& node = dg.nodes[v];
    const auto& r = geo.node_boxes[v];
    const auto s = resolve_node_style(node);
    if (s.invisible) continue;
    const auto lines = label_lines(node.label);
    const double line_h = 16 * s.font_size / 13;
    const double first = r.cy() - line_h * static_cast<double>(lines.size() - 1) / 2 + s.font_size * 0.35;
    std::string attrs = fmt::format("text-anchor=\"middle\" fill=\"{}\"", escape(s.font_color));
    if (s.font_family != "monospace") attrs += fmt::format(" font-family=\"{}\"", escape(s.font_family));
    if (s.font_size != 13) attrs += fmt::format(" font-size=\"{}\"", num(s.font_size));
    for (std::size_t k = 0; k < lines.size(); ++k)
      out += fmt::format("<text x=\"{}\" y=\"{}\" {}>{}</text>\n", num(r.cx()), num(first + line_h * static_cast<double>(k)),
                         attrs, escape(lines[k]));
  }
  for (std::size_t e = 0; e < dg.edges.size(); ++e) {
    const auto& edge = dg.edges[e];
    if (!edge.label || edge.label->empty()) continue;
    const auto& pts = geo.edge_routes[e].points;
    if (pts.size() < 2) continue;
    const auto mid = pts.size() / 2;
    const Point a = pts[mid - 1], b = pts[mid];
    const auto s = resolve_edge_style(edge);
    if (s.invisible) continue;
    out += fmt::format("<text class=\"edge-label\" x=\"{}\" y=\"{}\" font-size=\"{}\" fill=\"{}\">{}</text>\n",
                       num((a.x + b.x) / 2 + 4), num((a.y + b.y) / 2), num(s.font_size * 0.85), escape(s.font_color),
                       escape(*edge.label));
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace cfgconf
