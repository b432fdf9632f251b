#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cfgconf/diagnostics.hpp"

namespace cfgconf {

using json = nlohmann::json;

/// dot-style attributes attached to a node, edge or global rendering entry.
using StyleMap = std::map<std::string, std::string>;

struct NodeDecl {
  std::string id;
  std::optional<std::string> label;
  StyleMap style;
  std::optional<std::string> css_class;
  std::string origin;  ///< JSON pointer (or file name) the declaration came from.

  bool operator==(const NodeDecl&) const = default;
};

struct EdgeDecl {
  std::string source;
  std::string target;
  std::optional<std::string> label;
  StyleMap style;
  std::optional<std::string> css_class;
  std::string origin;

  bool operator==(const EdgeDecl&) const = default;
};

/// A declared loop. `children` holds loops written nested inside this one;
/// nesting is also inferred from member containment later, so flat lists and
/// nested lists describe the same forest.
struct LoopDecl {
  std::optional<std::string> id;
  std::vector<std::string> nodes;
  std::optional<std::string> header;
  std::optional<std::vector<std::pair<std::string, std::string>>> back_edges;
  std::vector<LoopDecl> children;
  std::string origin;

  bool operator==(const LoopDecl&) const = default;
};

struct FunctionDecl {
  std::optional<std::string> id;
  std::string name;
  std::vector<std::string> nodes;
  std::string origin;

  bool operator==(const FunctionDecl&) const = default;
};

struct DataSection {
  std::vector<NodeDecl> nodes;
  std::vector<EdgeDecl> edges;
  std::vector<LoopDecl> loops;
  std::vector<FunctionDecl> functions;
  std::optional<std::string> graph_file;
  std::optional<std::string> structure_file;
  std::optional<std::string> analysis_file;

  bool operator==(const DataSection&) const = default;
};

enum class LabelSource { id, label };

struct NodeRender {
  StyleMap style;
  std::optional<LabelSource> label;
  std::optional<std::string> css_class;

  bool operator==(const NodeRender&) const = default;
};

struct EdgeRender {
  StyleMap style;
  std::optional<std::string> css_class;

  bool operator==(const EdgeRender&) const = default;
};

struct LoopRender {
  std::optional<bool> show_background;
  std::optional<std::string> background_color;
  std::optional<std::string> back_edge_color;

  bool operator==(const LoopRender&) const = default;
};

/// Either an absolute node count or a percentage of the filtered graph.
struct CollapseSize {
  bool percent = false;
  double value = 0;

  bool operator==(const CollapseSize&) const = default;
};

struct CollapsingRules {
  std::optional<std::int64_t> min_incoming_edges;
  std::optional<std::int64_t> min_outgoing_edges;
  std::optional<CollapseSize> max_collapse_size;
  std::vector<std::string> always_collapse;
  std::vector<std::string> never_collapse;

  bool operator==(const CollapsingRules&) const = default;
};

struct FunctionRender {
  std::optional<bool> show_boundaries;
  std::optional<CollapsingRules> collapsing_rules;

  bool operator==(const FunctionRender&) const = default;
};

struct RenderSection {
  NodeRender node;
  EdgeRender edge;
  LoopRender loop;
  FunctionRender function;

  bool operator==(const RenderSection&) const = default;
};

struct FilterSection {
  std::optional<bool> hop_filter_on;
  std::vector<std::string> selected_nodes;
  std::optional<bool> loop_filter_on;
  std::optional<std::int64_t> max_hops;
  std::optional<std::int64_t> min_nodes;
  std::optional<std::int64_t> max_nodes;

  bool operator==(const FilterSection&) const = default;
};

/// A key the parser did not recognise, kept with its value so the canonical
/// serializer can write it back. `path` points at the containing object.
struct UnknownKey {
  std::string path;
  std::string key;
  json value;

  bool operator==(const UnknownKey&) const = default;
};

struct Spec {
  DataSection data;
  RenderSection rendering;
  FilterSection filtering;
  std::vector<UnknownKey> unknown_keys;

  bool operator==(const Spec&) const = default;
};

namespace defaults {
inline constexpr std::int64_t max_hops = 3;
inline constexpr std::size_t max_loop_nesting = 64;
inline constexpr std::int64_t min_nodes = 25;
inline constexpr bool show_loop_background = true;
inline constexpr std::string_view loop_background_color = "#FDC086";
inline constexpr std::string_view back_edge_color = "#E66101";
inline constexpr bool show_function_boundaries = true;
inline constexpr LabelSource label_source = LabelSource::id;
inline constexpr std::string_view node_shape = "box";
inline constexpr std::int64_t min_incoming_edges = 3;
inline constexpr double max_collapse_percent = 25;
}  // namespace defaults

namespace detail {

/// Style attributes the renderer honours.
inline const std::set<std::string>& honored_style_keys() {
  static const std::set<std::string> keys{"color",    "fillcolor", "fontcolor", "fontname",
                                          "fontsize", "penwidth",  "shape",     "style"};
  return keys;
}

/// dot attributes that are accepted and carried through to dot output but
/// have no effect on the native drawing.
inline const std::set<std::string>& passthrough_style_keys() {
  static const std::set<std::string> keys{
      "arrowhead", "arrowsize", "arrowtail", "dir",     "fixedsize", "height", "href",
      "id",        "margin",    "peripheries", "tooltip", "URL",     "weight", "width",
      "xlabel",    "headlabel", "taillabel",   "constraint", "minlen", "group", "ordering"};
  return keys;
}

inline bool is_style_key(const std::string& key) {
  return honored_style_keys().count(key) != 0 || passthrough_style_keys().count(key) != 0;
}

inline bool is_color_key(const std::string& key) {
  return key == "color" || key == "fillcolor" || key == "fontcolor";
}

inline const std::set<std::string>& css_color_names() {
  static const std::set<std::string> names{
      "aliceblue", "antiquewhite", "aqua", "aquamarine", "azure", "beige", "bisque", "black",
      "blanchedalmond", "blue", "blueviolet", "brown", "burlywood", "cadetblue", "chartreuse",
      "chocolate", "coral", "cornflowerblue", "cornsilk", "crimson", "cyan", "darkblue",
      "darkcyan", "darkgoldenrod", "darkgray", "darkgreen", "darkgrey", "darkkhaki",
      "darkmagenta", "darkolivegreen", "darkorange", "darkorchid", "darkred", "darksalmon",
      "darkseagreen", "darkslateblue", "darkslategray", "darkslategrey", "darkturquoise",
      "darkviolet", "deeppink", "deepskyblue", "dimgray", "dimgrey", "dodgerblue", "firebrick",
      "floralwhite", "forestgreen", "fuchsia", "gainsboro", "ghostwhite", "gold", "goldenrod",
      "gray", "green", "greenyellow", "grey", "honeydew", "hotpink", "indianred", "indigo",
      "ivory", "khaki", "lavender", "lavenderblush", "lawngreen", "lemonchiffon", "lightblue",
      "lightcoral", "lightcyan", "lightgoldenrodyellow", "lightgray", "lightgreen", "lightgrey",
      "lightpink", "lightsalmon", "lightseagreen", "lightskyblue", "lightslategray",
      "lightslategrey", "lightsteelblue", "lightyellow", "lime", "limegreen", "linen",
      "magenta", "maroon", "mediumaquamarine", "mediumblue", "mediumorchid", "mediumpurple",
      "mediumseagreen", "mediumslateblue", "mediumspringgreen", "mediumturquoise",
      "mediumvioletred", "midnightblue", "mintcream", "mistyrose", "moccasin", "navajowhite",
      "navy", "oldlace", "olive", "olivedrab", "orange", "orangered", "orchid",
      "palegoldenrod", "palegreen", "paleturquoise", "palevioletred", "papayawhip",
      "peachpuff", "peru", "pink", "plum", "powderblue", "purple", "rebeccapurple", "red",
      "rosybrown", "royalblue", "saddlebrown", "salmon", "sandybrown", "seagreen", "seashell",
      "sienna", "silver", "skyblue", "slateblue", "slategray", "slategrey", "snow",
      "springgreen", "steelblue", "tan", "teal", "thistle", "tomato", "transparent",
      "turquoise", "violet", "wheat", "white", "whitesmoke", "yellow", "yellowgreen"};
  return names;
}

}  // namespace detail

/// True for CSS color syntax: #rgb, #rgba, #rrggbb, #rrggbbaa, rgb()/rgba()/
/// hsl()/hsla() functional forms, and the CSS named colors.
inline bool is_css_color(std::string_view text) {
  if (text.empty()) return false;
  if (text.front() == '#') {
    auto hex = text.substr(1);
    if (hex.size() != 3 && hex.size() != 4 && hex.size() != 6 && hex.size() != 8) return false;
    return std::all_of(hex.begin(), hex.end(),
                       [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
  }
  std::string lower;
  for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (std::string_view fn : {"rgb(", "rgba(", "hsl(", "hsla("}) {
    if (lower.rfind(fn, 0) == 0) {
      if (lower.back() != ')') return false;
      auto inner = std::string_view(lower).substr(fn.size(), lower.size() - fn.size() - 1);
      return std::all_of(inner.begin(), inner.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || c == ',' || c == '.' ||
               c == '%' || c == ' ' || c == '/' || c == '-';
      });
    }
  }
  return detail::css_color_names().count(lower) != 0;
}

/// Parses "25p" (percentage) or "25" (absolute count).
inline std::optional<CollapseSize> parse_collapse_size(std::string_view text) {
  if (text.empty()) return std::nullopt;
  CollapseSize size;
  if (text.back() == 'p' || text.back() == '%') {
    size.percent = true;
    text.remove_suffix(1);
  }
  if (text.empty()) return std::nullopt;
  std::string buf(text);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || !std::isfinite(v)) return std::nullopt;
  if (!size.percent && (v != std::floor(v))) return std::nullopt;
  size.value = v;
  return size;
}

/// Shortest round-trippable text for a double: integers print without a
/// fractional part.
inline std::string format_number(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) return fmt::format("{}", static_cast<long long>(v));
  return fmt::format("{}", v);
}

inline std::string format_collapse_size(const CollapseSize& size) {
  return format_number(size.value) + (size.percent ? "p" : "");
}

namespace detail {

/// Walks a JSON document and builds a Spec, recording every problem.
class SpecReader {
 public:
  Diagnostics diags;
  std::vector<UnknownKey> unknown;

  void unknown_key(const std::string& container, const std::string& key, const json& value) {
    diags.push_back(make_warning(join_pointer(container, key),
                                 fmt::format("unrecognized key \"{}\" ignored", key)));
    unknown.push_back({container, key, value});
  }

  void type_error(const std::string& path, std::string_view expected, const json& got) {
    diags.push_back(make_error(path, fmt::format("expected {} but found {}", expected,
                                                 std::string(got.type_name()))));
  }

  std::optional<std::string> read_string(const json& j, const std::string& path) {
    if (j.is_string()) return j.get<std::string>();
    type_error(path, "a string", j);
    return std::nullopt;
  }

  /// Style values may be written as strings or numbers (penwidth: 2).
  std::optional<std::string> read_style_value(const json& j, const std::string& path) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
    if (j.is_number()) return format_number(j.get<double>());
    if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
    type_error(path, "a string or number", j);
    return std::nullopt;
  }

  std::optional<bool> read_bool(const json& j, const std::string& path) {
    if (j.is_boolean()) return j.get<bool>();
    type_error(path, "a boolean", j);
    return std::nullopt;
  }

  std::optional<std::int64_t> read_count(const json& j, const std::string& path) {
    if (j.is_number_integer()) {
      auto v = j.get<std::int64_t>();
      if (v < 0) {
        diags.push_back(make_error(path, fmt::format("expected a nonnegative integer, got {}", v)));
        return std::nullopt;
      }
      return v;
    }
    if (j.is_number_unsigned()) return static_cast<std::int64_t>(j.get<std::uint64_t>());
    type_error(path, "a nonnegative integer", j);
    return std::nullopt;
  }

  std::vector<std::string> read_string_list(const json& j, const std::string& path) {
    std::vector<std::string> out;
    if (!j.is_array()) {
      type_error(path, "an array of strings", j);
      return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (auto s = read_string(j[i], join_pointer(path, i))) out.push_back(*s);
    }
    return out;
  }

  bool expect_object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    type_error(path, "an object", j);
    return false;
  }

  void read_style_entry(StyleMap& style, const std::string& key, const json& value,
                        const std::string& path, bool validate_colors) {
    if (auto v = read_style_value(value, path)) {
      if (is_color_key(key) && validate_colors && !is_css_color(*v)) {
        diags.push_back(make_error(path, fmt::format("\"{}\" is not a valid CSS color", *v)));
        return;
      }
      style[key] = *v;
    }
  }

  /// Shared by nodes, edges and the global rendering entries: dot style keys
  /// may appear inline, or grouped under a "style" object.
  bool read_style_key(StyleMap& style, const std::string& key, const json& value,
                      const std::string& path, bool validate_colors) {
    if (key == "style" && value.is_object()) {
      for (const auto& [k, v] : value.items()) {
        const auto sub = join_pointer(path, k);
        if (!is_style_key(k)) {
          unknown_key(path, k, v);
          continue;
        }
        read_style_entry(style, k, v, sub, validate_colors);
      }
      return true;
    }
    if (!is_style_key(key)) return false;
    read_style_entry(style, key, value, path, validate_colors);
    return true;
  }

  NodeDecl read_node(const json& j, const std::string& path) {
    NodeDecl n;
    n.origin = path;
    if (!expect_object(j, path)) return n;
    bool has_id = false;
    for (const auto& [key, value] : j.items()) {
      const auto sub = join_pointer(path, key);
      if (key == "id") {
        if (auto s = read_string(value, sub)) {
          n.id = *s;
          has_id = true;
        }
      } else if (key == "label") {
        n.label = read_style_value(value, sub);
      } else if (key == "class") {
        n.css_class = read_string(value, sub);
      } else if (!read_style_key(n.style, key, value, sub, false)) {
        unknown_key(path, key, value);
      }
    }
    if (!has_id && !j.contains("id"))
      diags.push_back(make_error(join_pointer(path, "id"), "node is missing its \"id\""));
    return n;
  }

  EdgeDecl read_edge(const json& j, const std::string& path) {
    EdgeDecl e;
    e.origin = path;
    if (!expect_object(j, path)) return e;
    for (const auto& [key, value] : j.items()) {
      const auto sub = join_pointer(path, key);
      if (key == "source") {
        if (auto s = read_string(value, sub)) e.source = *s;
      } else if (key == "target") {
        if (auto s = read_string(value, sub)) e.target = *s;
      } else if (key == "label") {
        e.label = read_style_value(value, sub);
      } else if (key == "class") {
        e.css_class = read_string(value, sub);
      } else if (!read_style_key(e.style, key, value, sub, false)) {
        unknown_key(path, key, value);
      }
    }
    for (const char* required : {"source", "target"})
      if (!j.contains(required))
        diags.push_back(make_error(join_pointer(path, required),
                                   fmt::format("edge is missing its \"{}\"", required)));
    return e;
  }

  LoopDecl read_loop(const json& j, const std::string& path, std::size_t depth = 1) {
    LoopDecl l;
    l.origin = path;
    if (!expect_object(j, path)) return l;
    if (depth > defaults::max_loop_nesting) {
      diags.push_back(make_error(path, fmt::format("loops nested deeper than {} levels", defaults::max_loop_nesting)));
      return l;
    }
    for (const auto& [key, value] : j.items()) {
      const auto sub = join_pointer(path, key);
      if (key == "id" || key == "name") {
        if (auto s = read_string(value, sub)) l.id = *s;
      } else if (key == "nodes") {
        l.nodes = read_string_list(value, sub);
      } else if (key == "header") {
        l.header = read_string(value, sub);
      } else if (key == "backEdges") {
        l.back_edges = read_back_edges(value, sub);
      } else if (key == "loops") {
        if (!value.is_array()) {
          type_error(sub, "an array of loops", value);
          continue;
        }
        for (std::size_t i = 0; i < value.size(); ++i)
          l.children.push_back(read_loop(value[i], join_pointer(sub, i), depth + 1));
      } else {
        unknown_key(path, key, value);
      }
    }
    return l;
  }

  std::vector<std::pair<std::string, std::string>> read_back_edges(const json& j,
                                                                   const std::string& path) {
    std::vector<std::pair<std::string, std::string>> out;
    if (!j.is_array()) {
      type_error(path, "an array of [source, target] pairs", j);
      return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto sub = join_pointer(path, i);
      const auto& e = j[i];
      if (e.is_array() && e.size() == 2 && e[0].is_string() && e[1].is_string()) {
        out.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      } else if (e.is_object() && e.contains("source") && e.contains("target") &&
                 e["source"].is_string() && e["target"].is_string()) {
        out.emplace_back(e["source"].get<std::string>(), e["target"].get<std::string>());
      } else {
        type_error(sub, "a [source, target] pair", e);
      }
    }
    return out;
  }

  FunctionDecl read_function(const json& j, const std::string& path) {
    FunctionDecl f;
    f.origin = path;
    if (!expect_object(j, path)) return f;
    for (const auto& [key, value] : j.items()) {
      const auto sub = join_pointer(path, key);
      if (key == "id") {
        f.id = read_string(value, sub);
      } else if (key == "name") {
        if (auto s = read_string(value, sub)) f.name = *s;
      } else if (key == "nodes") {
        f.nodes = read_string_list(value, sub);
      } else {
        unknown_key(path, key, value);
      }
    }
    if (!j.contains("name") && !j.contains("id"))
      diags.push_back(make_error(join_pointer(path, "name"), "function is missing its \"name\""));
    if (f.name.empty() && f.id) f.name = *f.id;
    return f;
  }

  template <typename T, typename Fn>
  std::vector<T> read_list(const json& j, const std::string& path, Fn&& fn) {
    std::vector<T> out;
    if (!j.is_array()) {
      type_error(path, "an array", j);
      return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(fn(j[i], join_pointer(path, i)));
    return out;
  }

  DataSection read_data(const json& j, const std::string& path) {
    DataSection d;
    if (!expect_object(j, path)) return d;
    for (const auto& [key, value] : j.items()) {
      const auto sub = join_pointer(path, key);
      if (key == "nodes") {
        d.nodes = read_list<NodeDecl>(value, sub, [this](const json& v, const std::string& p) {
          return read_node(v, p);
        });
      } else if (key == "edges" || key == "links") {
        auto edges = read_list<EdgeDecl>(value, sub, [this](const json& v, const std::string& p) {
          return read_edge(v, p);
        });
        d.edges.insert(d.edges.end(), edges.begin(), edges.end());
      } else if (key == "loops") {
        d.loops = read_list<LoopDecl>(value, sub, [this](const json& v, const std::string& p) {
          return read_loop(v, p);
        });
      } else if (key == "functions") {
        d.functions = read_list<FunctionDecl>(
            value, sub, [this](const json& v, const std::string& p) { return read_function(v, p); });
      } else if (key == "graphFile") {
        d.graph_file = read_string(value, sub);
      } else if (key == "structureFile") {
        d.structure_file = read_string(value, sub);
      } else if (key == "analysisFile") {
        d.analysis_file = read_string(value, sub);
      } else {
        unknown_key(path, key, value);
      }
    }
    if (d.nodes.empty() && d.edges.empty() && !d.graph_file && !j.contains("nodes") &&
        !j.contains("edges") && !j.contains("links"))
      diags.push_back(make_error(join_pointer(path, "nodes"),
                                 "data needs \"nodes\"/\"edges\" or a \"graphFile\""));
    return d;
  }

  CollapsingRules read_collapsing(const json& j, const std::string& path) {
    CollapsingRules r;
    if (!expect_object(j, path)) return r;
    for (const auto& [key, value] : j.items()) {
      const auto sub = join_pointer(path, key);
      if (key == "minIncomingEdges") {
        r.min_incoming_edges = read_count(value, sub);
      } else if (key == "minOutgoingEdges") {
        r.min_outgoing_edges = read_count(value, sub);
      } else if (key == "maxCollapseSize") {
        std::optional<CollapseSize> size;
        if (value.is_number_integer() || value.is_number_unsigned()) {
          if (auto c = read_count(value, sub)) size = CollapseSize{false, static_cast<double>(*c)};
        } else if (value.is_string()) {
          size = parse_collapse_size(value.get<std::string>());
          if (!size)
            diags.push_back(make_error(
                sub, fmt::format("\"{}\" is not a node count or a percentage like \"25p\"",
                                 value.get<std::string>())));
          else if (!size->percent && size->value < 0)
            diags.push_back(make_error(sub, "maxCollapseSize must be nonnegative"));
        } else {
          type_error(sub, "an integer or a percentage string like \"25p\"", value);
        }
        if (size && size->percent && !(size->value > 0 && size->value <= 100)) {
          diags.push_back(make_error(sub, "percentage must lie in (0, 100]"));
          size.reset();
        }
        r.max_collapse_size = size;
      } else if (key == "alwaysCollapseList") {
        r.always_collapse = read_string_list(value, sub);
      } else if (key == "neverCollapseList") {
        r.never_collapse = read_string_list(value, sub);
      } else {
        unknown_key(path, key, value);
      }
    }
    for (std::size_t i = 0; i < r.always_collapse.size(); ++i) {
      const auto& name = r.always_collapse[i];
      if (std::find(r.never_collapse.begin(), r.never_collapse.end(), name) !=
          r.never_collapse.end())
        diags.push_back(make_error(
            join_pointer(join_pointer(path, "alwaysCollapseList"), i),
            fmt::format("function \"{}\" is in both alwaysCollapseList and neverCollapseList",
                        name)));
    }
    return r;
  }

  RenderSection read_rendering(const json& j, const std::string& path) {
    RenderSection r;
    if (!expect_object(j, path)) return r;
    for (const auto& [key, value] : j.items()) {
      const auto sub = join_pointer(path, key);
      if (key == "node") {
        if (!expect_object(value, sub)) continue;
        for (const auto& [k, v] : value.items()) {
          const auto p = join_pointer(sub, k);
          if (k == "label") {
            if (auto s = read_string(v, p)) {
              if (*s == "id")
                r.node.label = LabelSource::id;
              else if (*s == "label")
                r.node.label = LabelSource::label;
              else
                diags.push_back(make_error(
                    p, fmt::format("label source must be \"id\" or \"label\", got \"{}\"", *s)));
            }
          } else if (k == "class") {
            r.node.css_class = read_string(v, p);
          } else if (!read_style_key(r.node.style, k, v, p, true)) {
            unknown_key(sub, k, v);
          }
        }
      } else if (key == "edge" || key == "link") {
        if (!expect_object(value, sub)) continue;
        for (const auto& [k, v] : value.items()) {
          const auto p = join_pointer(sub, k);
          if (k == "class")
            r.edge.css_class = read_string(v, p);
          else if (!read_style_key(r.edge.style, k, v, p, true))
            unknown_key(sub, k, v);
        }
      } else if (key == "loop") {
        if (!expect_object(value, sub)) continue;
        for (const auto& [k, v] : value.items()) {
          const auto p = join_pointer(sub, k);
          if (k == "showBackground") {
            r.loop.show_background = read_bool(v, p);
          } else if (k == "backgroundColor" || k == "backEdgeColor") {
            auto s = read_string(v, p);
            if (s && !is_css_color(*s)) {
              diags.push_back(make_error(p, fmt::format("\"{}\" is not a valid CSS color", *s)));
              s.reset();
            }
            (k == "backgroundColor" ? r.loop.background_color : r.loop.back_edge_color) = s;
          } else {
            unknown_key(sub, k, v);
          }
        }
      } else if (key == "function") {
        if (!expect_object(value, sub)) continue;
        for (const auto& [k, v] : value.items()) {
          const auto p = join_pointer(sub, k);
          if (k == "showBoundaries")
            r.function.show_boundaries = read_bool(v, p);
          else if (k == "collapsingRules")
            r.function.collapsing_rules = read_collapsing(v, p);
          else
            unknown_key(sub, k, v);
        }
      } else {
        unknown_key(path, key, value);
      }
    }
    return r;
  }

  FilterSection read_filtering(const json& j, const std::string& path) {
    FilterSection f;
    if (!expect_object(j, path)) return f;
    for (const auto& [key, value] : j.items()) {
      const auto sub = join_pointer(path, key);
      if (key == "isHopFilterOn")
        f.hop_filter_on = read_bool(value, sub);
      else if (key == "selectedNodes")
        f.selected_nodes = read_string_list(value, sub);
      else if (key == "isLoopFilterOn")
        f.loop_filter_on = read_bool(value, sub);
      else if (key == "maxHops")
        f.max_hops = read_count(value, sub);
      else if (key == "minNodes")
        f.min_nodes = read_count(value, sub);
      else if (key == "maxNodes") {
        f.max_nodes = read_count(value, sub);
        if (f.max_nodes && *f.max_nodes == 0) {
          diags.push_back(make_error(sub, "maxNodes must be a positive integer"));
          f.max_nodes.reset();
        }
      } else
        unknown_key(path, key, value);
    }
    if (f.hop_filter_on.value_or(false) && f.selected_nodes.empty())
      diags.push_back(make_error(join_pointer(path, "selectedNodes"),
                                 "isHopFilterOn requires a nonempty selectedNodes list"));
    if (f.min_nodes && f.max_nodes && *f.min_nodes > *f.max_nodes)
      diags.push_back(make_error(join_pointer(path, "minNodes"),
                                 fmt::format("minNodes ({}) exceeds maxNodes ({})", *f.min_nodes,
                                             *f.max_nodes)));
    return f;
  }

  void check_unique_node_ids(const DataSection& d, const std::string& path) {
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < d.nodes.size(); ++i) {
      auto [it, inserted] = seen.emplace(d.nodes[i].id, i);
      if (!inserted)
        diags.push_back(make_error(
            join_pointer(join_pointer(join_pointer(path, "nodes"), i), "id"),
            fmt::format("duplicate node id \"{}\" (first declared at index {})", d.nodes[i].id,
                        it->second)));
    }
  }

  void check_loops(const std::vector<LoopDecl>& loops) {
    for (const auto& l : loops) {
      if (l.nodes.empty() && l.children.empty())
        diags.push_back(make_error(join_pointer(l.origin, "nodes"), "loop has no member nodes"));
      if (l.header && std::find(l.nodes.begin(), l.nodes.end(), *l.header) == l.nodes.end() &&
          !loop_contains(l, *l.header))
        diags.push_back(make_error(join_pointer(l.origin, "header"),
                                   fmt::format("header \"{}\" is not a member of the loop",
                                               *l.header)));
      check_loops(l.children);
    }
  }

  static bool loop_contains(const LoopDecl& l, const std::string& id) {
    if (std::find(l.nodes.begin(), l.nodes.end(), id) != l.nodes.end()) return true;
    return std::any_of(l.children.begin(), l.children.end(),
                       [&](const LoopDecl& c) { return loop_contains(c, id); });
  }

  std::optional<Spec> read_spec(const json& doc) {
    if (!doc.is_object()) {
      type_error("", "a JSON object", doc);
      return std::nullopt;
    }
    Spec spec;
    bool has_data = false;
    for (const auto& [key, value] : doc.items()) {
      const auto sub = join_pointer("", key);
      if (key == "data") {
        spec.data = read_data(value, sub);
        has_data = true;
      } else if (key == "rendering") {
        spec.rendering = read_rendering(value, sub);
      } else if (key == "filtering") {
        spec.filtering = read_filtering(value, sub);
      } else {
        unknown_key("", key, value);
      }
    }
    if (!has_data) {
      diags.push_back(make_error("/data", "the top-level \"data\" section is missing"));
    } else {
      check_unique_node_ids(spec.data, "/data");
      check_loops(spec.data.loops);
    }
    spec.unknown_keys = unknown;
    if (has_errors(diags)) return std::nullopt;
    return spec;
  }
};

/// 1-based line/column of a 0-based byte offset.
inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline constexpr std::size_t max_json_depth = 256;

/// Offset of the first bracket nested deeper than `limit`, skipping strings.
inline std::optional<std::size_t> nesting_overflow(std::string_view text, std::size_t limit) {
  std::size_t depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
    } else if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      if (++depth > limit) return i;
    } else if ((c == ']' || c == '}') && depth > 0) {
      --depth;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses JSON text, reporting syntax errors with line and column.
inline Result<json> parse_json_text(std::string_view text, const std::optional<std::string>& file = {}) {
  Result<json> out;
  if (auto at = detail::nesting_overflow(text, detail::max_json_depth)) {
    Diagnostic d = make_error("", fmt::format("JSON nested deeper than {} levels", detail::max_json_depth));
    auto [line, col] = detail::line_column(text, *at);
    d.line = line;
    d.column = col;
    d.file = file;
    out.diagnostics.push_back(std::move(d));
    return out;
  }
  try {
    out.value = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    Diagnostic d = make_error("", "malformed JSON");
    const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    auto [line, col] = detail::line_column(text, offset);
    d.line = line;
    d.column = col;
    d.file = file;
    std::string what = e.what();
    // nlohmann prefixes "[json.exception.parse_error.101] parse error at line L, column C: "
    if (auto pos = what.find(": "); pos != std::string::npos) what = what.substr(pos + 2);
    d.message = "malformed JSON: " + what;
    out.diagnostics.push_back(std::move(d));
  } catch (const json::exception& e) {
    // Number overflow and similar are reported without a position.
    std::string what = e.what();
    if (auto pos = what.find("] "); pos != std::string::npos) what = what.substr(pos + 2);
    Diagnostic d = make_error("", "malformed JSON: " + what);
    d.file = file;
    out.diagnostics.push_back(std::move(d));
  }
  return out;
}

/// Builds a Spec from an already-parsed document. Defaults are not applied.
inline Result<Spec> parse_spec_document(const json& doc) {
  detail::SpecReader reader;
  Result<Spec> out;
  out.value = reader.read_spec(doc);
  out.diagnostics = std::move(reader.diags);
  return out;
}

/// Parses CFGConf JSON text. On failure the value is empty and every problem
/// found is reported; unrecognized keys only produce warnings.
inline Result<Spec> parse_spec(std::string_view text) {
  auto doc = parse_json_text(text);
  if (!doc) return {std::nullopt, std::move(doc.diagnostics)};
  return parse_spec_document(*doc);
}

namespace detail {

inline void name_loops(std::vector<LoopDecl>& loops, const std::string& prefix) {
  for (std::size_t i = 0; i < loops.size(); ++i) {
    auto& l = loops[i];
    if (!l.id) l.id = prefix + std::to_string(i);
    name_loops(l.children, *l.id + ".");
  }
}

}  // namespace detail

/// Fills every optional field consulted downstream. Idempotent.
inline Spec apply_defaults(Spec spec) {
  auto& f = spec.filtering;
  if (!f.hop_filter_on) f.hop_filter_on = false;
  if (!f.loop_filter_on) f.loop_filter_on = *f.hop_filter_on;
  if (!f.max_hops) f.max_hops = defaults::max_hops;
  if (!f.min_nodes) f.min_nodes = defaults::min_nodes;

  auto& r = spec.rendering;
  if (!r.node.label) r.node.label = defaults::label_source;
  if (!r.node.style.count("shape")) r.node.style["shape"] = std::string(defaults::node_shape);
  if (!r.loop.show_background) r.loop.show_background = defaults::show_loop_background;
  if (!r.loop.background_color)
    r.loop.background_color = std::string(defaults::loop_background_color);
  if (!r.loop.back_edge_color) r.loop.back_edge_color = std::string(defaults::back_edge_color);
  if (!r.function.show_boundaries) r.function.show_boundaries = defaults::show_function_boundaries;
  if (auto& rules = r.function.collapsing_rules) {
    if (!rules->min_incoming_edges && !rules->min_outgoing_edges)
      rules->min_incoming_edges = defaults::min_incoming_edges;
    if (!rules->max_collapse_size)
      rules->max_collapse_size = CollapseSize{true, defaults::max_collapse_percent};
  }

  detail::name_loops(spec.data.loops, "loop");
  for (auto& fn : spec.data.functions)
    if (!fn.id) fn.id = fn.name;
  return spec;
}

namespace detail {

inline void write_style(json& j, const StyleMap& style) {
  for (const auto& [k, v] : style) j[k] = v;
}

inline json loop_to_json(const LoopDecl& l) {
  json j = json::object();
  if (l.id) j["id"] = *l.id;
  j["nodes"] = l.nodes;
  if (l.header) j["header"] = *l.header;
  if (l.back_edges) {
    json be = json::array();
    for (const auto& [s, t] : *l.back_edges) be.push_back({s, t});
    j["backEdges"] = be;
  }
  if (!l.children.empty()) {
    json kids = json::array();
    for (const auto& c : l.children) kids.push_back(loop_to_json(c));
    j["loops"] = kids;
  }
  return j;
}

}  // namespace detail

/// Canonical JSON form of a Spec; parse_spec(serialize_spec(s)) == s up to
/// the `origin` bookkeeping fields.
inline json spec_to_json(const Spec& spec) {
  json doc = json::object();
  json data = json::object();
  const auto& d = spec.data;
  if (!d.nodes.empty()) {
    json nodes = json::array();
    for (const auto& n : d.nodes) {
      json j = json::object();
      detail::write_style(j, n.style);
      j["id"] = n.id;
      if (n.label) j["label"] = *n.label;
      if (n.css_class) j["class"] = *n.css_class;
      nodes.push_back(j);
    }
    data["nodes"] = nodes;
  }
  if (!d.edges.empty()) {
    json edges = json::array();
    for (const auto& e : d.edges) {
      json j = json::object();
      detail::write_style(j, e.style);
      j["source"] = e.source;
      j["target"] = e.target;
      if (e.label) j["label"] = *e.label;
      if (e.css_class) j["class"] = *e.css_class;
      edges.push_back(j);
    }
    data["edges"] = edges;
  }
  if (!d.loops.empty()) {
    json loops = json::array();
    for (const auto& l : d.loops) loops.push_back(detail::loop_to_json(l));
    data["loops"] = loops;
  }
  if (!d.functions.empty()) {
    json fns = json::array();
    for (const auto& f : d.functions) {
      json j = json::object();
      if (f.id) j["id"] = *f.id;
      j["name"] = f.name;
      j["nodes"] = f.nodes;
      fns.push_back(j);
    }
    data["functions"] = fns;
  }
  if (d.graph_file) data["graphFile"] = *d.graph_file;
  if (d.structure_file) data["structureFile"] = *d.structure_file;
  if (d.analysis_file) data["analysisFile"] = *d.analysis_file;
  doc["data"] = data;

  const auto& r = spec.rendering;
  json rendering = json::object();
  {
    json node = json::object();
    detail::write_style(node, r.node.style);
    if (r.node.label) node["label"] = *r.node.label == LabelSource::id ? "id" : "label";
    if (r.node.css_class) node["class"] = *r.node.css_class;
    if (!node.empty()) rendering["node"] = node;
    json edge = json::object();
    detail::write_style(edge, r.edge.style);
    if (r.edge.css_class) edge["class"] = *r.edge.css_class;
    if (!edge.empty()) rendering["edge"] = edge;
    json loop = json::object();
    if (r.loop.show_background) loop["showBackground"] = *r.loop.show_background;
    if (r.loop.background_color) loop["backgroundColor"] = *r.loop.background_color;
    if (r.loop.back_edge_color) loop["backEdgeColor"] = *r.loop.back_edge_color;
    if (!loop.empty()) rendering["loop"] = loop;
    json fn = json::object();
    if (r.function.show_boundaries) fn["showBoundaries"] = *r.function.show_boundaries;
    if (const auto& rules = r.function.collapsing_rules) {
      json cr = json::object();
      if (rules->min_incoming_edges) cr["minIncomingEdges"] = *rules->min_incoming_edges;
      if (rules->min_outgoing_edges) cr["minOutgoingEdges"] = *rules->min_outgoing_edges;
      if (rules->max_collapse_size) {
        if (rules->max_collapse_size->percent)
          cr["maxCollapseSize"] = format_collapse_size(*rules->max_collapse_size);
        else
          cr["maxCollapseSize"] = static_cast<std::int64_t>(rules->max_collapse_size->value);
      }
      if (!rules->always_collapse.empty()) cr["alwaysCollapseList"] = rules->always_collapse;
      if (!rules->never_collapse.empty()) cr["neverCollapseList"] = rules->never_collapse;
      fn["collapsingRules"] = cr;
    }
    if (!fn.empty()) rendering["function"] = fn;
  }
  if (!rendering.empty()) doc["rendering"] = rendering;

  const auto& f = spec.filtering;
  json filtering = json::object();
  if (f.hop_filter_on) filtering["isHopFilterOn"] = *f.hop_filter_on;
  if (!f.selected_nodes.empty()) filtering["selectedNodes"] = f.selected_nodes;
  if (f.loop_filter_on) filtering["isLoopFilterOn"] = *f.loop_filter_on;
  if (f.max_hops) filtering["maxHops"] = *f.max_hops;
  if (f.min_nodes) filtering["minNodes"] = *f.min_nodes;
  if (f.max_nodes) filtering["maxNodes"] = *f.max_nodes;
  if (!filtering.empty()) doc["filtering"] = filtering;

  for (const auto& u : spec.unknown_keys) {
    try {
      auto& target = doc[json::json_pointer(u.path)];
      if (target.is_null()) target = json::object();
      if (target.is_object()) target[u.key] = u.value;
    } catch (const json::exception&) {
      // the containing object was renamed on output ("links" -> "edges")
    }
  }
  return doc;
}

inline std::string serialize_spec(const Spec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

namespace detail {

inline void clear_origins(std::vector<LoopDecl>& loops) {
  for (auto& l : loops) {
    l.origin.clear();
    clear_origins(l.children);
  }
}

}  // namespace detail

/// Structural comparison that ignores where declarations came from.
inline bool same_structure(Spec a, Spec b) {
  for (Spec* s : {&a, &b}) {
    for (auto& n : s->data.nodes) n.origin.clear();
    for (auto& e : s->data.edges) e.origin.clear();
    for (auto& f : s->data.functions) f.origin.clear();
    detail::clear_origins(s->data.loops);
  }
  return a == b;
}

}  // namespace cfgconf
