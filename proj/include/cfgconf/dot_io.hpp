#pragma once

// Reader and writer for the subset of the graphviz dot language used to
// exchange control flow graphs.
//
// Accepted input:
//   [strict] digraph [ID] { stmt* }
//   stmt  := node_id [attrs] | node_id (-> node_id)+ [attrs]
//          | (graph|node|edge) attrs | ID = ID
//          | [subgraph [ID]] { stmt* }
//   attrs := ([ (ID = ID [,;])* ])+
//   ID    := identifier | numeral | "quoted" ("+" "quoted")*
// Comments: //, /* */, and lines starting with #.
// Rejected with a diagnostic: undirected graphs, ports on input node ids,
// HTML labels, subgraphs used as edge operands.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "cfgconf/diagnostics.hpp"

namespace cfgconf {

using AttrMap = std::map<std::string, std::string>;

struct DotNode {
  std::string id;
  AttrMap attrs;

  bool operator==(const DotNode&) const = default;
};

struct DotEdge {
  std::string source;
  std::string target;
  AttrMap attrs;
  std::optional<std::string> source_port;  ///< emitted only; never parsed
  std::optional<std::string> target_port;

  bool operator==(const DotEdge&) const = default;
};

struct DotSubgraph {
  std::optional<std::string> name;
  AttrMap attrs;
  std::vector<std::string> nodes;  ///< ids mentioned directly in this block
  std::vector<DotSubgraph> subgraphs;

  bool operator==(const DotSubgraph&) const = default;
};

/// A parsed dot document. Node and edge lists keep first-appearance order;
/// node/edge default statements are folded into each element's attributes
/// and also kept for re-emission.
struct DotGraph {
  bool directed = true;
  bool strict = false;
  std::optional<std::string> name;
  AttrMap graph_attrs;
  AttrMap node_defaults;
  AttrMap edge_defaults;
  std::vector<DotNode> nodes;
  std::vector<DotEdge> edges;
  std::vector<DotSubgraph> subgraphs;

  bool operator==(const DotGraph&) const = default;
};

namespace detail::dot {

enum class Tok { id, lbrace, rbrace, lbracket, rbracket, semi, comma, equals, colon, arrow, dashdash, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  bool quoted = false;
  std::size_t line = 1;
  std::size_t column = 1;
};

struct SyntaxError {
  std::string message;
  std::size_t line;
  std::size_t column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_trivia();
    Token t;
    t.line = line_;
    t.column = col_;
    if (pos_ >= text_.size()) return t;
    const char c = text_[pos_];
    auto single = [&](Tok k) {
      advance();
      t.kind = k;
      t.text = std::string(1, c);
      return t;
    };
    switch (c) {
      case '{': return single(Tok::lbrace);
      case '}': return single(Tok::rbrace);
      case '[': return single(Tok::lbracket);
      case ']': return single(Tok::rbracket);
      case ';': return single(Tok::semi);
      case ',': return single(Tok::comma);
      case '=': return single(Tok::equals);
      case ':': return single(Tok::colon);
      default: break;
    }
    if (c == '-' && pos_ + 1 < text_.size() && (text_[pos_ + 1] == '>' || text_[pos_ + 1] == '-')) {
      t.kind = text_[pos_ + 1] == '>' ? Tok::arrow : Tok::dashdash;
      t.text = text_.substr(pos_, 2);
      advance();
      advance();
      return t;
    }
    if (c == '"') {
      t.kind = Tok::id;
      t.quoted = true;
      t.text = read_quoted();
      // "a" + "b" concatenation
      for (;;) {
        const auto save_pos = pos_;
        const auto save_line = line_;
        const auto save_col = col_;
        skip_trivia();
        if (pos_ < text_.size() && text_[pos_] == '+') {
          advance();
          skip_trivia();
          if (pos_ < text_.size() && text_[pos_] == '"') {
            t.text += read_quoted();
            continue;
          }
          throw SyntaxError{"expected a quoted string after '+'", line_, col_};
        }
        pos_ = save_pos;
        line_ = save_line;
        col_ = save_col;
        break;
      }
      return t;
    }
    if (c == '<') throw SyntaxError{"HTML-like labels are not supported", line_, col_};
    if (is_id_start(c)) {
      t.kind = Tok::id;
      while (pos_ < text_.size() && is_id_char(text_[pos_])) {
        t.text += text_[pos_];
        advance();
      }
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-') {
      t.kind = Tok::id;
      if (c == '-') {
        t.text += c;
        advance();
      }
      bool digits = false;
      bool dot = false;
      while (pos_ < text_.size()) {
        const char d = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          digits = true;
        } else if (d == '.' && !dot) {
          dot = true;
        } else {
          break;
        }
        t.text += d;
        advance();
      }
      if (!digits) throw SyntaxError{fmt::format("unexpected character '{}'", c), t.line, t.column};
      return t;
    }
    throw SyntaxError{fmt::format("unexpected character '{}'", printable(c)), line_, col_};
  }

 private:
  static std::string printable(char c) {
    if (std::isprint(static_cast<unsigned char>(c))) return std::string(1, c);
    return fmt::format("\\x{:02x}", static_cast<unsigned>(static_cast<unsigned char>(c)));
  }

  static bool is_id_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
           static_cast<unsigned char>(c) >= 0x80;
  }
  static bool is_id_char(char c) {
    return is_id_start(c) || std::isdigit(static_cast<unsigned char>(c));
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  bool at_line_start() const {
    for (std::size_t i = pos_; i > 0; --i) {
      const char p = text_[i - 1];
      if (p == '\n') return true;
      if (p != ' ' && p != '\t' && p != '\r') return false;
    }
    return true;
  }

  void skip_trivia() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
        const auto line = line_, col = col_;
        advance();
        advance();
        for (;;) {
          if (pos_ + 1 >= text_.size()) throw SyntaxError{"unterminated /* comment", line, col};
          if (text_[pos_] == '*' && text_[pos_ + 1] == '/') {
            advance();
            advance();
            break;
          }
          advance();
        }
      } else if (c == '#' && at_line_start()) {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string read_quoted() {
    const auto line = line_, col = col_;
    advance();  // opening quote
    std::string out;
    for (;;) {
      if (pos_ >= text_.size()) throw SyntaxError{"unterminated quoted string", line, col};
      const char c = text_[pos_];
      if (c == '"') {
        advance();
        return out;
      }
      if (c == '\\' && pos_ + 1 < text_.size()) {
        const char n = text_[pos_ + 1];
        if (n == '"') {
          out += '"';
          advance();
          advance();
          continue;
        }
        if (n == '\n') {
          advance();
          advance();
          continue;
        }
        if (n == '\r' && pos_ + 2 < text_.size() && text_[pos_ + 2] == '\n') {
          advance();
          advance();
          advance();
          continue;
        }
      }
      out += c;
      advance();
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool is_keyword(const Token& t, std::string_view kw) {
  return t.kind == Tok::id && !t.quoted && lower(t.text) == kw;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : lex_(text) { tok_ = lex_.next(); }

  DotGraph parse() {
    DotGraph g;
    if (is_keyword(tok_, "strict")) {
      g.strict = true;
      shift();
    }
    if (is_keyword(tok_, "graph"))
      throw SyntaxError{"CFGs must be directed: use 'digraph' instead of 'graph'", tok_.line,
                        tok_.column};
    if (!is_keyword(tok_, "digraph")) fail("expected 'digraph'");
    shift();
    if (tok_.kind == Tok::id) {
      g.name = tok_.text;
      shift();
    }
    expect(Tok::lbrace, "'{'");
    graph_ = &g;
    Scope top;
    parse_stmt_list(top, nullptr);
    expect(Tok::rbrace, "'}'");
    if (tok_.kind != Tok::end) fail("unexpected content after the closing '}'");
    return g;
  }

 private:
  struct Scope {
    AttrMap node_defaults;
    AttrMap edge_defaults;
  };

  [[noreturn]] void fail(const std::string& msg) const {
    std::string found = tok_.kind == Tok::end ? "end of input" : "'" + tok_.text + "'";
    throw SyntaxError{fmt::format("{}, found {}", msg, found), tok_.line, tok_.column};
  }

  void shift() { tok_ = lex_.next(); }

  void expect(Tok kind, std::string_view what) {
    if (tok_.kind != kind) fail(fmt::format("expected {}", what));
    shift();
  }

  std::string expect_id(std::string_view what) {
    if (tok_.kind != Tok::id) fail(fmt::format("expected {}", what));
    auto s = tok_.text;
    shift();
    return s;
  }

  void parse_attr_lists(AttrMap& into) {
    while (tok_.kind == Tok::lbracket) {
      shift();
      while (tok_.kind != Tok::rbracket) {
        auto key = expect_id("an attribute name");
        expect(Tok::equals, "'=' after attribute name");
        into[key] = expect_id("an attribute value");
        if (tok_.kind == Tok::comma || tok_.kind == Tok::semi) shift();
      }
      shift();
    }
  }

  /// Registers a node occurrence, creating it with the scope's defaults.
  void touch_node(const std::string& id, const Scope& scope, DotSubgraph* sub) {
    auto it = index_.find(id);
    if (it == index_.end()) {
      index_.emplace(id, graph_->nodes.size());
      graph_->nodes.push_back({id, scope.node_defaults});
    }
    if (sub && std::find(sub->nodes.begin(), sub->nodes.end(), id) == sub->nodes.end())
      sub->nodes.push_back(id);
  }

  std::string parse_node_id() {
    if (tok_.kind != Tok::id) fail("expected a node id");
    auto id = tok_.text;
    shift();
    if (tok_.kind == Tok::colon)
      throw SyntaxError{fmt::format("ports on node ids (\"{}:...\") are not supported in input", id),
                        tok_.line, tok_.column};
    return id;
  }

  void parse_stmt_list(Scope& scope, DotSubgraph* sub) {
    while (tok_.kind != Tok::rbrace && tok_.kind != Tok::end) {
      parse_stmt(scope, sub);
      if (tok_.kind == Tok::semi) shift();
    }
  }

  void parse_subgraph(const Scope& outer, DotSubgraph* parent) {
    DotSubgraph block;
    if (is_keyword(tok_, "subgraph")) {
      shift();
      if (tok_.kind == Tok::id) {
        block.name = tok_.text;
        shift();
      }
    }
    expect(Tok::lbrace, "'{' to open the subgraph");
    if (++depth_ > max_subgraph_depth) fail(fmt::format("subgraphs nested deeper than {} levels", max_subgraph_depth));
    Scope inner = outer;
    parse_stmt_list(inner, &block);
    expect(Tok::rbrace, "'}' to close the subgraph");
    --depth_;
    if (tok_.kind == Tok::arrow || tok_.kind == Tok::dashdash)
      fail("subgraphs cannot be used as edge endpoints");
    if (parent) {
      parent->subgraphs.push_back(std::move(block));
    } else {
      graph_->subgraphs.push_back(std::move(block));
    }
  }

  void parse_stmt(Scope& scope, DotSubgraph* sub) {
    if (tok_.kind == Tok::lbrace || is_keyword(tok_, "subgraph")) {
      parse_subgraph(scope, sub);
      return;
    }
    if (is_keyword(tok_, "graph") || is_keyword(tok_, "node") || is_keyword(tok_, "edge")) {
      const auto kw = lower(tok_.text);
      shift();
      if (tok_.kind != Tok::lbracket) fail(fmt::format("expected '[' after '{}'", kw));
      AttrMap attrs;
      parse_attr_lists(attrs);
      if (kw == "graph") {
        auto& target = sub ? sub->attrs : graph_->graph_attrs;
        for (auto& [k, v] : attrs) target[k] = v;
      } else if (kw == "node") {
        for (auto& [k, v] : attrs) scope.node_defaults[k] = v;
        if (!sub)
          for (auto& [k, v] : attrs) graph_->node_defaults[k] = v;
      } else {
        for (auto& [k, v] : attrs) scope.edge_defaults[k] = v;
        if (!sub)
          for (auto& [k, v] : attrs) graph_->edge_defaults[k] = v;
      }
      return;
    }
    if (is_keyword(tok_, "digraph") || is_keyword(tok_, "strict"))
      fail("nested graph declarations are not allowed");

    auto first = parse_node_id();
    if (tok_.kind == Tok::equals) {
      shift();
      auto value = expect_id("a value after '='");
      auto& target = sub ? sub->attrs : graph_->graph_attrs;
      target[first] = value;
      return;
    }
    if (tok_.kind == Tok::dashdash)
      throw SyntaxError{"CFGs must be directed: use '->' edges", tok_.line, tok_.column};
    if (tok_.kind == Tok::arrow) {
      std::vector<std::string> chain{first};
      while (tok_.kind == Tok::arrow || tok_.kind == Tok::dashdash) {
        if (tok_.kind == Tok::dashdash)
          throw SyntaxError{"CFGs must be directed: use '->' edges", tok_.line, tok_.column};
        shift();
        if (tok_.kind == Tok::lbrace || is_keyword(tok_, "subgraph"))
          fail("subgraphs cannot be used as edge endpoints");
        chain.push_back(parse_node_id());
      }
      AttrMap attrs = scope.edge_defaults;
      parse_attr_lists(attrs);
      for (const auto& id : chain) touch_node(id, scope, sub);
      for (std::size_t i = 0; i + 1 < chain.size(); ++i)
        graph_->edges.push_back({chain[i], chain[i + 1], attrs, std::nullopt, std::nullopt});
      return;
    }
    touch_node(first, scope, sub);
    if (tok_.kind == Tok::lbracket) {
      AttrMap attrs;
      parse_attr_lists(attrs);
      auto& node = graph_->nodes[index_.at(first)];
      for (auto& [k, v] : attrs) node.attrs[k] = v;
    }
  }

  static constexpr int max_subgraph_depth = 64;

  Lexer lex_;
  Token tok_;
  DotGraph* graph_ = nullptr;
  int depth_ = 0;
  std::map<std::string, std::size_t> index_;
};

inline bool is_plain_id(std::string_view s) {
  if (s.empty()) return false;
  static const char* const keywords[] = {"node", "edge", "graph", "digraph", "subgraph", "strict"};
  const auto low = lower(std::string(s));
  for (const char* kw : keywords)
    if (low == kw) return false;
  const bool all_digits = std::all_of(s.begin(), s.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c));
  });
  if (all_digits) return true;
  if (std::isdigit(static_cast<unsigned char>(s.front()))) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

}  // namespace detail::dot

/// Parses dot text. Syntax errors carry line and column.
inline Result<DotGraph> parse_dot(std::string_view text, const std::optional<std::string>& file = {}) {
  Result<DotGraph> out;
  try {
    detail::dot::Parser parser(text);
    out.value = parser.parse();
  } catch (const detail::dot::SyntaxError& e) {
    Diagnostic d = make_error("", e.message);
    d.line = e.line;
    d.column = e.column;
    d.file = file;
    out.diagnostics.push_back(std::move(d));
  }
  return out;
}

/// Quotes a dot id unless it is a plain identifier or an unsigned integer.
inline std::string quote_dot_id(std::string_view s) {
  if (detail::dot::is_plain_id(s)) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

namespace detail::dot {

inline std::string format_attrs(const AttrMap& attrs) {
  std::string out = "[";
  bool first = true;
  for (const auto& [k, v] : attrs) {
    if (!first) out += ", ";
    first = false;
    out += quote_dot_id(k) + "=" + quote_dot_id(v);
  }
  return out + "]";
}

inline void emit_subgraph(std::string& out, const DotSubgraph& s, int depth) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  out += pad + "subgraph";
  if (s.name) out += " " + quote_dot_id(*s.name);
  out += " {\n";
  for (const auto& [k, v] : s.attrs) out += pad + "  " + quote_dot_id(k) + "=" + quote_dot_id(v) + ";\n";
  for (const auto& id : s.nodes) out += pad + "  " + quote_dot_id(id) + ";\n";
  for (const auto& child : s.subgraphs) emit_subgraph(out, child, depth + 1);
  out += pad + "}\n";
}

}  // namespace detail::dot

/// Writes dot text: two-space indentation, attributes in lexicographic key
/// order, ids quoted only when they are not plain identifiers. Output is a
/// pure function of the graph.
inline std::string emit_dot(const DotGraph& g) {
  using detail::dot::format_attrs;
  std::string out;
  if (g.strict) out += "strict ";
  out += "digraph";
  if (g.name) out += " " + quote_dot_id(*g.name);
  out += " {\n";
  for (const auto& [k, v] : g.graph_attrs) out += "  " + quote_dot_id(k) + "=" + quote_dot_id(v) + ";\n";
  for (const auto& n : g.nodes) {
    out += "  " + quote_dot_id(n.id);
    if (!n.attrs.empty()) out += " " + format_attrs(n.attrs);
    out += ";\n";
  }
  for (const auto& e : g.edges) {
    out += "  " + quote_dot_id(e.source);
    if (e.source_port) out += ":" + *e.source_port;
    out += " -> " + quote_dot_id(e.target);
    if (e.target_port) out += ":" + *e.target_port;
    if (!e.attrs.empty()) out += " " + format_attrs(e.attrs);
    out += ";\n";
  }
  // Defaults last, after the elements that already carry them.
  if (!g.node_defaults.empty()) out += "  node " + format_attrs(g.node_defaults) + ";\n";
  if (!g.edge_defaults.empty()) out += "  edge " + format_attrs(g.edge_defaults) + ";\n";
  for (const auto& s : g.subgraphs) detail::dot::emit_subgraph(out, s, 1);
  out += "}\n";
  return out;
}

}  // namespace cfgconf
