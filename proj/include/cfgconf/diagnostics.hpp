#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace cfgconf {

enum class Severity { error, warning };

/// Coarse failure class, used by the CLI to choose an exit code.
enum class DiagCode { general, io, graph_too_large };

/// One validation or processing message.
///
/// `path` is a JSON pointer into the input document ("" is the root). Errors
/// raised for absent keys point at the key that should have been there.
/// `file` names an external file when the message concerns its contents;
/// `line`/`column` are 1-based and only set for text-level syntax errors.
struct Diagnostic {
  Severity severity = Severity::error;
  std::string path;
  std::string message;
  std::optional<std::string> file;
  std::optional<std::size_t> line;
  std::optional<std::size_t> column;
  DiagCode code = DiagCode::general;

  bool is_error() const { return severity == Severity::error; }
};

using Diagnostics = std::vector<Diagnostic>;

inline Diagnostic make_error(std::string path, std::string message,
                             DiagCode code = DiagCode::general) {
  Diagnostic d;
  d.severity = Severity::error;
  d.path = std::move(path);
  d.message = std::move(message);
  d.code = code;
  return d;
}

inline Diagnostic make_warning(std::string path, std::string message) {
  Diagnostic d;
  d.severity = Severity::warning;
  d.path = std::move(path);
  d.message = std::move(message);
  return d;
}

inline bool has_errors(const Diagnostics& diags) {
  for (const auto& d : diags)
    if (d.is_error()) return true;
  return false;
}

inline void append(Diagnostics& into, const Diagnostics& from) {
  into.insert(into.end(), from.begin(), from.end());
}

/// A value with the diagnostics produced while computing it. `value` is empty
/// when an error prevented a result.
template <typename T>
struct Result {
  std::optional<T> value;
  Diagnostics diagnostics;

  bool ok() const { return value.has_value(); }
  explicit operator bool() const { return ok(); }
  const T& operator*() const { return *value; }
  T& operator*() { return *value; }
  const T* operator->() const { return &*value; }
  T* operator->() { return &*value; }
};

/// Escapes a single reference token for use inside a JSON pointer.
inline std::string pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

inline std::string join_pointer(const std::string& base, const std::string& key) {
  return base + "/" + pointer_token(key);
}

inline std::string join_pointer(const std::string& base, std::size_t index) {
  return base + "/" + std::to_string(index);
}

/// `file:line:col: severity: message [at /json/pointer]`
inline std::string format_diagnostic(const Diagnostic& d) {
  std::string out;
  if (d.file) out += *d.file + ":";
  if (d.line) {
    out += std::to_string(*d.line) + ":";
    if (d.column) out += std::to_string(*d.column) + ":";
  }
  if (!out.empty()) out += " ";
  out += d.is_error() ? "error: " : "warning: ";
  out += d.message;
  if (!d.path.empty()) out += " [at " + d.path + "]";
  return out;
}

inline nlohmann::json diagnostic_to_json(const Diagnostic& d) {
  nlohmann::json j;
  j["severity"] = d.is_error() ? "error" : "warning";
  j["path"] = d.path;
  j["message"] = d.message;
  if (d.file) j["file"] = *d.file;
  if (d.line) j["line"] = *d.line;
  if (d.column) j["column"] = *d.column;
  return j;
}

inline std::ostream& operator<<(std::ostream& os, const Diagnostic& d) {
  return os << format_diagnostic(d);
}

}  // namespace cfgconf
