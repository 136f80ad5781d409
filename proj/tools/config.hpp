#pragma once

// Experiment configs: a JSON object merged over built-in defaults, then over
// command-line overrides. Every key must exist in the defaults and carry the
// same type; errors name the file position and the JSON pointer.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dtheory/errors.hpp"
#include "json.hpp"

namespace dtheory::cli {

using json = nlohmann::ordered_json;

struct Position {
  int line = 1;
  int column = 1;
};

/// JSON pointer -> line:column of the value. Runs on text that already parsed.
class PositionIndex {
 public:
  PositionIndex() = default;
  explicit PositionIndex(const std::string& text) : t_(&text) {
    skip_ws();
    value("");
    t_ = nullptr;
  }

  std::optional<Position> find(const std::string& pointer) const {
    auto it = pos_.find(pointer);
    if (it == pos_.end()) return std::nullopt;
    return it->second;
  }

 private:
  char peek() const { return i_ < t_->size() ? (*t_)[i_] : '\0'; }
  void advance() {
    if (peek() == '\n') {
      ++here_.line;
      here_.column = 1;
    } else {
      ++here_.column;
    }
    ++i_;
  }
  void skip_ws() {
    while (i_ < t_->size() && (peek() == ' ' || peek() == '\t' || peek() == '\r' || peek() == '\n')) advance();
  }
  std::string string() {
    std::string s;
    advance();  // opening quote
    while (i_ < t_->size() && peek() != '"') {
      if (peek() == '\\') {
        advance();
        s += peek();  // escapes only matter for key matching of plain keys
      } else {
        s += peek();
      }
      advance();
    }
    advance();
    return s;
  }
  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }
  void value(const std::string& path) {
    pos_[path] = here_;
    const char c = peek();
    if (c == '{') {
      advance();
      skip_ws();
      while (peek() != '}' && i_ < t_->size()) {
        const std::string key = string();
        skip_ws();
        advance();  // ':'
        skip_ws();
        value(path + "/" + escape(key));
        skip_ws();
        if (peek() == ',') {
          advance();
          skip_ws();
        }
      }
      advance();
    } else if (c == '[') {
      advance();
      skip_ws();
      int k = 0;
      while (peek() != ']' && i_ < t_->size()) {
        value(path + "/" + std::to_string(k++));
        skip_ws();
        if (peek() == ',') {
          advance();
          skip_ws();
        }
      }
      advance();
    } else if (c == '"') {
      string();
    } else {
      while (i_ < t_->size() && std::string(",]} \t\r\n").find(peek()) == std::string::npos) advance();
    }
  }

  const std::string* t_ = nullptr;
  std::size_t i_ = 0;
  Position here_;
  std::map<std::string, Position> pos_;
};

/// Where a config value came from, for error messages.
class ConfigSource {
 public:
  ConfigSource() = default;
  ConfigSource(std::string file, const std::string& text) : file_(std::move(file)), index_(text) {}

  void mark_flag(const std::string& pointer, const std::string& flag) { flags_[pointer] = flag; }

  std::string where(const std::string& pointer) const {
    auto f = flags_.find(pointer);
    if (f != flags_.end()) return "command line " + f->second;
    // innermost enclosing value that has a recorded position
    std::string p = pointer;
    while (true) {
      if (auto pos = index_.find(p))
        return file_ + ":" + std::to_string(pos->line) + ":" + std::to_string(pos->column);
      const auto cut = p.rfind('/');
      if (cut == std::string::npos || p.empty()) break;
      p = p.substr(0, cut);
    }
    return file_.empty() ? "defaults" : file_;
  }

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    throw ConfigError(where(pointer) + ": " + (pointer.empty() ? "/" : pointer) + ": " + msg);
  }

 private:
  std::string file_;
  PositionIndex index_;
  std::map<std::string, std::string> flags_;
};

inline const char* type_label(const json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

/// Type check `user` against the default value `def`.
inline void check_against(const json& user, const json& def, const std::string& pointer, const ConfigSource& src) {
  auto mismatch = [&](const char* want) {
    src.fail(pointer, std::string("expected ") + want + ", got " + type_label(user));
  };
  if (def.is_object()) {
    if (!user.is_object()) mismatch("object");
    for (auto it = user.begin(); it != user.end(); ++it) {
      if (!def.contains(it.key())) {
        std::string known;
        for (auto d = def.begin(); d != def.end(); ++d) known += (known.empty() ? "" : ", ") + d.key();
        src.fail(pointer + "/" + it.key(), "unknown key (expected one of: " + known + ")");
      }
      check_against(it.value(), def[it.key()], pointer + "/" + it.key(), src);
    }
  } else if (def.is_array()) {
    if (!user.is_array()) mismatch("array");
    if (!def.empty())
      for (std::size_t k = 0; k < user.size(); ++k)
        check_against(user[k], def[0], pointer + "/" + std::to_string(k), src);
  } else if (def.is_boolean()) {
    if (!user.is_boolean()) mismatch("boolean");
  } else if (def.is_number_integer()) {
    if (!user.is_number_integer()) mismatch("integer");
  } else if (def.is_number()) {
    if (!user.is_number()) mismatch("number");
  } else if (def.is_string()) {
    if (!user.is_string()) mismatch("string");
  }
}

inline void merge_into(json& base, const json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
      merge_into(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

/// Resolved experiment config plus provenance of each value.
struct Config {
  json values;
  ConfigSource source;

  const json& at(const std::string& pointer) const { return values.at(json::json_pointer(pointer)); }

  template <class T>
  T get(const std::string& pointer) const {
    return at(pointer).get<T>();
  }

  void require(bool ok, const std::string& pointer, const std::string& msg) const {
    if (!ok) source.fail(pointer, msg);
  }

  /// Command-line override; `pointer` must name an existing default.
  void set(const std::string& pointer, const json& v, const std::string& flag) {
    source.mark_flag(pointer, flag);
    const json::json_pointer p(pointer);
    if (!values.contains(p)) source.fail(pointer, "no such setting");
    check_against(v, values.at(p), pointer, source);
    values[p] = v;
  }
};

/// Defaults, then the optional file.
inline Config load_config(const json& defaults, const std::string& path) {
  Config c;
  c.values = defaults;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    // locate the byte offset reported by the parser
    int line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error: " + e.what());
  }
  c.source = ConfigSource(path, text);
  check_against(user, defaults, "", c.source);
  merge_into(c.values, user);
  return c;
}

/// "lo:hi:n" -> n evenly spaced values (n = 1 gives lo).
inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v;
  for (int k = 0; k < n; ++k) v.push_back(n == 1 ? lo : lo + (hi - lo) * k / (n - 1));
  return v;
}

}  // namespace dtheory::cli
