#pragma once

// Line-oriented experiment config: `[section]` or `[section argument]`
// headers, `key = value` entries, `#` comments. Every entry remembers its
// line so validation errors can point at it. Unused keys are reported as
// errors, which catches typos in long sweep files.

#include "igt/core.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace igt::harness {

class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& what)
      : Error(ErrorKind::kConfig, line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  while (true) {
    const auto p = s.find(sep);
    const auto item = trim(s.substr(0, p));
    if (!item.empty()) out.emplace_back(item);
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return out;
}

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
  mutable bool used = false;
};

class ConfigSection {
 public:
  ConfigSection(std::string name, std::string arg, int line)
      : name_(std::move(name)), arg_(std::move(arg)), line_(line) {}

  const std::string& name() const { return name_; }
  const std::string& arg() const { return arg_; }
  int line() const { return line_; }
  const std::vector<ConfigEntry>& entries() const { return entries_; }

  void add(std::string key, std::string value, int line) {
    for (const auto& e : entries_) {
      if (e.key == key) {
        throw ConfigError(line, "duplicate key '" + key + "' (first set on line " +
                                    std::to_string(e.line) + ")");
      }
    }
    entries_.push_back({std::move(key), std::move(value), line});
  }

  const ConfigEntry* find(std::string_view key) const {
    for (const auto& e : entries_) {
      if (e.key == key) {
        e.used = true;
        return &e;
      }
    }
    return nullptr;
  }
  bool has(std::string_view key) const { return find(key) != nullptr; }

  std::string label() const { return arg_.empty() ? "[" + name_ + "]" : "[" + name_ + " " + arg_ + "]"; }

  std::string get_string(std::string_view key, std::string fallback) const {
    const auto* e = find(key);
    return e ? e->value : fallback;
  }

  std::string require_string(std::string_view key) const {
    const auto* e = find(key);
    if (!e) throw ConfigError(line_, label() + " is missing required key '" + std::string(key) + "'");
    return e->value;
  }

  double get_double(std::string_view key, double fallback) const {
    const auto* e = find(key);
    return e ? parse_double(*e) : fallback;
  }

  int get_int(std::string_view key, int fallback) const {
    const auto* e = find(key);
    return e ? parse_int(*e) : fallback;
  }

  bool get_bool(std::string_view key, bool fallback) const {
    const auto* e = find(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "yes" || e->value == "1" || e->value == "on") return true;
    if (e->value == "false" || e->value == "no" || e->value == "0" || e->value == "off") return false;
    throw ConfigError(e->line, "'" + e->key + "' expects true/false, got '" + e->value + "'");
  }

  std::optional<double> get_optional_double(std::string_view key) const {
    const auto* e = find(key);
    if (!e || e->value == "none") return std::nullopt;
    return parse_double(*e);
  }

  std::vector<double> get_double_list(std::string_view key, std::vector<double> fallback) const {
    const auto* e = find(key);
    if (!e) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(e->value)) out.push_back(parse_double({e->key, item, e->line}));
    return out;
  }

  /// Integers as a comma list, with `a-b` ranges.
  std::vector<int> get_int_list(std::string_view key, std::vector<int> fallback) const {
    const auto* e = find(key);
    return e ? parse_int_list(*e) : fallback;
  }

  static double parse_double(const ConfigEntry& e) {
    if (e.value == "inf" || e.value == "infinity") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc{} || p != end) {
      throw ConfigError(e.line, "'" + e.key + "' expects a number, got '" + e.value + "'");
    }
    return v;
  }

  static int parse_int(const ConfigEntry& e) {
    int v = 0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc{} || p != end) {
      throw ConfigError(e.line, "'" + e.key + "' expects an integer, got '" + e.value + "'");
    }
    return v;
  }

  static std::vector<int> parse_int_list(const ConfigEntry& e) {
    std::vector<int> out;
    for (const auto& item : split_list(e.value)) {
      const auto dash = item.find('-', 1);
      if (dash == std::string::npos) {
        out.push_back(parse_int({e.key, item, e.line}));
        continue;
      }
      const int a = parse_int({e.key, item.substr(0, dash), e.line});
      const int b = parse_int({e.key, item.substr(dash + 1), e.line});
      if (b < a) throw ConfigError(e.line, "empty range '" + item + "' in '" + e.key + "'");
      for (int i = a; i <= b; ++i) out.push_back(i);
    }
    if (out.empty()) throw ConfigError(e.line, "'" + e.key + "' is an empty list");
    return out;
  }

 private:
  std::string name_, arg_;
  int line_;
  std::vector<ConfigEntry> entries_;
};

class ConfigDocument {
 public:
  static ConfigDocument parse(std::string_view text) {
    ConfigDocument doc;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
        const auto inner = trim(line.substr(1, line.size() - 2));
        const auto sp = inner.find_first_of(" \t");
        std::string name(trim(inner.substr(0, sp)));
        std::string arg(sp == std::string_view::npos ? std::string_view{} : trim(inner.substr(sp)));
        if (name.empty()) throw ConfigError(line_no, "empty section name");
        for (const auto& s : doc.sections_) {
          if (s.name() == name && s.arg() == arg) {
            throw ConfigError(line_no, "duplicate section " + s.label() + " (first on line " +
                                           std::to_string(s.line()) + ")");
          }
        }
        doc.sections_.emplace_back(std::move(name), std::move(arg), line_no);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError(line_no, "expected 'key = value'");
      if (doc.sections_.empty()) throw ConfigError(line_no, "entry outside of any [section]");
      std::string key(trim(line.substr(0, eq)));
      std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) throw ConfigError(line_no, "empty key");
      doc.sections_.back().add(std::move(key), std::move(value), line_no);
    }
    doc.text_ = std::string(text);
    return doc;
  }

  static ConfigDocument load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(0, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  const std::vector<ConfigSection>& sections() const { return sections_; }
  const std::string& text() const { return text_; }

  const ConfigSection* find(std::string_view name) const {
    for (const auto& s : sections_) {
      if (s.name() == name) return &s;
    }
    return nullptr;
  }

  const ConfigSection& require(std::string_view name) const {
    if (const auto* s = find(name)) return *s;
    throw ConfigError(0, "missing required section [" + std::string(name) + "]");
  }

  std::vector<const ConfigSection*> all(std::string_view name) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections_) {
      if (s.name() == name) out.push_back(&s);
    }
    return out;
  }

  /// Fails on the first key nobody asked for.
  void check_all_used() const {
    for (const auto& s : sections_) {
      for (const auto& e : s.entries()) {
        if (!e.used) throw ConfigError(e.line, "unknown key '" + e.key + "' in " + s.label());
      }
    }
  }

  /// Hash of the normalized entries (comments and spacing do not count).
  std::uint64_t hash() const {
    Fnv1a h;
    for (const auto& s : sections_) {
      h.add(s.label());
      for (const auto& e : s.entries()) {
        h.add(e.key);
        h.add(std::string("="));
        h.add(e.value);
      }
    }
    return h.value();
  }

 private:
  std::vector<ConfigSection> sections_;
  std::string text_;
};

}  // namespace igt::harness
