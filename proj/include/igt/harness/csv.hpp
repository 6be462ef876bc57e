#pragma once

// Plain CSV with `#` comment lines for provenance. Numbers are written with
// 9 significant digits; `round9` applies the same rounding in memory so
// summaries can be computed from exactly what a reader of the file sees.

#include "igt/core.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace igt::harness {

inline std::string fmt9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline std::string fmt9(const std::optional<double>& x) { return x ? fmt9(*x) : std::string(); }

inline std::string hex64(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline double parse_number(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::strtod(s.c_str(), nullptr);
}

inline double round9(double x) { return std::isfinite(x) ? parse_number(fmt9(x)) : x; }

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void comment(const std::string& key, const std::string& value) {
    std::string v = value;
    for (auto& c : v) {
      if (c == '\n' || c == '\r') c = ' ';
    }
    comments_.push_back("# " + key + "=" + v);
  }

  void row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size()) {
      throw Error(ErrorKind::kConfig, "CSV row width " + std::to_string(cells.size()) +
                                          " != header width " + std::to_string(columns_.size()));
    }
    rows_.push_back(std::move(cells));
  }

  std::string str() const {
    std::ostringstream out;
    for (const auto& c : comments_) out << c << '\n';
    write_line(out, columns_);
    for (const auto& r : rows_) write_line(out, r);
    return out.str();
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::kConfig, "cannot write '" + path + "'");
    f << str();
    if (!f) throw Error(ErrorKind::kConfig, "write failed for '" + path + "'");
  }

 private:
  static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      const bool quote = cells[i].find_first_of(",\"") != std::string::npos;
      if (!quote) {
        out << cells[i];
        continue;
      }
      out << '"';
      for (char c : cells[i]) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    }
    out << '\n';
  }

  std::vector<std::string> columns_;
  std::vector<std::string> comments_;
  std::vector<std::vector<std::string>> rows_;
};

struct CsvTable {
  std::vector<std::pair<std::string, std::string>> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<int>(i);
    }
    throw Error(ErrorKind::kConfig, "CSV has no column '" + name + "'");
  }

  std::optional<std::string> comment(const std::string& key) const {
    for (const auto& [k, v] : comments) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  double number(std::size_t row, const std::string& name) const {
    return parse_number(rows.at(row).at(static_cast<std::size_t>(column(name))));
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kConfig, "cannot read '" + path + "'");
  CsvTable t;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) t.comments.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    if (t.columns.empty()) t.columns = split_csv_line(line);
    else t.rows.push_back(split_csv_line(line));
  }
  return t;
}

}  // namespace igt::harness
