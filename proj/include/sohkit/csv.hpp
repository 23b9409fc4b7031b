#pragma once

// Minimal numeric-table CSV I/O used by every persistence format in the
// toolkit: leading '#' comment lines, one header line naming the columns,
// then numeric rows. Values are serialized at 12 significant digits, which
// makes a save -> load -> save cycle byte-identical (12 decimal digits map
// injectively into doubles and print back unchanged).

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sohkit/common.hpp"

namespace sohkit {

inline std::string format_sig(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

inline double parse_double(std::string_view text, const std::string& context) {
  // trim surrounding whitespace
  size_t b = text.find_first_not_of(" \t\r");
  size_t e = text.find_last_not_of(" \t\r");
  if (b == std::string_view::npos) throw Error("empty numeric field in " + context);
  text = text.substr(b, e - b + 1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error("cannot parse '" + std::string(text) + "' as a number in " + context);
  return value;
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

struct CsvTable {
  std::vector<std::string> comments;  // leading '#' lines, without the newline
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  size_t column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw Error("CSV table has no column '" + name + "'");
  }
};

inline CsvTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CSV file: " + path);
  CsvTable table;
  std::string line;
  bool have_header = false;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!have_header) table.comments.push_back(line);
      continue;
    }
    if (!have_header) {
      for (auto& f : split_fields(line)) {
        size_t b = f.find_first_not_of(" \t");
        size_t e = f.find_last_not_of(" \t");
        table.columns.push_back(b == std::string::npos ? std::string() : f.substr(b, e - b + 1));
      }
      have_header = true;
      continue;
    }
    auto fields = split_fields(line);
    if (fields.size() != table.columns.size())
      throw Error(path + ":" + std::to_string(line_no) + ": expected " +
                  std::to_string(table.columns.size()) + " fields, got " +
                  std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (size_t i = 0; i < fields.size(); ++i)
      row.push_back(parse_double(fields[i], path + ":" + std::to_string(line_no)));
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw Error("CSV file has no header line: " + path);
  return table;
}

inline std::string render_csv(const CsvTable& table) {
  std::ostringstream out;
  for (const auto& c : table.comments) out << c << '\n';
  for (size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_sig(row[i]);
    out << '\n';
  }
  return out.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open file for writing: " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

inline void save_csv(const std::string& path, const CsvTable& table) {
  write_text_file(path, render_csv(table));
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace sohkit
