#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "dyrep/errors.hpp"

namespace dyrep::csv {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    size_t b = f.find_first_not_of(" \t");
    size_t e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

inline bool try_parse_int(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

inline bool try_parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

[[noreturn]] inline void fail(const std::string& path, int line, const std::string& msg) {
  throw input_error(path + ":" + std::to_string(line) + ": " + msg);
}

inline std::int64_t parse_int(const std::string& path, int line, const std::string& s) {
  std::int64_t v = 0;
  if (!try_parse_int(s, v)) fail(path, line, "expected an integer, got '" + s + "'");
  return v;
}

inline double parse_double(const std::string& path, int line, const std::string& s) {
  double v = 0.0;
  if (!try_parse_double(s, v)) fail(path, line, "expected a number, got '" + s + "'");
  return v;
}

inline bool looks_numeric(const std::string& s) {
  double v = 0.0;
  return try_parse_double(s, v);
}

struct Row {
  int line = 0;
  std::vector<std::string> fields;
};

// Non-empty CSV rows with 1-based line numbers; throws input_error when the
// file cannot be opened.
inline std::vector<Row> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error(path + ": cannot open file");
  std::vector<Row> rows;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(Row{number, split_line(line)});
  }
  return rows;
}

}  // namespace dyrep::csv
