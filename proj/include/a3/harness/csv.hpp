#pragma once

// Matrices as CSV: one row per line, comma-separated decimals.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "a3/error.hpp"
#include "a3/matrix.hpp"

namespace a3::harness {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Parses CSV text. Row and column numbers in errors are 1-based.
inline Matrix parse_matrix(std::string_view text, std::optional<Shape> expected = std::nullopt,
                           const std::string& source = "<csv>") {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;

    std::size_t fields = 0;
    while (true) {
      const auto comma = line.find(',');
      const std::string_view token = detail::trim(line.substr(0, comma));
      ++fields;
      double v = 0.0;
      const char* first = token.data();
      const char* last = token.data() + token.size();
      if (!token.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (token.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw ParseError(source + ": row " + std::to_string(rows + 1) + ", column " +
                             std::to_string(fields) + ": '" + std::string(token) +
                             "' is not a finite number",
                         rows + 1, fields);
      }
      data.push_back(v);
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = fields;
    } else if (fields != cols) {
      throw ShapeError(source + ": row " + std::to_string(rows + 1) + " has " +
                       std::to_string(fields) + " columns, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw ShapeError(source + ": no rows");
  if (expected && (expected->rows != rows || expected->cols != cols)) {
    throw ShapeError(source + ": shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", expected " + std::to_string(expected->rows) + "x" +
                     std::to_string(expected->cols));
  }
  return Matrix(rows, cols, std::move(data));
}

inline Matrix load_matrix(const std::string& path, std::optional<Shape> expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_matrix(buf.str(), expected, path);
}

inline std::string format_matrix(const Matrix& m) {
  std::string out;
  char cell[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      std::snprintf(cell, sizeof cell, "%.17g", m(r, c));
      out += cell;
    }
    out += '\n';
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write '" + path + "'");
  out << text;
  if (!out) throw FileError("write failed for '" + path + "'");
}

inline void write_matrix(const std::string& path, const Matrix& m) { write_text(path, format_matrix(m)); }

}  // namespace a3::harness
