// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/core.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fc::io {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline double parse_double_or_throw(std::string_view s, const std::string& context) {
  auto v = parse_double(s);
  if (!v) throw DataError(context + ": cannot parse number '" + std::string(s) + "'");
  return *v;
}

inline char delimiter_for(const std::filesystem::path& p, char fallback = ',') {
  const auto ext = p.extension().string();
  if (ext == ".tsv") return '\t';
  if (ext == ".csv") return ',';
  return fallback;
}

struct Table {
  std::vector<std::string> header;  // empty when the file has no header row
  Matrix values;
};

/// Reads a numeric delimited-text matrix. A first row containing any
/// non-numeric field is taken as the header. Blank lines and lines starting
/// with '#' are skipped.
inline Table read_table(const std::filesystem::path& path, char delim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto fields = split(body, delim);
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (const auto& f : fields) {
      auto v = parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && t.header.empty()) {
        t.header = std::move(fields);
        continue;
      }
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(rows.front().size()) + " fields, found " +
                      std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  const std::size_t ncols = rows.empty() ? t.header.size() : rows.front().size();
  if (!t.header.empty() && t.header.size() != ncols) {
    throw DataError(path.string() + ": header has " + std::to_string(t.header.size()) +
                    " fields but rows have " + std::to_string(ncols));
  }
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(ncols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < ncols; ++j) {
      t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return t;
}

inline void write_row(std::ostream& out, const auto& row, char delim) {
  for (Index j = 0; j < row.size(); ++j) {
    if (j) out << delim;
    out << format_double(row(j));
  }
}

inline void write_table(const std::filesystem::path& path, const Table& t, char delim) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  if (!t.header.empty()) {
    for (std::size_t j = 0; j < t.header.size(); ++j) {
      if (j) out << delim;
      out << t.header[j];
    }
    out << '\n';
  }
  for (Index i = 0; i < t.values.rows(); ++i) {
    write_row(out, t.values.row(i), delim);
    out << '\n';
  }
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace fc::io
