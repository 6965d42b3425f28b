// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/evaluation.hpp"
#include "fc/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fc {

/// One column of a results table: a label (model or method) and its report.
using ReportColumn = std::pair<std::string, MetricReport>;

/// Rows Accuracy/Sensitivity/Specificity/AUC, each split into
/// Min/Average/Max/Std, one column per report; percent with 2 decimals.
inline std::string format_report_table(const std::vector<ReportColumn>& columns) {
  static const char* const kStats[] = {"Min", "Average", "Max", "Std"};
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Metric", "Statistic"});
  for (const auto& [name, r] : columns) cells[0].push_back(name);
  for (auto id : kMetrics) {
    for (int s = 0; s < 4; ++s) {
      std::vector<std::string> row{s == 0 ? metric_name(id) : std::string(), kStats[s]};
      for (const auto& [name, r] : columns) {
        const auto& st = r[id];
        if (!st) {
          row.emplace_back("n/a");
          continue;
        }
        const double v = s == 0 ? st->min : s == 1 ? st->average : s == 2 ? st->max : st->std;
        row.push_back(io::format_fixed(v, 2));
      }
      cells.push_back(std::move(row));
    }
  }
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j < 2) {
        os << row[j] << std::string(width[j] - row[j].size(), ' ');
      } else {
        os << std::string(width[j] - row[j].size(), ' ') << row[j];
      }
      os << (j + 1 < row.size() ? "  " : "");
    }
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["std_convention"] = to_string(r.std_convention);
  j["evaluations"] = r.evaluations;
  nlohmann::json metrics = nlohmann::json::object();
  for (auto id : kMetrics) {
    const auto& st = r[id];
    if (!st) {
      metrics[metric_name(id)] = nullptr;
      continue;
    }
    metrics[metric_name(id)] = {
        {"min", st->min}, {"average", st->average}, {"max", st->max}, {"std", st->std}, {"count", st->count}};
  }
  j["metrics"] = std::move(metrics);
  return j;
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  const auto conv = j.at("std_convention").get<std::string>();
  if (conv == "sample") r.std_convention = StdConvention::Sample;
  else if (conv == "population") r.std_convention = StdConvention::Population;
  else throw DataError("report: unknown std convention '" + conv + "'");
  r.evaluations = j.at("evaluations").get<std::size_t>();
  const auto& metrics = j.at("metrics");
  for (auto id : kMetrics) {
    const auto& m = metrics.at(metric_name(id));
    if (m.is_null()) continue;
    r[id] = MetricStats{m.at("min").get<double>(), m.at("average").get<double>(), m.at("max").get<double>(),
                        m.at("std").get<double>(), m.at("count").get<std::size_t>()};
  }
  return r;
}

/// Structured form: {"columns": [{"name": ..., "report": {...}}, ...]}.
inline std::string format_report_json(const std::vector<ReportColumn>& columns) {
  nlohmann::json j;
  j["columns"] = nlohmann::json::array();
  for (const auto& [name, r] : columns) j["columns"].push_back({{"name", name}, {"report", report_to_json(r)}});
  return j.dump(2) + "\n";
}

inline std::vector<ReportColumn> parse_report_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<ReportColumn> out;
  for (const auto& c : j.at("columns")) out.emplace_back(c.at("name").get<std::string>(), report_from_json(c.at("report")));
  return out;
}

enum class ReportFormat { Table, Structured };

inline void emit_report(const std::filesystem::path& path, const std::vector<ReportColumn>& columns, ReportFormat fmt,
                        const std::string& header = {}) {
  if (fmt == ReportFormat::Structured) {
    io::write_text(path, format_report_json(columns));
    return;
  }
  io::write_text(path, header + format_report_table(columns));
}

/// Reads a table-format column back from its rendered text (values in percent).
/// Used to load published result columns as fixtures.
inline std::vector<ReportColumn> read_report_fixture(const std::filesystem::path& path) {
  // header: metric,statistic,<name>...; rows as in the rendered table, "n/a" allowed
  std::istringstream in(io::read_text(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<ReportColumn> cols;
  std::string current;
  while (std::getline(in, line)) {
    const auto body = io::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto f = io::split(body, ',');
    if (header.empty()) {
      header = std::move(f);
      if (header.size() < 3) throw DataError(path.string() + ": need at least one result column");
      for (std::size_t j = 2; j < header.size(); ++j) cols.emplace_back(header[j], MetricReport{});
      continue;
    }
    if (f.size() != header.size()) throw DataError(path.string() + ": ragged row");
    if (!f[0].empty()) current = f[0];
    auto id = std::find_if(kMetrics.begin(), kMetrics.end(), [&](MetricId m) { return metric_name(m) == current; });
    if (id == kMetrics.end()) throw DataError(path.string() + ": unknown metric '" + current + "'");
    for (std::size_t j = 2; j < f.size(); ++j) {
      auto& slot = cols[j - 2].second[*id];
      if (f[j] == "n/a") continue;
      if (!slot) slot = MetricStats{};
      const double v = io::parse_double_or_throw(f[j], "report fixture");
      if (f[1] == "Min") slot->min = v;
      else if (f[1] == "Average") slot->average = v;
      else if (f[1] == "Max") slot->max = v;
      else if (f[1] == "Std") slot->std = v;
      else throw DataError(path.string() + ": unknown statistic '" + f[1] + "'");
    }
  }
  return cols;
}

}  // namespace fc
