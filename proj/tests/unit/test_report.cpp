// SPDX-License-Identifier: Apache-2.0
#include "fc/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace fc;

namespace {

const std::string kTable3 = std::string(FC_FIXTURES) + "/report/table3_pearson.csv";

MetricReport constant_report(double fraction, std::size_t n) {
  MetricSample s;
  for (auto id : kMetrics) s[id] = fraction;
  return aggregate(std::vector<MetricSample>(n, s));
}

}  // namespace

TEST(ReportTable, RendersPublishedGruColumn) {
  const auto cols = read_report_fixture(kTable3);
  ASSERT_EQ(cols.size(), 7u);
  ASSERT_EQ(cols[6].first, "GRU");
  const std::string want =
      "Metric       Statistic    GRU\n"
      "Accuracy     Min        67.16\n"
      "             Average    69.16\n"
      "             Max        71.37\n"
      "             Std         1.45\n"
      "Sensitivity  Min        66.37\n"
      "             Average    69.47\n"
      "             Max        71.68\n"
      "             Std         2.26\n"
      "Specificity  Min        67.11\n"
      "             Average    68.93\n"
      "             Max        71.14\n"
      "             Std         1.34\n"
      "AUC          Min        73.09\n"
      "             Average    74.15\n"
      "             Max        75.04\n"
      "             Std         0.72\n";
  EXPECT_EQ(format_report_table({cols[6]}), want);
}

TEST(ReportTable, EveryPublishedCellSurvivesRendering) {
  const auto cols = read_report_fixture(kTable3);
  const auto text = format_report_table(cols);
  EXPECT_NE(text.find("LR+SFM"), std::string::npos);
  // Row "Average" of Accuracy across all seven methods.
  EXPECT_NE(text.find("67.27  62.08   71.17  62.04  60.10  67.42  69.16"), std::string::npos) << text;
  // Integers from the paper gain two decimals.
  EXPECT_NE(text.find("40.00"), std::string::npos);
  EXPECT_NE(text.find("55.00"), std::string::npos);
  EXPECT_EQ((*cols[2].second[MetricId::Auc]).average, 77.38);
}

TEST(ReportTable, ZeroSpreadAndMissingMetrics) {
  MetricReport r = constant_report(0.625, 4);
  r[MetricId::Sensitivity].reset();
  const auto text = format_report_table({{"X", r}});
  EXPECT_NE(text.find("Std         0.00"), std::string::npos) << text;
  EXPECT_NE(text.find("Sensitivity  Min          n/a"), std::string::npos) << text;
  EXPECT_NE(text.find("62.50"), std::string::npos);
}

TEST(ReportJson, RoundTripIsExact) {
  std::vector<MetricSample> samples(3);
  samples[0][MetricId::Accuracy] = 0.61;
  samples[1][MetricId::Accuracy] = 2.0 / 3.0;
  samples[2][MetricId::Accuracy] = 0.7;
  samples[0][MetricId::Auc] = 0.1 + 0.2;
  const std::vector<ReportColumn> cols{{"GRU", aggregate(samples)},
                                       {"LR", constant_report(0.5, 2)},
                                       {"pop", aggregate(samples, StdConvention::Population)}};
  const auto back = parse_report_json(format_report_json(cols));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].first, cols[i].first);
    EXPECT_EQ(back[i].second, cols[i].second);
  }
  EXPECT_FALSE(back[0].second[MetricId::Sensitivity].has_value());
}

TEST(ReportJson, RejectsUnknownConvention) {
  EXPECT_THROW(parse_report_json(R"({"columns":[{"name":"a","report":{"std_convention":"x","evaluations":1,"metrics":{}}}]})"),
               DataError);
}

TEST(ReportEmit, BothFormatsAreWritten) {
  const auto dir = std::filesystem::temp_directory_path();
  const std::vector<ReportColumn> cols{{"GRU", constant_report(0.7, 3)}};
  emit_report(dir / "fc_report.txt", cols, ReportFormat::Table, "# header\n");
  emit_report(dir / "fc_report.json", cols, ReportFormat::Structured);
  const auto table = io::read_text(dir / "fc_report.txt");
  EXPECT_EQ(table.rfind("# header\nMetric", 0), 0u);
  EXPECT_EQ(parse_report_json(io::read_text(dir / "fc_report.json"))[0].second, cols[0].second);
}
