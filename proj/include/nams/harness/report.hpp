#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nams/harness/experiments.hpp"

namespace nams::harness {

inline constexpr int kCsvFormatVersion = 1;
inline constexpr int kSvgFormatVersion = 1;

/// In-memory CSV table. Cells never contain commas or quotes.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const;
  /// Index of a header column; throws InvalidArgument when missing.
  std::size_t column(const std::string& name) const;
};

Csv parse_csv(const std::string& text);
Csv read_csv(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Fixed six-decimal formatting, independent of locale.
std::string fmt(double v);

Csv accuracy_csv(const std::vector<AccuracyRow>& rows);
Csv iou_csv(const std::vector<IoURow>& rows);
Csv ms2_trace_csv(const std::vector<baselines::Ms2Diagnostics>& trace);
Csv nams_train_csv(const core::NamsTrainReport& report);
Csv dr_train_csv(const baselines::DrTrainReport& report);
/// Cumulative simulator calls for N_d = 1..max_domains under the budgets.
Csv e4_csv(const Accounting& a, int max_domains);
nlohmann::json accounting_json(const Accounting& a);

/// Grouped bar chart: one group per distinct `group_col` value, one bar per
/// distinct `series_col` value, bar height = mean of `value_col` over the
/// matching rows (optionally filtered by `filter_col == filter_value`).
/// The source CSV is embedded in a trailing comment.
struct BarChartSpec {
  std::string title;
  std::string group_col;
  std::string series_col;
  std::string value_col;
  std::string filter_col;
  std::string filter_value;
  double y_max = 1.0;
};
std::string svg_bar_chart(const Csv& csv, const BarChartSpec& spec);

/// Line chart of every `y_cols` column against `x_col`.
std::string svg_line_chart(const Csv& csv, const std::string& title, const std::string& x_col,
                           const std::vector<std::string>& y_cols);

/// {command, profile, config_hash, config, seeds, format_versions}.
nlohmann::json provenance(const std::string& command, const ExperimentConfig& config,
                          const std::vector<std::uint64_t>& seeds);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Rebuilds every known chart in `dir` from the CSVs present there and
/// returns a summary of what was regenerated plus headline metrics.
nlohmann::json regenerate_report(const std::filesystem::path& dir);

}  // namespace nams::harness
