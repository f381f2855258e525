#pragma once

// Self-contained SVG charts for the CSV files written by the tool.

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace neurphy::plot {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name, if present.
  std::optional<std::size_t> column(const std::string& name) const;
};

/// Plain comma-separated text with a header line (no quoting).
CsvTable parse_csv(const std::string& text);

enum class Schema { kRollout, kManifoldTasks, kManifoldFrames, kMse, kKl, kMetrics, kR2 };

const char* to_string(Schema s) noexcept;
/// Recognises a schema from the header; throws kUnknownSchema otherwise.
Schema detect_schema(const std::vector<std::string>& header);

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool scatter = false;
  std::vector<Series> series;
  /// Scatter only: per-point colour values (first series) and their label.
  std::vector<double> color_values;
  std::string color_label;
  /// Categorical x axis: tick i is labelled x_ticks[i].
  std::vector<std::string> x_ticks;
};

std::string render_svg(const Chart& chart);

struct PlotOptions {
  /// Column used to colour manifold scatters; defaults to the first global/state.
  std::string color_by;
};

Chart chart_from_csv(const CsvTable& table, const PlotOptions& options = {});
std::string plot_csv(const std::string& csv_text, const PlotOptions& options = {});

}  // namespace neurphy::plot
