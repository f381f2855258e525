#include "neurphy/svg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "neurphy/error.hpp"

namespace neurphy::plot {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 55;

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_real(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    if (s == "nan" || s == "-nan") return std::nan("");
    throw Error(ErrorCode::kUnknownSchema, "non-numeric cell '" + s + "'");
  }
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

struct Extent {
  double lo = 0.0;
  double hi = 1.0;
};

Extent padded(double lo, double hi) {
  if (!(lo <= hi)) return {0.0, 1.0};
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  const double pad = 0.04 * (hi - lo);
  return {lo - pad, hi + pad};
}

// Ticks at 1, 2 or 5 times a power of ten.
std::vector<double> ticks(Extent e) {
  const double span = e.hi - e.lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 6.0) break;
  }
  std::vector<double> out;
  for (double v = std::ceil(e.lo / step) * step; v <= e.hi + 1e-12 * span; v += step) {
    out.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  }
  return out;
}

std::string colormap(double u) {
  // Blue -> teal -> yellow.
  constexpr std::array<std::array<double, 3>, 3> stops{{{68, 1, 84}, {33, 145, 140}, {253, 231, 37}}};
  u = std::clamp(std::isnan(u) ? 0.0 : u, 0.0, 1.0);
  const double pos = u * 2.0;
  const std::size_t i = std::min<std::size_t>(1, static_cast<std::size_t>(pos));
  const double f = pos - static_cast<double>(i);
  int rgb[3];
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
  return fmt::format("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]);
}

std::string label_of(double v) { return fmt::format("{:.4g}", v); }

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::stringstream ss(text);
  std::string line;
  bool first = true;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      table.header = split(line);
      first = false;
      continue;
    }
    auto row = split(line);
    if (row.size() != table.header.size()) {
      throw Error(ErrorCode::kUnknownSchema, "row with " + std::to_string(row.size()) + " cells under a header of " +
                                                 std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw Error(ErrorCode::kUnknownSchema, "empty CSV");
  return table;
}

const char* to_string(Schema s) noexcept {
  switch (s) {
    case Schema::kRollout: return "rollout";
    case Schema::kManifoldTasks: return "manifold-tasks";
    case Schema::kManifoldFrames: return "manifold-frames";
    case Schema::kMse: return "mse";
    case Schema::kKl: return "kl";
    case Schema::kMetrics: return "metrics";
    case Schema::kR2: return "r2";
  }
  return "unknown";
}

Schema detect_schema(const std::vector<std::string>& header) {
  const auto has_prefix = [&](std::size_t i, const std::string& p) { return i < header.size() && starts_with(header[i], p); };
  if (header == std::vector<std::string>{"t", "true_x", "true_y", "pred_x", "pred_y"}) return Schema::kRollout;
  if (header == std::vector<std::string>{"target", "degree", "r2"}) return Schema::kR2;
  if (has_prefix(0, "r_c_") && has_prefix(1, "r_c_")) return Schema::kManifoldTasks;
  if (header.size() >= 4 && header[0] == "task_id" && header[1] == "t" && has_prefix(2, "z_") && has_prefix(3, "z_")) {
    return Schema::kManifoldFrames;
  }
  if (header.size() >= 2 && header[0] == "stage" && has_prefix(1, "T+")) return Schema::kMse;
  if (header.size() >= 2 && header[0] == "stage" && has_prefix(1, "kl")) return Schema::kKl;
  if (header.size() >= 3 && header[0] == "epoch" && header[1] == "recon" && header.back() == "total") {
    return Schema::kMetrics;
  }
  std::string joined;
  for (const auto& h : header) joined += (joined.empty() ? "" : ",") + h;
  throw Error(ErrorCode::kUnknownSchema, "unrecognised CSV header '" + joined + "'");
}

std::string render_svg(const Chart& chart) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : chart.series) {
    for (auto [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  }
  const Extent ex = padded(xlo, xhi);
  const Extent ey = padded(ylo, yhi);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - ex.lo) / (ex.hi - ex.lo) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - ey.lo) / (ey.hi - ey.lo) * ph; };

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight);
  out += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
  out += fmt::format("<text x=\"{:.2f}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     kLeft + pw / 2, escape(chart.title));

  // Axes and grid.
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", kLeft,
                     kTop, pw, ph);
  if (chart.x_ticks.empty()) {
    for (double t : ticks(ex)) {
      out += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"#ddd\"/>\n", sx(t), kTop,
                         kTop + ph);
      out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", sx(t), kTop + ph + 16,
                         label_of(t));
    }
  } else {
    for (std::size_t i = 0; i < chart.x_ticks.size(); ++i) {
      const double x = sx(static_cast<double>(i));
      out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", x, kTop + ph + 16,
                         escape(chart.x_ticks[i]));
    }
  }
  for (double t : ticks(ey)) {
    out += fmt::format("<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>\n", kLeft, sy(t),
                       kLeft + pw);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kLeft - 6, sy(t) + 4,
                       label_of(t));
  }
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
                     kHeight - 14, escape(chart.x_label));
  out += fmt::format(
      "<text x=\"18\" y=\"{0:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0:.2f})\">{1}</text>\n",
      kTop + ph / 2, escape(chart.y_label));

  // Data.
  double clo = INFINITY, chi = -INFINITY;
  for (double c : chart.color_values) {
    if (std::isfinite(c)) {
      clo = std::min(clo, c);
      chi = std::max(chi, c);
    }
  }
  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const auto& s = chart.series[si];
    const char* colour = kPalette[si % kPalette.size()];
    if (chart.scatter) {
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        auto [x, y] = s.points[i];
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        std::string fill = colour;
        if (si == 0 && i < chart.color_values.size() && chi > clo) {
          fill = colormap((chart.color_values[i] - clo) / (chi - clo));
        }
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3.5\" fill=\"{}\" fill-opacity=\"0.85\"/>\n", sx(x),
                           sy(y), fill);
      }
    } else {
      std::string path;
      for (auto [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        path += fmt::format("{}{:.2f},{:.2f}", path.empty() ? "" : " ", sx(x), sy(y));
      }
      out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"/>\n", path, colour);
    }
  }

  // Legend.
  double ly = kTop + 10;
  const double lx = kLeft + pw + 16;
  if (chart.scatter && chi > clo) {
    out += fmt::format("<text x=\"{}\" y=\"{:.2f}\">{}</text>\n", lx, ly, escape(chart.color_label));
    for (int k = 0; k <= 4; ++k) {
      const double u = k / 4.0;
      ly += 18;
      out += fmt::format("<circle cx=\"{}\" cy=\"{:.2f}\" r=\"5\" fill=\"{}\"/>\n", lx + 5, ly - 4, colormap(u));
      out += fmt::format("<text x=\"{}\" y=\"{:.2f}\">{}</text>\n", lx + 16, ly, label_of(clo + u * (chi - clo)));
    }
  } else {
    for (std::size_t si = 0; si < chart.series.size(); ++si) {
      const char* colour = kPalette[si % kPalette.size()];
      out += fmt::format("<rect x=\"{}\" y=\"{:.2f}\" width=\"14\" height=\"4\" fill=\"{}\"/>\n", lx, ly - 5, colour);
      out += fmt::format("<text x=\"{}\" y=\"{:.2f}\">{}</text>\n", lx + 20, ly, escape(chart.series[si].name));
      ly += 18;
    }
  }
  out += "</svg>\n";
  return out;
}

Chart chart_from_csv(const CsvTable& table, const PlotOptions& options) {
  const Schema schema = detect_schema(table.header);
  const auto& h = table.header;
  auto col = [&](std::size_t c) {
    std::vector<double> v;
    for (const auto& r : table.rows) v.push_back(to_real(r[c]));
    return v;
  };
  auto require = [&](const std::string& name) {
    auto c = table.column(name);
    if (!c) throw Error(ErrorCode::kUnknownSchema, "column '" + name + "' not found");
    return *c;
  };

  Chart chart;
  switch (schema) {
    case Schema::kRollout: {
      chart.title = "Rollout: true vs predicted x";
      chart.x_label = "t";
      chart.y_label = "x";
      const auto t = col(0), tx = col(1), px = col(3);
      Series truth{"true x", {}}, pred{"predicted x", {}};
      for (std::size_t i = 0; i < t.size(); ++i) {
        truth.points.emplace_back(t[i], tx[i]);
        pred.points.emplace_back(t[i], px[i]);
      }
      chart.series = {truth, pred};
      break;
    }
    case Schema::kManifoldTasks:
    case Schema::kManifoldFrames: {
      const bool tasks = schema == Schema::kManifoldTasks;
      const std::size_t a = tasks ? 0 : 2;
      const std::string prefix = tasks ? "r_c_" : "z_";
      std::size_t first_truth = a;
      while (first_truth < h.size() && starts_with(h[first_truth], prefix)) ++first_truth;
      chart.title = tasks ? "Global representation manifold" : "Latent state manifold";
      chart.x_label = h[a];
      chart.y_label = h[a + 1];
      chart.scatter = true;
      Series s{tasks ? "tasks" : "frames", {}};
      const auto x = col(a), y = col(a + 1);
      for (std::size_t i = 0; i < x.size(); ++i) s.points.emplace_back(x[i], y[i]);
      chart.series = {s};
      std::size_t c = first_truth;
      if (!options.color_by.empty()) c = require(options.color_by);
      if (c < h.size()) {
        chart.color_values = col(c);
        chart.color_label = h[c];
      }
      break;
    }
    case Schema::kMse:
    case Schema::kKl: {
      const bool mse = schema == Schema::kMse;
      chart.title = mse ? "Prediction MSE by overshoot" : "KL by overshoot";
      chart.x_label = mse ? "overshoot d" : "d";
      chart.y_label = mse ? "MSE" : "KL";
      for (const auto& r : table.rows) {
        Series s{r[0], {}};
        for (std::size_t c = 1; c < h.size(); ++c) {
          const double d = static_cast<double>(mse ? c - 1 : c);
          s.points.emplace_back(d, to_real(r[c]));
        }
        chart.series.push_back(std::move(s));
      }
      break;
    }
    case Schema::kMetrics: {
      chart.title = "Training loss";
      chart.x_label = "epoch";
      chart.y_label = "loss";
      const auto epoch = col(0);
      for (std::size_t c = 1; c < h.size(); ++c) {
        Series s{h[c], {}};
        const auto v = col(c);
        for (std::size_t i = 0; i < v.size(); ++i) s.points.emplace_back(epoch[i], v[i]);
        chart.series.push_back(std::move(s));
      }
      break;
    }
    case Schema::kR2: {
      chart.title = "R2 of global representation";
      chart.x_label = "parameter";
      chart.y_label = "R2";
      Series lin{"linear", {}}, quad{"quadratic", {}};
      for (const auto& r : table.rows) {
        auto it = std::find(chart.x_ticks.begin(), chart.x_ticks.end(), r[0]);
        const auto idx = static_cast<double>(it - chart.x_ticks.begin());
        if (it == chart.x_ticks.end()) chart.x_ticks.push_back(r[0]);
        (r[1] == "1" ? lin : quad).points.emplace_back(idx, to_real(r[2]));
      }
      chart.series = {lin, quad};
      break;
    }
  }
  return chart;
}

std::string plot_csv(const std::string& csv_text, const PlotOptions& options) {
  return render_svg(chart_from_csv(parse_csv(csv_text), options));
}

}  // namespace neurphy::plot
