#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "empathic/csv.hpp"

namespace empathic {

/// Trailing moving average: out[i] is the mean of the present values among
/// in[i-window+1 .. i]; empty when the window holds no values.
inline std::vector<std::optional<double>> trailing_mean(const std::vector<std::optional<double>>& in,
                                                        std::size_t window) {
  if (window == 0) throw std::invalid_argument("trailing_mean: window must be positive");
  std::vector<std::optional<double>> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = i + 1 - std::min(window, i + 1); k <= i; ++k) {
      if (!in[k]) continue;
      sum += *in[k];
      ++count;
    }
    if (count > 0) out[i] = sum / static_cast<double>(count);
  }
  return out;
}

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Pixel mapping of a chart's data range.
struct ChartFrame {
  double width = 800.0;
  double height = 480.0;
  double left = 70.0;
  double right = 210.0;  // legend column
  double top = 40.0;
  double bottom = 50.0;
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

  double map_x(double x) const {
    return left + (x - x_min) / (x_max - x_min) * (width - left - right);
  }
  double map_y(double y) const {
    return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom);
  }
  double unmap_y(double py) const {
    return y_min + (height - bottom - py) / (height - top - bottom) * (y_max - y_min);
  }
};

inline ChartFrame frame_for(const LineChart& chart) {
  ChartFrame f;
  bool any = false;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!any) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        any = true;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!any) return f;
  if (x1 == x0) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 == y0) {
    const double pad = std::max(std::abs(y0) * 0.1, 0.5);
    y0 -= pad;
    y1 += pad;
  }
  f.x_min = x0;
  f.x_max = x1;
  f.y_min = y0;
  f.y_max = y1;
  return f;
}

namespace detail {

inline std::string escape_xml(const std::string& s) {
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

inline std::string num(double v) {
  std::ostringstream o;
  o.precision(10);
  o << v;
  return o.str();
}

inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (raw <= step) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step)
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return ticks;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

}  // namespace detail

/// Self-contained SVG line chart with axes, ticks and a legend.
inline std::string render_svg(const LineChart& chart) {
  using detail::num;
  const ChartFrame f = frame_for(chart);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
      << "\" viewBox=\"0 0 " << num(f.width) << ' ' << num(f.height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(f.width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << detail::escape_xml(chart.title) << "</text>\n";

  const double plot_right = f.width - f.right;
  const double plot_bottom = f.height - f.bottom;
  svg << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  svg << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(plot_bottom) << "\" x2=\"" << num(plot_right) << "\" y2=\""
      << num(plot_bottom) << "\"/>\n";
  svg << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.top) << "\" x2=\"" << num(f.left) << "\" y2=\""
      << num(plot_bottom) << "\"/>\n";
  svg << "</g>\n<g class=\"ticks\">\n";
  for (double t : detail::nice_ticks(f.x_min, f.x_max)) {
    const double px = f.map_x(t);
    svg << "<line x1=\"" << num(px) << "\" y1=\"" << num(plot_bottom) << "\" x2=\"" << num(px) << "\" y2=\""
        << num(plot_bottom + 5) << "\" stroke=\"black\"/>"
        << "<text x=\"" << num(px) << "\" y=\"" << num(plot_bottom + 18) << "\" text-anchor=\"middle\">" << num(t)
        << "</text>\n";
  }
  for (double t : detail::nice_ticks(f.y_min, f.y_max)) {
    const double py = f.map_y(t);
    svg << "<line x1=\"" << num(f.left - 5) << "\" y1=\"" << num(py) << "\" x2=\"" << num(f.left) << "\" y2=\""
        << num(py) << "\" stroke=\"black\"/>"
        << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(py) << "\" x2=\"" << num(plot_right) << "\" y2=\""
        << num(py) << "\" stroke=\"#e5e5e5\"/>"
        << "<text x=\"" << num(f.left - 8) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << num(t)
        << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << num((f.left + plot_right) / 2) << "\" y=\"" << num(f.height - 12)
      << "\" text-anchor=\"middle\">" << detail::escape_xml(chart.x_label) << "</text>\n";
  svg << "<text transform=\"translate(16," << num((f.top + plot_bottom) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape_xml(chart.y_label) << "</text>\n";

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    svg << "<polyline class=\"series\" fill=\"none\" stroke-width=\"1.5\" stroke=\"" << detail::palette(i)
        << "\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (k) svg << ' ';
      svg << num(f.map_x(s.x[k])) << ',' << num(f.map_y(s.y[k]));
    }
    svg << "\"/>\n";
    const double ly = f.top + 18.0 * static_cast<double>(i);
    svg << "<line x1=\"" << num(plot_right + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(plot_right + 40)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << detail::palette(i) << "\" stroke-width=\"2\"/>"
        << "<text x=\"" << num(plot_right + 46) << "\" y=\"" << num(ly + 4) << "\">" << detail::escape_xml(s.label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

/// Per-episode series of `metric` from a metrics CSV, averaged over runs
/// and smoothed with a trailing mean.
///
/// Comparison CSVs (with beta and baseline columns) give one line per
/// (beta, baseline) cell; per-run and aggregate CSVs give a single line. For
/// aggregate CSVs the `<metric>_mean` column is used.
inline LineChart chart_from_csv(const csv::Table& table, const std::string& metric, std::size_t window) {
  std::string column = metric;
  if (!table.find(column)) {
    if (table.find(metric + "_mean"))
      column = metric + "_mean";
    else
      throw std::invalid_argument("csv has no column named '" + metric + "'");
  }
  const auto episodes = table.numbers("episode");
  const auto values = table.numbers(column);
  const bool grouped = table.find("beta") && table.find("baseline");
  std::vector<std::string> labels(table.rows.size(), metric);
  if (grouped) {
    const auto betas = table.strings("beta");
    const auto baselines = table.strings("baseline");
    for (std::size_t i = 0; i < labels.size(); ++i)
      labels[i] = baselines[i] == "none" ? "beta=" + betas[i] : baselines[i] + " (beta=" + betas[i] + ")";
  }

  // label -> episode -> (sum, count), keeping first-seen label order
  std::vector<std::string> order;
  std::map<std::string, std::map<double, std::pair<double, int>>> acc;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (!episodes[i]) continue;
    if (!acc.contains(labels[i])) order.push_back(labels[i]);
    auto& cell = acc[labels[i]][*episodes[i]];
    if (values[i]) {
      cell.first += *values[i];
      ++cell.second;
    }
  }

  LineChart chart;
  chart.title = metric;
  chart.x_label = "episode";
  chart.y_label = metric + " (trailing mean, window " + std::to_string(window) + ")";
  for (const auto& label : order) {
    std::vector<double> xs;
    std::vector<std::optional<double>> means;
    for (const auto& [ep, sc] : acc[label]) {
      xs.push_back(ep);
      means.push_back(sc.second > 0 ? std::optional<double>(sc.first / sc.second) : std::nullopt);
    }
    const auto smooth = trailing_mean(means, window);
    Series s;
    s.label = label;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (!smooth[k]) continue;
      s.x.push_back(xs[k]);
      s.y.push_back(*smooth[k]);
    }
    chart.series.push_back(std::move(s));
  }
  return chart;
}

inline void plot(const std::filesystem::path& csv_path, const std::string& metric,
                 const std::filesystem::path& out_path, std::size_t window) {
  const LineChart chart = chart_from_csv(csv::read(csv_path), metric, window);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path.string() + " for writing");
  out << render_svg(chart);
}

}  // namespace empathic
