#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

namespace syntheval {

// Minimal static SVG emitters for report plots (severity curves, PCA
// scatter, probability heatmap). Display-only; fixed "%.2f" coordinate
// formatting keeps output deterministic.

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  return colors[i % 8];
}

}  // namespace svg_detail

// One polyline per series over shared categorical x labels.
inline std::string svg_line_chart(const std::string& title,
                                  const std::vector<std::string>& x_labels,
                                  const std::map<std::string, std::vector<double>>& series) {
  const double width = 520, height = 360, left = 70, right = 20, top = 40, bottom = 50;
  double lo = 1e300, hi = -1e300;
  for (const auto& [name, ys] : series)
    for (double y : ys) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto px = [&](std::size_t i) {
    return left + plot_w * (x_labels.size() > 1
                                ? static_cast<double>(i) / (x_labels.size() - 1)
                                : 0.5);
  };
  auto py = [&](double y) { return top + plot_h * (1.0 - (y - lo) / (hi - lo)); };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    svg_detail::num(width) + "\" height=\"" + svg_detail::num(height) + "\">\n";
  out += "<text x=\"" + svg_detail::num(width / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  out += "<rect x=\"" + svg_detail::num(left) + "\" y=\"" + svg_detail::num(top) + "\" width=\"" +
         svg_detail::num(plot_w) + "\" height=\"" + svg_detail::num(plot_h) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (std::size_t i = 0; i < x_labels.size(); ++i)
    out += "<text x=\"" + svg_detail::num(px(i)) + "\" y=\"" + svg_detail::num(height - 25) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + x_labels[i] + "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = lo + (hi - lo) * t / 4.0;
    out += "<text x=\"" + svg_detail::num(left - 8) + "\" y=\"" + svg_detail::num(py(y) + 4) +
           "\" text-anchor=\"end\" font-size=\"10\">" + svg_detail::num(y) + "</text>\n";
  }
  std::size_t idx = 0;
  double legend_y = top + 12;
  for (const auto& [name, ys] : series) {
    std::string points;
    for (std::size_t i = 0; i < ys.size(); ++i)
      points += svg_detail::num(px(i)) + "," + svg_detail::num(py(ys[i])) + " ";
    out += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" +
           svg_detail::palette(idx) + "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < ys.size(); ++i)
      out += "<circle cx=\"" + svg_detail::num(px(i)) + "\" cy=\"" + svg_detail::num(py(ys[i])) +
             "\" r=\"3\" fill=\"" + svg_detail::palette(idx) + "\"/>\n";
    out += "<text x=\"" + svg_detail::num(left + plot_w - 4) + "\" y=\"" +
           svg_detail::num(legend_y) + "\" text-anchor=\"end\" font-size=\"11\" fill=\"" +
           svg_detail::palette(idx) + "\">" + name + "</text>\n";
    legend_y += 14;
    ++idx;
  }
  return out + "</svg>\n";
}

// 2-D scatter with one color per class label.
inline std::string svg_scatter(const std::string& title,
                               const std::vector<std::array<double, 2>>& points,
                               const std::vector<std::string>& labels) {
  const double width = 480, height = 440, margin = 50;
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const auto& p : points) {
    lo_x = std::min(lo_x, p[0]);
    hi_x = std::max(hi_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_y = std::max(hi_y, p[1]);
  }
  if (hi_x <= lo_x) hi_x = lo_x + 1;
  if (hi_y <= lo_y) hi_y = lo_y + 1;

  std::vector<std::string> classes;
  for (const auto& l : labels)
    if (std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);

  auto px = [&](double x) { return margin + (width - 2 * margin) * (x - lo_x) / (hi_x - lo_x); };
  auto py = [&](double y) {
    return height - margin - (height - 2 * margin) * (y - lo_y) / (hi_y - lo_y);
  };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    svg_detail::num(width) + "\" height=\"" + svg_detail::num(height) + "\">\n";
  out += "<text x=\"" + svg_detail::num(width / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto cls = std::find(classes.begin(), classes.end(), labels[i]) - classes.begin();
    out += "<circle cx=\"" + svg_detail::num(px(points[i][0])) + "\" cy=\"" +
           svg_detail::num(py(points[i][1])) + "\" r=\"4\" fill=\"" +
           svg_detail::palette(static_cast<std::size_t>(cls)) + "\" fill-opacity=\"0.8\"/>\n";
  }
  for (std::size_t c = 0; c < classes.size(); ++c)
    out += "<text x=\"" + svg_detail::num(width - margin) + "\" y=\"" +
           svg_detail::num(40.0 + 14.0 * c) + "\" text-anchor=\"end\" font-size=\"11\" fill=\"" +
           svg_detail::palette(c) + "\">" + classes[c] + "</text>\n";
  return out + "</svg>\n";
}

// Items-by-classes probability heatmap, brighter = higher probability.
inline std::string svg_heatmap(const std::string& title,
                               const std::vector<std::vector<double>>& matrix,
                               const std::vector<std::string>& col_labels) {
  const std::size_t rows = matrix.size();
  const std::size_t cols = rows ? matrix[0].size() : 0;
  const double cell_w = 60, top = 50, left = 60;
  const double cell_h = std::max(2.0, std::min(16.0, 360.0 / std::max<std::size_t>(rows, 1)));
  const double width = left + cell_w * cols + 20;
  const double height = top + cell_h * rows + 20;

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    svg_detail::num(width) + "\" height=\"" + svg_detail::num(height) + "\">\n";
  out += "<text x=\"" + svg_detail::num(width / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  for (std::size_t c = 0; c < cols; ++c)
    out += "<text x=\"" + svg_detail::num(left + cell_w * (c + 0.5)) + "\" y=\"" +
           svg_detail::num(top - 8) + "\" text-anchor=\"middle\" font-size=\"11\">" +
           col_labels[c] + "</text>\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const int level = static_cast<int>(std::clamp(matrix[r][c], 0.0, 1.0) * 255.0);
      char color[8];
      std::snprintf(color, sizeof color, "#%02x%02x%02x", level, level, 40 + level / 2);
      out += "<rect x=\"" + svg_detail::num(left + cell_w * c) + "\" y=\"" +
             svg_detail::num(top + cell_h * r) + "\" width=\"" + svg_detail::num(cell_w) +
             "\" height=\"" + svg_detail::num(cell_h) + "\" fill=\"" + color + "\"/>\n";
    }
  }
  return out + "</svg>\n";
}

}  // namespace syntheval
