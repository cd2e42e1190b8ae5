// Copyright 2026 The namasag Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Explanation artifacts: shape-function curves with data-density shading,
// feature-importance rankings, and their CSV and SVG renderings.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "namasag/common.hpp"
#include "namasag/featurize.hpp"
#include "namasag/nam.hpp"

namespace namasag {

struct ShapeExport {
  std::string feature;
  std::size_t feature_index = 0;
  std::vector<double> grid;                 // G, strictly increasing
  std::vector<std::vector<double>> values;  // G x K centered contributions
  std::vector<double> bin_edges;            // H + 1
  std::vector<std::size_t> counts;          // H
};

struct ImportanceExport {
  // Descending by importance; ties ordered by name.
  std::vector<std::pair<std::string, double>> entries;
};

// Uniform grid over the observed column range and a histogram of the column.
// A constant column v uses the range [v - 0.5, v + 0.5] and a single bin.
inline std::vector<ShapeExport> export_shapes(const NamModel& model,
                                              const FeatureMatrix& features,
                                              std::size_t grid_size = 100,
                                              std::size_t bins = 20) {
  if (features.rows == 0) throw DataError("export_shapes: empty feature matrix");
  if (grid_size < 2) throw UsageError("export_shapes: grid_size must be >= 2");
  if (bins < 1) throw UsageError("export_shapes: bins must be >= 1");
  if (features.cols != model.num_features) {
    throw UsageError("export_shapes: feature matrix does not match the model");
  }
  std::vector<ShapeExport> out;
  for (std::size_t i = 0; i < features.cols; ++i) {
    double lo = features.at(0, i), hi = lo;
    for (std::size_t n = 1; n < features.rows; ++n) {
      lo = std::min(lo, features.at(n, i));
      hi = std::max(hi, features.at(n, i));
    }
    std::size_t h = bins;
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
      h = 1;
    }
    ShapeExport e;
    e.feature = i < model.feature_names.size() ? model.feature_names[i] : features.feature_names[i];
    e.feature_index = i;
    e.grid.resize(grid_size);
    const double span = hi - lo;
    for (std::size_t g = 0; g < grid_size; ++g) {
      e.grid[g] = lo + span * static_cast<double>(g) / static_cast<double>(grid_size - 1);
    }
    e.grid.back() = hi;
    e.values = shape_function(model, i, e.grid);
    e.bin_edges.resize(h + 1);
    for (std::size_t b = 0; b <= h; ++b) {
      e.bin_edges[b] = lo + span * static_cast<double>(b) / static_cast<double>(h);
    }
    e.bin_edges.back() = hi;
    e.counts.assign(h, 0);
    for (std::size_t n = 0; n < features.rows; ++n) {
      const double pos = (features.at(n, i) - lo) / span * static_cast<double>(h);
      auto b = static_cast<std::size_t>(std::max(0.0, std::floor(pos)));
      e.counts[std::min(b, h - 1)] += 1;
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline ImportanceExport make_importance_export(std::span<const std::string> names,
                                               std::span<const double> importances) {
  if (names.size() != importances.size()) {
    throw UsageError("importance export: names and values differ in length");
  }
  ImportanceExport e;
  for (std::size_t i = 0; i < names.size(); ++i) e.entries.emplace_back(names[i], importances[i]);
  std::sort(e.entries.begin(), e.entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return e;
}

// ---------------------------------------------------------------------------
// CSV

// `class_offset` is added to the zero-based class index (e.g. rating_min).
inline std::string format_shape_csv(std::span<const ShapeExport> exports, int class_offset = 0) {
  std::string out = "feature,x,class,contribution\n";
  for (const auto& e : exports) {
    for (std::size_t g = 0; g < e.grid.size(); ++g) {
      for (std::size_t c = 0; c < e.values[g].size(); ++c) {
        out += csv_field(e.feature) + ',' + format_double(e.grid[g]) + ',' +
               std::to_string(static_cast<int>(c) + class_offset) + ',' +
               format_double(e.values[g][c]) + '\n';
      }
    }
  }
  return out;
}

// Inverse of format_shape_csv for grid and values; density is not stored there.
inline std::vector<ShapeExport> parse_shape_csv(std::string_view csv, int class_offset = 0) {
  const auto records = parse_csv(csv);
  if (records.empty() || records[0].fields !=
                             std::vector<std::string>{"feature", "x", "class", "contribution"}) {
    throw DataError("shape csv header must be 'feature,x,class,contribution'");
  }
  std::vector<ShapeExport> out;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    if (f.size() != 4) throw DataError("shape csv row " + std::to_string(r) + ": bad field count");
    if (out.empty() || out.back().feature != f[0]) {
      ShapeExport e;
      e.feature = f[0];
      e.feature_index = out.size();
      out.push_back(std::move(e));
    }
    auto& e = out.back();
    const double x = parse_double(f[1]);
    long long cls = 0;
    if (!parse_int(f[2], cls)) throw DataError("shape csv row " + std::to_string(r) + ": bad class");
    const auto c = static_cast<std::size_t>(cls - class_offset);
    if (e.grid.empty() || e.grid.back() != x) {
      e.grid.push_back(x);
      e.values.emplace_back();
    }
    auto& row = e.values.back();
    if (c != row.size()) throw DataError("shape csv row " + std::to_string(r) + ": classes out of order");
    row.push_back(parse_double(f[3]));
  }
  return out;
}

inline std::string format_density_csv(std::span<const ShapeExport> exports) {
  std::string out = "feature,bin_left,bin_right,count\n";
  for (const auto& e : exports) {
    for (std::size_t b = 0; b < e.counts.size(); ++b) {
      out += csv_field(e.feature) + ',' + format_double(e.bin_edges[b]) + ',' +
             format_double(e.bin_edges[b + 1]) + ',' + std::to_string(e.counts[b]) + '\n';
    }
  }
  return out;
}

inline std::string format_importance_csv(const ImportanceExport& e) {
  std::string out = "feature,importance\n";
  for (const auto& [name, v] : e.entries) out += csv_field(name) + ',' + format_double(v) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

inline std::string px(double v) { return fmt("%.2f", v); }

constexpr const char* kClassColors[] = {"#d62728", "#1f77b4", "#ff7f0e", "#9467bd",
                                        "#8c564b", "#17becf", "#7f7f7f", "#bcbd22",
                                        "#e377c2", "#2ca02c"};

}  // namespace detail

struct ShapeSvgOptions {
  int width = 640;
  int height = 400;
  int class_offset = 0;  // legend label = class index + offset
  // Shared y-axis range across plots; per-plot range when unset.
  std::optional<std::pair<double, double>> y_range;
};

// Lowest and highest class: the default subset for shape plots.
inline std::vector<std::size_t> extreme_classes(std::size_t num_classes) {
  return {0, num_classes - 1};
}

inline std::vector<std::size_t> all_classes(std::size_t num_classes) {
  std::vector<std::size_t> v(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) v[c] = c;
  return v;
}

// One polyline per selected class over pink density bars. Each polyline
// carries the exact plotted values in its data-values attribute.
inline std::string render_shape_svg(const ShapeExport& e, std::span<const std::size_t> classes,
                                    const ShapeSvgOptions& opt = {}) {
  if (classes.empty()) throw UsageError("render_shape_svg: empty class subset");
  if (e.grid.size() < 2) throw UsageError("render_shape_svg: grid needs two points");
  const std::size_t k = e.values.front().size();
  for (auto c : classes) {
    if (c >= k) throw UsageError("render_shape_svg: class " + std::to_string(c) + " out of range");
  }

  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = opt.width - left - right;
  const double ph = opt.height - top - bottom;
  const double x_lo = e.grid.front(), x_hi = e.grid.back();

  double y_lo, y_hi;
  if (opt.y_range) {
    std::tie(y_lo, y_hi) = *opt.y_range;
  } else {
    y_lo = y_hi = e.values[0][classes[0]];
    for (const auto& row : e.values) {
      for (auto c : classes) {
        y_lo = std::min(y_lo, row[c]);
        y_hi = std::max(y_hi, row[c]);
      }
    }
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
  }
  if (!(y_hi > y_lo)) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  auto sx = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto sy = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
       std::to_string(opt.width) + "\" height=\"" + std::to_string(opt.height) +
       "\" viewBox=\"0 0 " + std::to_string(opt.width) + ' ' + std::to_string(opt.height) +
       "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(opt.width) + "\" height=\"" +
       std::to_string(opt.height) + "\" fill=\"#ffffff\"/>\n";
  s += "<text x=\"" + detail::px(opt.width / 2.0) +
       "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
       detail::xml_escape(e.feature) + "</text>\n";

  // Density, clipped to the plotted x range.
  std::size_t max_count = 0;
  for (auto c : e.counts) max_count = std::max(max_count, c);
  s += "<g class=\"density\">\n";
  for (std::size_t b = 0; b < e.counts.size(); ++b) {
    if (e.counts[b] == 0 || max_count == 0) continue;
    const double x0 = sx(std::clamp(e.bin_edges[b], x_lo, x_hi));
    const double x1 = sx(std::clamp(e.bin_edges[b + 1], x_lo, x_hi));
    const double opacity = static_cast<double>(e.counts[b]) / static_cast<double>(max_count);
    s += "<rect x=\"" + detail::px(x0) + "\" y=\"" + detail::px(top) + "\" width=\"" +
         detail::px(std::max(0.0, x1 - x0)) + "\" height=\"" + detail::px(ph) +
         "\" fill=\"#f48fb1\" fill-opacity=\"" + detail::fmt("%.4f", 0.6 * opacity) +
         "\" data-count=\"" + std::to_string(e.counts[b]) + "\"/>\n";
  }
  s += "</g>\n";

  // Axes and zero line.
  s += "<g class=\"axes\" stroke=\"#333333\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + detail::px(left) + "\" y1=\"" + detail::px(top + ph) + "\" x2=\"" +
       detail::px(left + pw) + "\" y2=\"" + detail::px(top + ph) + "\"/>\n";
  s += "<line x1=\"" + detail::px(left) + "\" y1=\"" + detail::px(top) + "\" x2=\"" +
       detail::px(left) + "\" y2=\"" + detail::px(top + ph) + "\"/>\n";
  if (y_lo < 0.0 && y_hi > 0.0) {
    s += "<line x1=\"" + detail::px(left) + "\" y1=\"" + detail::px(sy(0.0)) + "\" x2=\"" +
         detail::px(left + pw) + "\" y2=\"" + detail::px(sy(0.0)) +
         "\" stroke-dasharray=\"4 3\" stroke=\"#999999\"/>\n";
  }
  s += "</g>\n";
  s += "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x_lo + (x_hi - x_lo) * t / 4.0;
    const double yv = y_lo + (y_hi - y_lo) * t / 4.0;
    s += "<text x=\"" + detail::px(sx(xv)) + "\" y=\"" + detail::px(top + ph + 16) +
         "\" text-anchor=\"middle\">" + detail::fmt("%.2f", xv) + "</text>\n";
    s += "<text x=\"" + detail::px(left - 6) + "\" y=\"" + detail::px(sy(yv) + 4) +
         "\" text-anchor=\"end\">" + detail::fmt("%.2f", yv) + "</text>\n";
  }
  s += "</g>\n";
  s += "<text x=\"" + detail::px(left + pw / 2) + "\" y=\"" + detail::px(opt.height - 12.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
       detail::xml_escape(e.feature) + " (similarity)</text>\n";
  s += "<text x=\"16\" y=\"" + detail::px(top + ph / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
       "transform=\"rotate(-90 16 " +
       detail::px(top + ph / 2) + ")\">log odds</text>\n";

  s += "<g class=\"curves\" fill=\"none\" stroke-width=\"2\">\n";
  for (std::size_t idx = 0; idx < classes.size(); ++idx) {
    const auto c = classes[idx];
    const char* color = detail::kClassColors[c % std::size(detail::kClassColors)];
    std::string points, values;
    for (std::size_t g = 0; g < e.grid.size(); ++g) {
      if (g) {
        points.push_back(' ');
        values.push_back(' ');
      }
      points += detail::px(sx(e.grid[g])) + ',' + detail::px(sy(e.values[g][c]));
      values += format_double(e.values[g][c]);
    }
    s += "<polyline stroke=\"" + std::string(color) + "\" data-class=\"" +
         std::to_string(static_cast<int>(c) + opt.class_offset) + "\" data-values=\"" +
         values + "\" points=\"" + points + "\"/>\n";
  }
  s += "</g>\n";

  s += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t idx = 0; idx < classes.size(); ++idx) {
    const auto c = classes[idx];
    const char* color = detail::kClassColors[c % std::size(detail::kClassColors)];
    const double ly = top + 8 + 14.0 * static_cast<double>(idx);
    s += "<line x1=\"" + detail::px(left + pw - 70) + "\" y1=\"" + detail::px(ly) +
         "\" x2=\"" + detail::px(left + pw - 55) + "\" y2=\"" + detail::px(ly) +
         "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + detail::px(left + pw - 50) + "\" y=\"" + detail::px(ly + 4) +
         "\">class " + std::to_string(static_cast<int>(c) + opt.class_offset) + "</text>\n";
  }
  s += "</g>\n</svg>\n";
  return s;
}

// Horizontal bars for the top_n most important features, listed in
// increasing importance from top to bottom.
inline std::string render_importance_svg(const ImportanceExport& e, std::size_t top_n = 40) {
  if (e.entries.empty()) throw UsageError("render_importance_svg: empty export");
  if (top_n < 1) throw UsageError("render_importance_svg: top_n must be >= 1");
  const std::size_t n = std::min(top_n, e.entries.size());
  std::vector<std::pair<std::string, double>> shown(e.entries.begin(),
                                                    e.entries.begin() + static_cast<std::ptrdiff_t>(n));
  std::reverse(shown.begin(), shown.end());

  const double left = 230, right = 60, top = 40, bar_h = 16, gap = 4;
  const int width = 720;
  const int height = static_cast<int>(top + static_cast<double>(n) * (bar_h + gap) + 30);
  const double pw = width - left - right;
  double mx = 0.0;
  for (const auto& [name, v] : shown) mx = std::max(mx, v);

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
       std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
       std::to_string(width) + ' ' + std::to_string(height) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\" fill=\"#ffffff\"/>\n";
  s += "<text x=\"" + detail::px(width / 2.0) +
       "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       "Mean Feature Importance</text>\n";
  s += "<g class=\"bars\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t i = 0; i < shown.size(); ++i) {
    const auto& [name, v] = shown[i];
    const double y = top + static_cast<double>(i) * (bar_h + gap);
    const double w = mx > 0.0 ? v / mx * pw : 0.0;
    s += "<text x=\"" + detail::px(left - 6) + "\" y=\"" + detail::px(y + bar_h - 4) +
         "\" text-anchor=\"end\">" + detail::xml_escape(name) + "</text>\n";
    s += "<rect class=\"bar\" x=\"" + detail::px(left) + "\" y=\"" + detail::px(y) +
         "\" width=\"" + detail::px(w) + "\" height=\"" + detail::px(bar_h) +
         "\" fill=\"#4c72b0\" data-feature=\"" + detail::xml_escape(name) +
         "\" data-importance=\"" + format_double(v) + "\"/>\n";
    s += "<text x=\"" + detail::px(left + w + 4) + "\" y=\"" + detail::px(y + bar_h - 4) +
         "\">" + detail::fmt("%.4f", v) + "</text>\n";
  }
  s += "</g>\n</svg>\n";
  return s;
}

}  // namespace namasag
