// Copyright 2026 The Subtrack Authors. All Rights Reserved.
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


// Self-contained SVG line charts from numeric CSV tables.

#ifndef SUBTRACK_PLOT_HPP_
#define SUBTRACK_PLOT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "subtrack/error.hpp"

namespace subtrack {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Parses a header line and numeric rows ("nan" and "inf" accepted).
inline CsvTable read_csv_table(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw SchemaError("row " + std::to_string(t.rows.size() + 1) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(t.header.size()));
    std::vector<double> row;
    for (const std::string& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || *end != '\0') throw SchemaError("non-numeric cell '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.size() < 2) throw SchemaError("CSV needs an x column and at least one series");
  if (t.rows.empty()) throw SchemaError("CSV has no data rows");
  return t;
}

struct PlotStyle {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "dist";
  bool log_y = true;
  int width = 760;
  int height = 460;
};

namespace plot_detail {

inline std::string escape(const std::string& s) {
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
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Series {
  std::string name;
  std::size_t col = 0;
  std::size_t lo = 0, hi = 0;  // band columns, 0 when absent
};

// "<s>_mean" columns become series with optional "<s>_min"/"<s>_max" bands;
// without them every non-x column is a series.
inline std::vector<Series> pick_series(const std::vector<std::string>& header) {
  auto find = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 1; i < header.size(); ++i)
      if (header[i] == name) return i;
    return 0;
  };
  std::vector<Series> out;
  const std::string mean = "_mean";
  for (std::size_t i = 1; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (h.size() > mean.size() && h.compare(h.size() - mean.size(), mean.size(), mean) == 0) {
      const std::string base = h.substr(0, h.size() - mean.size());
      out.push_back({base, i, find(base + "_min"), find(base + "_max")});
    }
  }
  if (out.empty())
    for (std::size_t i = 1; i < header.size(); ++i) out.push_back({header[i], i, 0, 0});
  return out;
}

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return palette[i % 8];
}

}  // namespace plot_detail

// Line chart with one polyline per series; non-finite values (and values
// <= 0 on a log axis) break the line.
inline std::string plot_svg(const CsvTable& t, const PlotStyle& style) {
  using namespace plot_detail;
  if (t.rows.empty() || t.header.size() < 2) throw SchemaError("empty table");
  const std::vector<Series> series = pick_series(t.header);
  auto usable = [&](double v) { return std::isfinite(v) && (!style.log_y || v > 0.0); };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& row : t.rows) {
    if (!std::isfinite(row[0])) continue;
    x0 = std::min(x0, row[0]);
    x1 = std::max(x1, row[0]);
    for (const Series& s : series) {
      for (std::size_t c : {s.col, s.lo, s.hi}) {
        if (c == 0 || !usable(row[c])) continue;
        y0 = std::min(y0, row[c]);
        y1 = std::max(y1, row[c]);
      }
    }
  }
  if (!(x0 <= x1) || !(y0 <= y1)) throw SchemaError("no plottable values");
  if (x0 == x1) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (style.log_y) {
    y0 = std::pow(10.0, std::floor(std::log10(y0)));
    y1 = std::pow(10.0, std::ceil(std::log10(y1)));
    if (y0 == y1) y1 = 10.0 * y0;
  } else {
    const double pad = y0 == y1 ? std::max(1.0, std::abs(y0)) * 0.1 : 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
  const double W = style.width, H = style.height;
  const double left = 80, right = 190, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) {
    const double f = style.log_y ? (std::log10(y) - std::log10(y0)) / (std::log10(y1) - std::log10(y0))
                                 : (y - y0) / (y1 - y0);
    return top + (1.0 - f) * ph;
  };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\""
    << style.height << "\" viewBox=\"0 0 " << style.width << ' ' << style.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!style.title.empty())
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(style.title) << "</text>\n";
  o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
    << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  // Axes ticks.
  std::vector<double> yticks;
  if (style.log_y) {
    const int lo = static_cast<int>(std::lround(std::log10(y0)));
    const int hi = static_cast<int>(std::lround(std::log10(y1)));
    const int stride = std::max(1, (hi - lo + 7) / 8);
    for (int e = lo; e <= hi; e += stride) yticks.push_back(std::pow(10.0, e));
  } else {
    for (int i = 0; i <= 5; ++i) yticks.push_back(y0 + (y1 - y0) * i / 5.0);
  }
  for (double y : yticks) {
    o << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + pw) << "\" y1=\"" << num(py(y))
      << "\" y2=\"" << num(py(y)) << "\" stroke=\"#dddddd\"/>\n"
      << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(y) + 4)
      << "\" text-anchor=\"end\">" << tick_label(y) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double x = x0 + (x1 - x0) * i / 5.0;
    o << "<text x=\"" << num(px(x)) << "\" y=\"" << num(top + ph + 18)
      << "\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n";
  }
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(H - 16)
    << "\" text-anchor=\"middle\">" << escape(style.x_label) << "</text>\n"
    << "<text transform=\"translate(20," << num(top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(style.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    if (s.lo != 0 && s.hi != 0) {
      std::string upper, lower;
      for (const auto& row : t.rows) {
        if (!usable(row[s.lo]) || !usable(row[s.hi])) continue;
        upper += num(px(row[0])) + "," + num(py(row[s.hi])) + " ";
        lower = num(px(row[0])) + "," + num(py(row[s.lo])) + " " + lower;
      }
      if (!upper.empty())
        o << "<polygon points=\"" << upper << lower << "\" fill=\"" << color(k)
          << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        o << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color(k)
          << "\" stroke-width=\"1.6\"/>\n";
      pts.clear();
    };
    for (const auto& row : t.rows) {
      if (!std::isfinite(row[0]) || !usable(row[s.col])) {
        flush();
        continue;
      }
      pts += num(px(row[0])) + "," + num(py(row[s.col])) + " ";
    }
    flush();
  }

  const double lx = left + pw + 14;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double ly = top + 10 + 20.0 * static_cast<double>(k);
    o << "<line x1=\"" << num(lx) << "\" x2=\"" << num(lx + 24) << "\" y1=\"" << num(ly)
      << "\" y2=\"" << num(ly) << "\" stroke=\"" << color(k) << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(ly + 4) << "\">"
      << escape(series[k].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace subtrack

#endif  // SUBTRACK_PLOT_HPP_
