// SPDX-License-Identifier: Apache-2.0
#include "uqtrace/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "uqtrace/common.hpp"

namespace uqtrace::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 48.0;

std::string coord(double v) { return fmt_fixed(v, 2); }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

}  // namespace

std::string line_chart(const std::string& title,
                       const std::vector<LineSeries>& series,
                       const std::string& x_label,
                       const std::string& y_label) {
  Range xr, yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.pad();
  yr.pad();

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto sx = [&](double v) {
    return kMarginLeft + plot_w * (v - xr.lo) / (xr.hi - xr.lo);
  };
  auto sy = [&](double v) {
    return kMarginTop + plot_h * (1.0 - (v - yr.lo) / (yr.hi - yr.lo));
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << coord(kWidth / 2) << "\" y=\"24\" font-size=\"16\" "
         "text-anchor=\"middle\" font-family=\"sans-serif\">"
      << escape(title) << "</text>\n";

  // Axes
  out << "<line x1=\"" << coord(kMarginLeft) << "\" y1=\""
      << coord(kMarginTop + plot_h) << "\" x2=\"" << coord(kMarginLeft + plot_w)
      << "\" y2=\"" << coord(kMarginTop + plot_h)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << coord(kMarginLeft) << "\" y1=\"" << coord(kMarginTop)
      << "\" x2=\"" << coord(kMarginLeft) << "\" y2=\""
      << coord(kMarginTop + plot_h)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  // Tick labels at the extremes
  out << "<text x=\"" << coord(kMarginLeft) << "\" y=\""
      << coord(kHeight - 20) << "\" font-size=\"11\" font-family=\"sans-serif\">"
      << fmt_fixed(xr.lo, 3) << "</text>\n";
  out << "<text x=\"" << coord(kMarginLeft + plot_w) << "\" y=\""
      << coord(kHeight - 20)
      << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">"
      << fmt_fixed(xr.hi, 3) << "</text>\n";
  out << "<text x=\"" << coord(kMarginLeft - 6) << "\" y=\""
      << coord(kMarginTop + plot_h)
      << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">"
      << fmt_fixed(yr.lo, 3) << "</text>\n";
  out << "<text x=\"" << coord(kMarginLeft - 6) << "\" y=\""
      << coord(kMarginTop + 10)
      << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">"
      << fmt_fixed(yr.hi, 3) << "</text>\n";
  if (!x_label.empty())
    out << "<text x=\"" << coord(kMarginLeft + plot_w / 2) << "\" y=\""
        << coord(kHeight - 8)
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << escape(x_label) << "</text>\n";
  if (!y_label.empty())
    out << "<text x=\"14\" y=\"" << coord(kMarginTop + plot_h / 2)
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" transform=\"rotate(-90 14 "
        << coord(kMarginTop + plot_h / 2) << ")\">" << escape(y_label)
        << "</text>\n";

  double legend_y = kMarginTop + 6.0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (i) out << " ";
      out << coord(sx(s.x[i])) << "," << coord(sy(s.y[i]));
    }
    out << "\"/>\n";
    out << "<line x1=\"" << coord(kMarginLeft + plot_w - 130) << "\" y1=\""
        << coord(legend_y) << "\" x2=\"" << coord(kMarginLeft + plot_w - 110)
        << "\" y2=\"" << coord(legend_y) << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << coord(kMarginLeft + plot_w - 104) << "\" y=\""
        << coord(legend_y + 4)
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << escape(s.name)
        << "</text>\n";
    legend_y += 16.0;
  }
  out << "</svg>\n";
  return out.str();
}

namespace {

// Diverging blue-white-red map over [-limit, limit].
std::string cell_color(double v, double limit) {
  const double t = std::clamp(v / limit, -1.0, 1.0);
  int r, g, b;
  if (t >= 0.0) {
    r = 255;
    g = static_cast<int>(std::lround(255.0 * (1.0 - t)));
    b = g;
  } else {
    b = 255;
    g = static_cast<int>(std::lround(255.0 * (1.0 + t)));
    r = g;
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string heatmap(const std::string& title,
                    const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels,
                    const std::vector<std::vector<double>>& values,
                    double limit) {
  const double cell = 26.0;
  const double left = 170.0;
  const double top = 120.0;
  const double width = left + cell * static_cast<double>(col_labels.size()) + 20.0;
  const double height = top + cell * static_cast<double>(row_labels.size()) + 20.0;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << coord(width / 2)
      << "\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\">"
      << escape(title) << "</text>\n";

  for (size_t c = 0; c < col_labels.size(); ++c) {
    const double x = left + cell * (static_cast<double>(c) + 0.5);
    out << "<text x=\"" << coord(x) << "\" y=\"" << coord(top - 8)
        << "\" font-size=\"10\" text-anchor=\"start\" "
           "font-family=\"sans-serif\" transform=\"rotate(-60 " << coord(x)
        << " " << coord(top - 8) << ")\">" << escape(col_labels[c])
        << "</text>\n";
  }
  for (size_t r = 0; r < row_labels.size(); ++r) {
    const double y = top + cell * (static_cast<double>(r) + 0.5);
    out << "<text x=\"" << coord(left - 8) << "\" y=\"" << coord(y + 4)
        << "\" font-size=\"11\" text-anchor=\"end\" "
           "font-family=\"sans-serif\">"
        << escape(row_labels[r]) << "</text>\n";
    for (size_t c = 0; c < col_labels.size(); ++c) {
      const double v = values[r][c];
      out << "<rect x=\"" << coord(left + cell * static_cast<double>(c))
          << "\" y=\"" << coord(top + cell * static_cast<double>(r))
          << "\" width=\"" << coord(cell) << "\" height=\"" << coord(cell)
          << "\" fill=\"" << cell_color(v, limit)
          << "\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << content;
}

}  // namespace uqtrace::svg
