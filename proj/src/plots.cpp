#include "voxuad/plots.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "voxuad/volume_io.hpp"

namespace voxuad {

namespace {

constexpr int kWidth = 640, kHeight = 480;
constexpr int kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 55;

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

std::string tick_label(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

}  // namespace

void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec) {
  double x_lo = spec.x_lo, x_hi = spec.x_hi, y_lo = spec.y_lo, y_hi = spec.y_hi;
  if (!(x_lo < x_hi) || !(y_lo < y_hi)) {
    double dx_lo = 0, dx_hi = 1, dy_lo = 0, dy_hi = 1;
    bool first = true;
    for (const auto& s : spec.series)
      for (auto [x, y] : s.points) {
        if (first) {
          dx_lo = dx_hi = x;
          dy_lo = dy_hi = y;
          first = false;
        }
        dx_lo = std::min(dx_lo, x);
        dx_hi = std::max(dx_hi, x);
        dy_lo = std::min(dy_lo, y);
        dy_hi = std::max(dy_hi, y);
      }
    if (!(dx_lo < dx_hi)) dx_hi = dx_lo + 1.0;
    if (!(dy_lo < dy_hi)) dy_hi = dy_lo + 1.0;
    if (!(x_lo < x_hi)) {
      x_lo = dx_lo;
      x_hi = dx_hi;
    }
    if (!(y_lo < y_hi)) {
      double pad = 0.05 * (dy_hi - dy_lo);
      y_lo = dy_lo - pad;
      y_hi = dy_hi + pad;
    }
  }

  const double pw = kWidth - kMarginL - kMarginR;
  const double ph = kHeight - kMarginT - kMarginB;
  auto px = [&](double x) { return kMarginL + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kMarginT + ph - (y - y_lo) / (y_hi - y_lo) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\" "
      << "font-family=\"sans-serif\">" << spec.title << "</text>\n";

  // axes box and ticks
  svg << "<rect x=\"" << kMarginL << "\" y=\"" << kMarginT << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double fx = x_lo + (x_hi - x_lo) * i / 5.0;
    double fy = y_lo + (y_hi - y_lo) * i / 5.0;
    svg << "<line x1=\"" << px(fx) << "\" y1=\"" << kMarginT + ph << "\" x2=\"" << px(fx)
        << "\" y2=\"" << kMarginT + ph + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << px(fx) << "\" y=\"" << kMarginT + ph + 20
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << tick_label(fx) << "</text>\n";
    svg << "<line x1=\"" << kMarginL - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << kMarginL
        << "\" y2=\"" << py(fy) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kMarginL - 8 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << tick_label(fy)
        << "</text>\n";
  }
  svg << "<text x=\"" << kMarginL + pw / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << spec.x_label
      << "</text>\n";
  svg << "<text x=\"18\" y=\"" << kMarginT + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
      << "transform=\"rotate(-90 18 " << kMarginT + ph / 2 << ")\">" << spec.y_label
      << "</text>\n";

  int legend_y = kMarginT + 14;
  for (const auto& s : spec.series) {
    if (s.draw_line && s.points.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (auto [x, y] : s.points) svg << fmt(px(x)) << "," << fmt(py(y)) << " ";
      svg << "\"/>\n";
    }
    if (s.draw_markers || s.points.size() == 1) {
      for (auto [x, y] : s.points)
        svg << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
            << "\" r=\"2.5\" fill=\"" << s.color << "\" fill-opacity=\"0.55\"/>\n";
    }
    if (!s.label.empty()) {
      svg << "<line x1=\"" << kMarginL + pw - 150 << "\" y1=\"" << legend_y << "\" x2=\""
          << kMarginL + pw - 125 << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color
          << "\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << kMarginL + pw - 118 << "\" y=\"" << legend_y + 4
          << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.label << "</text>\n";
      legend_y += 16;
    }
  }
  svg << "</svg>\n";
  atomic_write_file(path, svg.str());
}

}  // namespace voxuad
