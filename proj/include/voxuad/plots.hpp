#pragma once

/**
 * @file plots.hpp
 * @brief Minimal SVG plotting for PR curves and lesion-size figures.
 */

#include <filesystem>
#include <string>
#include <vector>

namespace voxuad {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool draw_line = true;
  bool draw_markers = false;
  std::string color = "#1f6fb2";
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  // fixed axis ranges; when lo >= hi the range is taken from the data
  double x_lo = 0.0, x_hi = -1.0;
  double y_lo = 0.0, y_hi = -1.0;
};

void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec);

}  // namespace voxuad
