#pragma once

#include <string>
#include <vector>

namespace segkit {

enum class SeriesStyle { kLine, kStep, kPoints };

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lower;  // optional shaded band, same length as x
  std::vector<double> upper;
  SeriesStyle style = SeriesStyle::kLine;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  std::vector<double> x_guides;  // dashed vertical lines
  std::vector<double> y_guides;  // dashed horizontal lines
  // When set, y values index these labels (dot plots).
  std::vector<std::string> y_categories;
  int width = 640;
  int height = 420;
};

/// Renders a plot as standalone SVG. `timestamp`, when nonempty, is embedded
/// as a comment; pass an empty string for byte-stable output.
std::string render_svg(const Plot& plot, const std::string& timestamp = {});

// Frequency polygon of `values` over `bins` equal-width bins.
PlotSeries histogram_polygon(const std::vector<double>& values, int bins, std::string label);

}  // namespace segkit
