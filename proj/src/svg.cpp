#include "segkit/svg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace segkit {

namespace {

const char* kPalette[] = {"#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d68910", "#566573", "#17a589", "#a04000"};

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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::abs(lo) * 0.05, 0.5);
      lo -= pad;
      hi += pad;
    } else {
      const double pad = (hi - lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
};

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::string render_svg(const Plot& plot, const std::string& timestamp) {
  const double left = plot.y_categories.empty() ? 64 : 150, right = 150, top = 36, bottom = 48;
  const double w = plot.width - left - right, h = plot.height - top - bottom;
  Range xr, yr;
  for (const auto& s : plot.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
    for (double v : s.lower) yr.add(v);
    for (double v : s.upper) yr.add(v);
  }
  for (double v : plot.x_guides) xr.add(v);
  for (double v : plot.y_guides) yr.add(v);
  xr.finish();
  if (plot.y_categories.empty()) {
    yr.finish();
  } else {
    yr.lo = -0.5;
    yr.hi = static_cast<double>(plot.y_categories.size()) - 0.5;
  }
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * w; };
  auto py = [&](double y) { return top + h - (y - yr.lo) / (yr.hi - yr.lo) * h; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n",
      plot.width, plot.height, plot.width, plot.height);
  if (!timestamp.empty()) out += fmt::format("<!-- generated {} -->\n", escape(timestamp));
  out += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", plot.width, plot.height);
  out += fmt::format("<text x=\"{:.1f}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
                     left + w / 2, escape(plot.title));
  out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"#444\"/>\n",
                     left, top, w, h);

  // axes
  const double xs = nice_step(xr.hi - xr.lo, 6);
  for (double v = std::ceil(xr.lo / xs) * xs; v <= xr.hi + 1e-12; v += xs) {
    const double tick = std::abs(v) < xs * 1e-9 ? 0.0 : v;
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#444\"/>"
                       "<text x=\"{0:.1f}\" y=\"{3:.1f}\" text-anchor=\"middle\">{4:g}</text>\n",
                       px(tick), top + h, top + h + 4, top + h + 16, tick);
  }
  if (plot.y_categories.empty()) {
    const double ys = nice_step(yr.hi - yr.lo, 6);
    for (double v = std::ceil(yr.lo / ys) * ys; v <= yr.hi + 1e-12; v += ys) {
      const double tick = std::abs(v) < ys * 1e-9 ? 0.0 : v;
      out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#444\"/>"
                         "<text x=\"{3:.1f}\" y=\"{4:.1f}\" text-anchor=\"end\">{5:g}</text>\n",
                         left - 4, py(tick), left, left - 6, py(tick) + 4, tick);
    }
  } else {
    for (std::size_t i = 0; i < plot.y_categories.size(); ++i) {
      const double y = py(static_cast<double>(i));
      out += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>"
                         "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n",
                         left, y, left + w, y, left - 6, y + 4, escape(plot.y_categories[i]));
    }
  }
  out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", left + w / 2,
                     top + h + 36, escape(plot.x_label));
  out += fmt::format("<text transform=\"translate(14,{:.1f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                     top + h / 2, escape(plot.y_label));
  for (double g : plot.x_guides)
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#888\" "
                       "stroke-dasharray=\"4 3\"/>\n",
                       px(g), top, top + h);
  for (double g : plot.y_guides)
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#888\" "
                       "stroke-dasharray=\"4 3\"/>\n",
                       left, py(g), left + w);

  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    const char* colour = kPalette[si % 8];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.lower.size() == n && s.upper.size() == n && n > 0) {
      std::string pts;
      for (std::size_t i = 0; i < n; ++i) pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.upper[i]));
      for (std::size_t i = n; i-- > 0;) pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.lower[i]));
      out += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n", pts, colour);
    }
    if (s.style == SeriesStyle::kPoints) {
      for (std::size_t i = 0; i < n; ++i)
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3.5\" fill=\"{}\"/>\n", px(s.x[i]), py(s.y[i]),
                           colour);
    } else if (n > 0) {
      std::string pts;
      for (std::size_t i = 0; i < n; ++i) {
        if (s.style == SeriesStyle::kStep && i > 0) pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i - 1]));
        pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
      }
      out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>\n", pts, colour);
    }
    const double ly = top + 14 + 16 * static_cast<double>(si);
    out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"3\" fill=\"{}\"/>"
                       "<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n",
                       left + w + 10, ly - 4, colour, left + w + 26, ly, escape(s.label));
  }
  out += "</svg>\n";
  return out;
}

PlotSeries histogram_polygon(const std::vector<double>& values, int bins, std::string label) {
  PlotSeries s;
  s.label = std::move(label);
  if (values.empty() || bins < 1) return s;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
    counts[std::min(b, counts.size() - 1)] += 1.0;
  }
  const double n = static_cast<double>(values.size());
  s.x.push_back(lo - width / 2);
  s.y.push_back(0.0);
  for (int b = 0; b < bins; ++b) {
    s.x.push_back(lo + (b + 0.5) * width);
    s.y.push_back(counts[static_cast<std::size_t>(b)] / (n * width));
  }
  s.x.push_back(hi + width / 2);
  s.y.push_back(0.0);
  return s;
}

}  // namespace segkit
