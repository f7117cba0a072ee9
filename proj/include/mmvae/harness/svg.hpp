#pragma once

// Minimal SVG line charts: one polyline per series with an optional min/max
// band.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace mmvae {

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional band, same length as y
  std::vector<double> hi;
};

struct LineChart {
  std::string title;
  std::string x_label = "epoch";
  std::string y_label;
  bool log_y = false;
  std::vector<ChartSeries> series;
};

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                           "#9467bd", "#ff7f0e", "#8c564b",
                                           "#e377c2", "#7f7f7f"};

}  // namespace svg_detail

inline std::string render_svg(const LineChart& chart) {
  using namespace svg_detail;
  const double W = 720, H = 420, left = 70, right = 170, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;

  auto ty = [&](double v) {
    return chart.log_y ? std::log10(std::max(v, 1e-300)) : v;
  };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      const double lo = s.lo.empty() ? s.y[i] : s.lo[i];
      const double hi = s.hi.empty() ? s.y[i] : s.hi[i];
      if (std::isfinite(ty(lo))) ymin = std::min(ymin, ty(lo));
      if (std::isfinite(ty(hi))) ymax = std::max(ymax, ty(hi));
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (1.0 - (ty(y) - ymin) / (ymax - ymin)) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) +
         "\" height=\"" + num(H) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(chart.title) + "</text>\n";
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) +
         "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xmin + (xmax - xmin) * k / 4.0;
    const double fy = ymin + (ymax - ymin) * k / 4.0;
    const double sx = px(fx), sy = top + (1.0 - k / 4.0) * ph;
    out += "<line x1=\"" + num(sx) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(sx) +
           "\" y2=\"" + num(top + ph + 5) + "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + num(sx) + "\" y=\"" + num(top + ph + 18) +
           "\" text-anchor=\"middle\">" + tick(fx) + "</text>\n";
    out += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(sy) + "\" x2=\"" +
           num(left) + "\" y2=\"" + num(sy) + "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + num(left - 8) + "\" y=\"" + num(sy + 4) +
           "\" text-anchor=\"end\">" + tick(chart.log_y ? std::pow(10.0, fy) : fy) +
           "</text>\n";
  }
  out += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(H - 10) +
         "\" text-anchor=\"middle\">" + escape(chart.x_label) + "</text>\n";
  out += "<text transform=\"translate(16," + num(top + ph / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + escape(chart.y_label) +
         (chart.log_y ? " (log)" : "") + "</text>\n";

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const auto& s = chart.series[si];
    const std::string colour = kPalette[si % std::size(kPalette)];
    if (!s.lo.empty() && !s.hi.empty() && !s.x.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        pts += num(px(s.x[i])) + "," + num(py(s.hi[i])) + " ";
      for (std::size_t i = s.x.size(); i-- > 0;)
        pts += num(px(s.x[i])) + "," + num(py(s.lo[i])) + " ";
      out += "<polygon points=\"" + pts + "\" fill=\"" + colour +
             "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + colour +
           "\" stroke-width=\"1.5\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(si);
    out += "<line x1=\"" + num(left + pw + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
           num(left + pw + 32) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + colour +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(left + pw + 38) + "\" y=\"" + num(ly) + "\">" +
           escape(s.label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace mmvae
