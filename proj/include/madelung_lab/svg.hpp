#ifndef MADELUNG_LAB_SVG_HPP
#define MADELUNG_LAB_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

// Minimal static SVG line charts.

namespace madelung_lab::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_x = false;
  bool log_y = false;
  int width = 720;
  int height = 440;
};

namespace detail {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
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

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline const char* colour(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};
  return palette[i % 7];
}

}  // namespace detail

inline std::string render(const LinePlot& plot) {
  const double left = 70, right = 170, top = 40, bottom = 50;
  const double w = plot.width - left - right, h = plot.height - top - bottom;
  auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!plot.log_x || x > 0) && (!plot.log_y || y > 0);
  };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * w; };
  auto py = [&](double v) { return top + (1.0 - (ty(v) - y0) / (y1 - y0)) * h; };

  using detail::num;
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(plot.width) + "\" height=\"" +
         std::to_string(plot.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(left + w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         detail::escape(plot.title) + "</text>\n";
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = left + w * k / 4.0, sy = top + h * (1.0 - k / 4.0);
    const double vx = plot.log_x ? std::pow(10.0, fx) : fx, vy = plot.log_y ? std::pow(10.0, fy) : fy;
    out += "<line x1=\"" + num(sx) + "\" y1=\"" + num(top) + "\" x2=\"" + num(sx) + "\" y2=\"" + num(top + h) +
           "\" stroke=\"#ddd\"/>\n";
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(sy) + "\" x2=\"" + num(left + w) + "\" y2=\"" + num(sy) +
           "\" stroke=\"#ddd\"/>\n";
    out += "<text x=\"" + num(sx) + "\" y=\"" + num(top + h + 16) + "\" text-anchor=\"middle\">" + detail::tick(vx) +
           "</text>\n";
    out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(sy + 4) + "\" text-anchor=\"end\">" + detail::tick(vy) +
           "</text>\n";
  }
  if (!plot.log_y && y0 < 0 && y1 > 0)
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(0.0)) + "\" x2=\"" + num(left + w) + "\" y2=\"" +
           num(py(0.0)) + "\" stroke=\"#888\"/>\n";
  out += "<text x=\"" + num(left + w / 2) + "\" y=\"" + num(plot.height - 12.0) + "\" text-anchor=\"middle\">" +
         detail::escape(plot.x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + num(top + h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(top + h / 2) + ")\">" + detail::escape(plot.y_label) + "</text>\n";

  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const auto& ser = plot.series[s];
    std::string pts;
    for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
      if (!usable(ser.x[i], ser.y[i])) continue;
      pts += num(px(ser.x[i])) + "," + num(py(ser.y[i])) + " ";
      if (ser.markers)
        out += "<circle cx=\"" + num(px(ser.x[i])) + "\" cy=\"" + num(py(ser.y[i])) + "\" r=\"3\" fill=\"" +
               detail::colour(s) + "\"/>\n";
    }
    out += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(detail::colour(s)) +
           "\" points=\"" + pts + "\"/>\n";
    const double ly = top + 14.0 + 18.0 * double(s);
    out += "<line x1=\"" + num(left + w + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(left + w + 32) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + detail::colour(s) + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(left + w + 38) + "\" y=\"" + num(ly) + "\">" + detail::escape(ser.name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace madelung_lab::svg

#endif  // MADELUNG_LAB_SVG_HPP
