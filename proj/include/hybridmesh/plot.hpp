#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "hybridmesh/error.hpp"

namespace hybridmesh {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Histogram {
  std::vector<double> edges;        // bins + 1 ascending edges
  std::vector<std::int64_t> counts;  // one per bin
};

// Fixed-width bins over [lo, hi]; out-of-range values land in the end bins so
// the counts always sum to values.size().
inline Histogram histogram(const std::vector<double>& values, int bins, double lo, double hi) {
  check(bins >= 1, "histogram needs at least one bin");
  check(hi > lo, "histogram range must be nonempty");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i)
    h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

namespace detail {

inline std::string svg_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

// Round tick step to a 1/2/5 decade multiple covering the range.
inline double tick_step(double range, int target_ticks) {
  const double raw = range / std::max(target_ticks, 1);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

inline const char* plot_color(std::size_t i) {
  static const char* colors[] = {"#2563eb", "#dc2626", "#16a34a", "#d97706", "#9333ea"};
  return colors[i % 5];
}

struct Frame {
  double width = 640, height = 400;
  double left = 62, right = 18, top = 34, bottom = 46;
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;

  double px(double x) const {
    return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right);
  }
  double py(double y) const {
    return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom);
  }
};

inline void frame_header(std::string& svg, const Frame& f, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel) {
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(f.width) +
         "\" height=\"" + svg_num(f.height) + "\" viewBox=\"0 0 " + svg_num(f.width) + " " +
         svg_num(f.height) + "\" font-family=\"sans-serif\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + svg_num(f.width / 2) + "\" y=\"20\" font-size=\"14\" "
         "text-anchor=\"middle\">" + xml_escape(title) + "</text>\n";
  svg += "<text x=\"" + svg_num(f.width / 2) + "\" y=\"" + svg_num(f.height - 8) +
         "\" font-size=\"12\" text-anchor=\"middle\">" + xml_escape(xlabel) + "</text>\n";
  svg += "<text x=\"14\" y=\"" + svg_num(f.height / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         svg_num(f.height / 2) + ")\">" + xml_escape(ylabel) + "</text>\n";

  const double x0 = f.left, x1 = f.width - f.right;
  const double y0 = f.height - f.bottom, y1 = f.top;
  svg += "<line x1=\"" + svg_num(x0) + "\" y1=\"" + svg_num(y0) + "\" x2=\"" + svg_num(x1) +
         "\" y2=\"" + svg_num(y0) + "\" stroke=\"#333\"/>\n";
  svg += "<line x1=\"" + svg_num(x0) + "\" y1=\"" + svg_num(y0) + "\" x2=\"" + svg_num(x0) +
         "\" y2=\"" + svg_num(y1) + "\" stroke=\"#333\"/>\n";

  const double sx = tick_step(f.x_hi - f.x_lo, 6);
  for (double t = std::ceil(f.x_lo / sx) * sx; t <= f.x_hi + 1e-12 * sx; t += sx) {
    svg += "<line x1=\"" + svg_num(f.px(t)) + "\" y1=\"" + svg_num(y0) + "\" x2=\"" +
           svg_num(f.px(t)) + "\" y2=\"" + svg_num(y0 + 4) + "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + svg_num(f.px(t)) + "\" y=\"" + svg_num(y0 + 16) +
           "\" font-size=\"10\" text-anchor=\"middle\">" + svg_num(t) + "</text>\n";
  }
  const double sy = tick_step(f.y_hi - f.y_lo, 5);
  for (double t = std::ceil(f.y_lo / sy) * sy; t <= f.y_hi + 1e-12 * sy; t += sy) {
    svg += "<line x1=\"" + svg_num(x0 - 4) + "\" y1=\"" + svg_num(f.py(t)) + "\" x2=\"" +
           svg_num(x0) + "\" y2=\"" + svg_num(f.py(t)) + "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + svg_num(x0 - 7) + "\" y=\"" + svg_num(f.py(t) + 3) +
           "\" font-size=\"10\" text-anchor=\"end\">" + svg_num(t) + "</text>\n";
  }
}

}  // namespace detail

inline std::string svg_line_chart(const std::vector<Series>& series, const std::string& title,
                                  const std::string& xlabel, const std::string& ylabel) {
  check(!series.empty(), "svg_line_chart needs at least one series");
  detail::Frame f;
  f.x_lo = f.y_lo = std::numeric_limits<double>::infinity();
  f.x_hi = f.y_hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    check(s.x.size() == s.y.size() && !s.x.empty(), "series needs matching nonempty x/y");
    for (double v : s.x) {
      f.x_lo = std::min(f.x_lo, v);
      f.x_hi = std::max(f.x_hi, v);
    }
    for (double v : s.y) {
      check(std::isfinite(v), "series values must be finite");
      f.y_lo = std::min(f.y_lo, v);
      f.y_hi = std::max(f.y_hi, v);
    }
  }
  if (f.x_hi == f.x_lo) f.x_hi = f.x_lo + 1;
  if (f.y_hi == f.y_lo) f.y_hi = f.y_lo + 1;
  const double pad = 0.05 * (f.y_hi - f.y_lo);
  f.y_lo -= pad;
  f.y_hi += pad;

  std::string svg;
  detail::frame_header(svg, f, title, xlabel, ylabel);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    std::string pts;
    for (std::size_t k = 0; k < s.x.size(); ++k)
      pts += detail::svg_num(f.px(s.x[k])) + "," + detail::svg_num(f.py(s.y[k])) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(detail::plot_color(i)) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = f.top + 14 * static_cast<double>(i + 1);
    const double lx = f.width - f.right - 150;
    svg += "<line x1=\"" + detail::svg_num(lx) + "\" y1=\"" + detail::svg_num(ly - 4) +
           "\" x2=\"" + detail::svg_num(lx + 18) + "\" y2=\"" + detail::svg_num(ly - 4) +
           "\" stroke=\"" + detail::plot_color(i) + "\" stroke-width=\"1.5\"/>\n";
    svg += "<text x=\"" + detail::svg_num(lx + 23) + "\" y=\"" + detail::svg_num(ly) +
           "\" font-size=\"11\">" + detail::xml_escape(s.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

struct LabeledHistogram {
  std::string label;
  Histogram hist;
};

inline std::string svg_histogram(const std::vector<LabeledHistogram>& hists,
                                 const std::string& title, const std::string& xlabel) {
  check(!hists.empty(), "svg_histogram needs at least one histogram");
  detail::Frame f;
  f.x_lo = hists[0].hist.edges.front();
  f.x_hi = hists[0].hist.edges.back();
  f.y_lo = 0;
  f.y_hi = 1;
  for (const auto& h : hists) {
    check(h.hist.edges.size() == h.hist.counts.size() + 1, "malformed histogram");
    for (auto c : h.hist.counts) f.y_hi = std::max(f.y_hi, static_cast<double>(c));
    f.x_lo = std::min(f.x_lo, h.hist.edges.front());
    f.x_hi = std::max(f.x_hi, h.hist.edges.back());
  }
  f.y_hi *= 1.05;

  std::string svg;
  detail::frame_header(svg, f, title, xlabel, "count");
  for (std::size_t i = 0; i < hists.size(); ++i) {
    const auto& h = hists[i].hist;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      const double x0 = f.px(h.edges[b]);
      const double x1 = f.px(h.edges[b + 1]);
      const double y = f.py(static_cast<double>(h.counts[b]));
      const double y0 = f.py(0.0);
      svg += "<rect x=\"" + detail::svg_num(x0) + "\" y=\"" + detail::svg_num(y) +
             "\" width=\"" + detail::svg_num(x1 - x0) + "\" height=\"" +
             detail::svg_num(y0 - y) + "\" fill=\"" + detail::plot_color(i) +
             "\" fill-opacity=\"0.45\" stroke=\"" + detail::plot_color(i) + "\"/>\n";
    }
    const double ly = f.top + 14 * static_cast<double>(i + 1);
    const double lx = f.width - f.right - 150;
    svg += "<rect x=\"" + detail::svg_num(lx) + "\" y=\"" + detail::svg_num(ly - 10) +
           "\" width=\"12\" height=\"9\" fill=\"" + detail::plot_color(i) +
           "\" fill-opacity=\"0.45\" stroke=\"" + detail::plot_color(i) + "\"/>\n";
    svg += "<text x=\"" + detail::svg_num(lx + 17) + "\" y=\"" + detail::svg_num(ly) +
           "\" font-size=\"11\">" + detail::xml_escape(hists[i].label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot open file for writing: " + path);
  os << content;
  check(static_cast<bool>(os), "write failed for: " + path);
}

}  // namespace hybridmesh
