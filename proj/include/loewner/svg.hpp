#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace loewner {

// Minimal deterministic SVG output. Plotting is cosmetic and never gates
// experiment exit codes.
namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Box {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  void grow(double x, double y) {
    xmin = std::min(xmin, x); xmax = std::max(xmax, x);
    ymin = std::min(ymin, y); ymax = std::max(ymax, y);
  }
};

inline std::string polyline_plot(const std::vector<std::vector<std::complex<double>>>& curves,
                                 const std::string& title, int w = 640, int h = 480) {
  Box box;
  for (const auto& c : curves)
    for (const auto& z : c) box.grow(z.real(), z.imag());
  const double dx = box.xmax - box.xmin + 1e-12, dy = box.ymax - box.ymin + 1e-12;
  const double pad = 32;
  auto px = [&](double x) { return pad + (x - box.xmin) / dx * (w - 2 * pad); };
  auto py = [&](double y) { return h - pad - (y - box.ymin) / dy * (h - 2 * pad); };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
                  "\" height=\"" + std::to_string(h) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"10\" y=\"18\" font-size=\"13\">" + title + "</text>\n";
  const char* colors[] = {"#225588", "#cc5522", "#228855", "#882255", "#555555"};
  int ci = 0;
  for (const auto& c : curves) {
    s += "<polyline fill=\"none\" stroke=\"" + std::string(colors[ci++ % 5]) +
         "\" stroke-width=\"1\" points=\"";
    for (const auto& z : c) s += num(px(z.real())) + "," + num(py(z.imag())) + " ";
    s += "\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

inline std::string histogram(const std::vector<double>& values, int bins,
                             const std::string& title, int w = 640, int h = 480) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
                  "\" height=\"" + std::to_string(h) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"10\" y=\"18\" font-size=\"13\">" + title + "</text>\n";
  if (!values.empty() && bins > 0) {
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (hi <= lo) hi = lo + 1.0;
    std::vector<int> count(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
      int b = static_cast<int>((v - lo) / (hi - lo) * bins);
      b = std::clamp(b, 0, bins - 1);
      ++count[static_cast<std::size_t>(b)];
    }
    const int peak = std::max(1, *std::max_element(count.begin(), count.end()));
    const double pad = 32, bw = (w - 2 * pad) / bins;
    for (int b = 0; b < bins; ++b) {
      const double bh = (h - 2 * pad) * count[static_cast<std::size_t>(b)] / peak;
      s += "<rect x=\"" + num(pad + b * bw) + "\" y=\"" + num(h - pad - bh) + "\" width=\"" +
           num(bw * 0.9) + "\" height=\"" + num(bh) + "\" fill=\"#225588\"/>\n";
    }
    s += "<text x=\"" + num(pad) + "\" y=\"" + num(h - 10.0) + "\" font-size=\"11\">" +
         num(lo) + "</text>\n";
    s += "<text x=\"" + num(w - pad - 40) + "\" y=\"" + num(h - 10.0) + "\" font-size=\"11\">" +
         num(hi) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

// Convergence ladder: one polyline of value against level index.
inline std::string ladder(const std::vector<double>& levels, const std::string& title,
                          int w = 640, int h = 480) {
  std::vector<std::vector<std::complex<double>>> curves(1);
  for (std::size_t i = 0; i < levels.size(); ++i)
    curves[0].push_back({static_cast<double>(i), levels[i]});
  return polyline_plot(curves, title, w, h);
}

}  // namespace svg
}  // namespace loewner
