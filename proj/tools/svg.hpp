#pragma once

// Minimal static SVG output for overlays and sweep plots.

#include <Eigen/Core>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace svg {

struct Layer {
  std::vector<Eigen::Vector2d> points;
  std::string color;
  std::string label;
  double radius = 1.2;
};

struct Box {
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline void write_or_throw(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out || !(out << text)) throw std::runtime_error("cannot write '" + path.string() + "'");
}

/// Scatter layers in a square panel, y growing downwards as in an image.
inline void scatter(const std::filesystem::path& path, const std::vector<Layer>& layers, const std::string& title) {
  Box b{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest(),
        std::numeric_limits<double>::lowest()};
  for (const auto& l : layers) {
    for (const auto& p : l.points) {
      b.x0 = std::min(b.x0, p.x());
      b.y0 = std::min(b.y0, p.y());
      b.x1 = std::max(b.x1, p.x());
      b.y1 = std::max(b.y1, p.y());
    }
  }
  if (b.x0 > b.x1) b = {};
  const double span = std::max({b.x1 - b.x0, b.y1 - b.y0, 1e-9});
  const double size = 600, margin = 40;
  auto sx = [&](double x) { return margin + (x - b.x0) / span * (size - 2 * margin); };
  auto sy = [&](double y) { return margin + (y - b.y0) / span * (size - 2 * margin); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"640\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" + title + "</text>\n";
  double ly = 620;
  for (const auto& l : layers) {
    s += "<g fill=\"" + l.color + "\" fill-opacity=\"0.6\">\n";
    for (const auto& p : l.points) {
      s += "<circle cx=\"" + num(sx(p.x())) + "\" cy=\"" + num(sy(p.y())) + "\" r=\"" + num(l.radius) + "\"/>\n";
    }
    s += "</g>\n";
    s += "<text x=\"10\" y=\"" + num(ly) + "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" + l.color + "\">" +
         l.label + "</text>\n";
    ly -= 16;
  }
  s += "</svg>\n";
  write_or_throw(path, s);
}

struct Series {
  std::vector<double> y;
  std::string color;
  std::string label;
};

/// Two series over a shared x axis, each scaled to its own y range (left and right axes).
inline void dual_axis(const std::filesystem::path& path, const std::vector<double>& x, const Series& left,
                      const Series& right, const std::string& xlabel) {
  const double w = 640, h = 400, ml = 60, mr = 60, mt = 30, mb = 50;
  auto range = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair{0.0, 1.0};
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    double a = *lo, b = *hi;
    if (b - a < 1e-12) {
      a -= 0.5;
      b += 0.5;
    }
    return std::pair{a, b};
  };
  const auto [x0, x1] = range(x);
  auto px = [&](double v) { return ml + (v - x0) / (x1 - x0) * (w - ml - mr); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(w - ml - mr) + "\" height=\"" +
       num(h - mt - mb) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : x) {
    s += "<text x=\"" + num(px(v)) + "\" y=\"" + num(h - mb + 16) + "\" font-size=\"11\" text-anchor=\"middle\">" +
         num(v) + "</text>\n";
  }
  s += "<text x=\"" + num(w / 2) + "\" y=\"" + num(h - 10) + "\" font-size=\"13\" text-anchor=\"middle\">" + xlabel +
       "</text>\n";

  auto draw = [&](const Series& sr, bool on_left) {
    const auto [y0, y1] = range(sr.y);
    auto py = [&](double v) { return h - mb - (v - y0) / (y1 - y0) * (h - mt - mb); };
    std::string pts;
    for (std::size_t i = 0; i < sr.y.size() && i < x.size(); ++i) pts += num(px(x[i])) + "," + num(py(sr.y[i])) + " ";
    s += "<polyline fill=\"none\" stroke=\"" + sr.color + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    const double ax = on_left ? ml - 6 : w - mr + 6;
    const char* anchor = on_left ? "end" : "start";
    for (double v : {y0, (y0 + y1) / 2, y1}) {
      s += "<text x=\"" + num(ax) + "\" y=\"" + num(py(v) + 4) + "\" font-size=\"11\" text-anchor=\"" + anchor +
           "\" fill=\"" + sr.color + "\">" + num(v) + "</text>\n";
    }
    s += "<text x=\"" + num(on_left ? ml : w - mr) + "\" y=\"20\" font-size=\"12\" text-anchor=\"" +
         (on_left ? std::string("start") : std::string("end")) + "\" fill=\"" + sr.color + "\">" + sr.label +
         "</text>\n";
  };
  draw(left, true);
  draw(right, false);
  s += "</svg>\n";
  write_or_throw(path, s);
}

}  // namespace svg
