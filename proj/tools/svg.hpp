#pragma once

// Minimal deterministic SVG scatter/line plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "dtheory/errors.hpp"

namespace dtheory::cli {

class Plot {
 public:
  Plot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void points(std::string name, std::vector<double> x, std::vector<double> y, std::vector<double> err = {}) {
    series_.push_back({std::move(name), std::move(x), std::move(y), std::move(err), false, false});
  }
  void curve(std::string name, std::vector<double> x, std::vector<double> y, bool dashed = false) {
    series_.push_back({std::move(name), std::move(x), std::move(y), {}, true, dashed});
  }
  void note(std::string text) { notes_.push_back(std::move(text)); }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write '" + path + "'");
    out << render();
  }

  std::string render() const {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series_)
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
        const double e = k < s.err.size() && std::isfinite(s.err[k]) ? s.err[k] : 0.0;
        x0 = std::min(x0, s.x[k]);
        x1 = std::max(x1, s.x[k]);
        y0 = std::min(y0, s.y[k] - e);
        y1 = std::max(y1, s.y[k] + e);
      }
    if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.05 * (x1 - x0), pady = 0.08 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;

    const double w = 640, h = 440, l = 70, r = 170, t = 40, b = 60 + 16.0 * notes_.size();
    auto px = [&](double x) { return l + (x - x0) / (x1 - x0) * (w - l - r); };
    auto py = [&](double y) { return h - b - (y - y0) / (y1 - y0) * (h - t - b); };
    std::string svg;
    char buf[512];
    auto add = [&](const char* fmt, auto... args) {
      std::snprintf(buf, sizeof buf, fmt, args...);
      svg += buf;
    };
    add("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n",
        w, h);
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    add("<text x=\"%.1f\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">%s</text>\n", (l + w - r) / 2,
        escape(title_).c_str());
    add("<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n", l, t,
        w - l - r, h - t - b);
    for (int k = 0; k <= 5; ++k) {
      const double xv = x0 + (x1 - x0) * k / 5, yv = y0 + (y1 - y0) * k / 5;
      add("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.3g</text>\n", px(xv), h - b + 16, xv);
      add("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n", l - 6, py(yv) + 4, yv);
    }
    add("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n", (l + w - r) / 2, h - b + 36,
        escape(xlabel_).c_str());
    add("<text x=\"16\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 16 %.1f)\">%s</text>\n",
        (t + h - b) / 2, (t + h - b) / 2, escape(ylabel_).c_str());
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    int ci = 0;
    for (std::size_t si = 0; si < series_.size(); ++si) {
      const auto& s = series_[si];
      const char* c = s.line ? "black" : colors[ci++ % 7];
      if (s.line) {
        std::string pts;
        for (std::size_t k = 0; k < s.x.size(); ++k) {
          if (!std::isfinite(s.y[k])) continue;
          std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[k]), py(s.y[k]));
          pts += buf;
        }
        add("<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\"%s points=\"", c,
            s.dashed ? " stroke-dasharray=\"6 4\"" : "");
        svg += pts + "\"/>\n";
      } else {
        for (std::size_t k = 0; k < s.x.size(); ++k) {
          if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
          if (k < s.err.size() && std::isfinite(s.err[k]) && s.err[k] > 0)
            add("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\"/>\n", px(s.x[k]),
                py(s.y[k] - s.err[k]), px(s.x[k]), py(s.y[k] + s.err[k]), c);
          add("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3.5\" fill=\"%s\"/>\n", px(s.x[k]), py(s.y[k]), c);
        }
      }
      const double ly = t + 14 + 18.0 * si;
      if (s.line)
        add("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\"%s/>\n", w - r + 10, ly - 4,
            w - r + 30, ly - 4, c, s.dashed ? " stroke-dasharray=\"6 4\"" : "");
      else
        add("<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3.5\" fill=\"%s\"/>\n", w - r + 20, ly - 4, c);
      add("<text x=\"%.1f\" y=\"%.1f\">%s</text>\n", w - r + 36, ly, escape(s.name).c_str());
    }
    for (std::size_t k = 0; k < notes_.size(); ++k)
      add("<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\">%s</text>\n", l, h - b + 56 + 16.0 * k,
          escape(notes_[k]).c_str());
    svg += "</svg>\n";
    return svg;
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y, err;
    bool line = false;
    bool dashed = false;
  };

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else if (c == '&') out += "&amp;";
      else out += c;
    }
    return out;
  }

  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
  std::vector<std::string> notes_;
};

}  // namespace dtheory::cli
