#include "pcflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace pcflow::svg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 360.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 50.0;

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (lo > hi) lo = 0.0, hi = 1.0;
    if (lo == hi) {
      const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

Plot::Plot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void Plot::add_polyline(std::vector<Point> points, std::string colour) {
  series_.push_back({std::move(points), std::move(colour), true});
}

void Plot::add_scatter(std::vector<Point> points, std::string colour) {
  series_.push_back({std::move(points), std::move(colour), false});
}

void Plot::add_horizontal(double y, std::string colour, std::string label) {
  rules_.push_back({y, std::move(colour), std::move(label)});
}

std::string Plot::render() const {
  Range xr, yr;
  for (const auto& s : series_)
    for (const auto& p : s.points) {
      xr.add(p.x);
      yr.add(p.y);
    }
  for (const auto& r : rules_) yr.add(r.y);
  xr.finish();
  yr.finish();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      kWidth, kHeight, kWidth, kHeight);
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += fmt::format("<text x=\"{:.1f}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                     kWidth / 2, escape(title_));
  out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"black\"/>\n",
                     kLeft, kTop, pw, ph);
  out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                     kLeft + pw / 2, kHeight - 12, escape(x_label_));
  out += fmt::format(
      "<text x=\"16\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 16 {:.1f})\">{}</text>\n",
      kTop + ph / 2, kTop + ph / 2, escape(y_label_));
  for (int i = 0; i <= 4; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{:.4g}</text>\n",
                       sx(fx), kTop + ph + 16, fx);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{:.4g}</text>\n",
                       kLeft - 4, sy(fy) + 3, fy);
  }
  for (const auto& r : rules_) {
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-dasharray=\"4 3\"/>\n",
                       kLeft, sy(r.y), kLeft + pw, sy(r.y), r.colour);
    if (!r.label.empty())
      out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
                         kLeft + pw - 4, sy(r.y) - 3, escape(r.label));
  }
  for (const auto& s : series_) {
    if (s.line) {
      std::string pts;
      for (const auto& p : s.points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
        if (!pts.empty()) pts += ' ';
        pts += fmt::format("{:.2f},{:.2f}", sx(p.x), sy(p.y));
      }
      out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", pts, s.colour);
    } else {
      for (const auto& p : s.points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", sx(p.x), sy(p.y), s.colour);
      }
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace pcflow::svg
