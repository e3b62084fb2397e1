#include "rlf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace rlf {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double map(double v) const { return log ? std::log10(v) : v; }
  void fit(const std::vector<double>& values) {
    double a = HUGE_VAL, b = -HUGE_VAL;
    for (const double v : values) {
      if (!usable(v)) continue;
      a = std::min(a, map(v));
      b = std::max(b, map(v));
    }
    if (!(a <= b)) a = 0.0, b = 1.0;
    if (b - a < 1e-300) {
      const double pad = a == 0.0 ? 1.0 : 0.05 * std::abs(a);
      a -= pad;
      b += pad;
    }
    lo = a;
    hi = b;
  }
  double frac(double v) const { return (map(v) - lo) / (hi - lo); }
  double label(double m) const { return log ? std::pow(10.0, m) : m; }
};

}  // namespace

void write_line_chart(std::ostream& out, const std::vector<Series>& series, const ChartOptions& options) {
  Axis ax{options.log_x}, ay{options.log_y};
  std::vector<double> xs, ys;
  for (const auto& s : series)
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k)
      if (ax.usable(s.x[k]) && ay.usable(s.y[k])) {
        xs.push_back(s.x[k]);
        ys.push_back(s.y[k]);
      }
  ax.fit(xs);
  ay.fit(ys);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + ax.frac(x) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - ay.frac(y)) * ph; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"14\">" << escape(options.title) << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double f = k / 4.0;
    const double gx = kLeft + f * pw, gy = kTop + (1.0 - f) * ph;
    out << "<line x1=\"" << coord(gx) << "\" y1=\"" << kTop << "\" x2=\"" << coord(gx) << "\" y2=\"" << kTop + ph
        << "\" stroke=\"#ddd\"/>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << coord(gy) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << coord(gy)
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << coord(gx) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
        << num(ax.label(ax.lo + f * (ax.hi - ax.lo))) << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << coord(gy + 4) << "\" text-anchor=\"end\">"
        << num(ay.label(ay.lo + f * (ay.hi - ay.lo))) << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\">"
      << escape(options.x_label) << (options.log_x ? " (log)" : "") << "</text>\n";
  out << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(options.y_label) << (options.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    std::string pts;
    for (std::size_t k = 0; k < std::min(series[s].x.size(), series[s].y.size()); ++k) {
      const double x = series[s].x[k], y = series[s].y[k];
      if (!ax.usable(x) || !ay.usable(y)) continue;
      pts += coord(px(x)) + "," + coord(py(y)) + " ";
      out << "<circle cx=\"" << coord(px(x)) << "\" cy=\"" << coord(py(y)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    if (!pts.empty()) pts.pop_back();
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts << "\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(s);
    out << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + pw + 32 << "\" y2=\""
        << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly << "\">" << escape(series[s].label) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace rlf
