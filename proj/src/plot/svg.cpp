// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/plot/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cwtrnn/core/error.hpp"

namespace cwtrnn::plot {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 80, kRight = 20, kTop = 40, kBottom = 90;

std::string escape(const std::string& s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n";
}

// Viridis-like ramp through five anchors.
std::string colour(double u) {
  static constexpr std::array<std::array<double, 3>, 5> anchors = {
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  u = std::clamp(u, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(u));
  const double f = u - static_cast<double>(i);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(anchors[i][0] + f * (anchors[i + 1][0] - anchors[i][0])),
                static_cast<int>(anchors[i][1] + f * (anchors[i + 1][1] - anchors[i][1])),
                static_cast<int>(anchors[i][2] + f * (anchors[i + 1][2] - anchors[i][2])));
  return buf;
}

}  // namespace

AxisScale resolve_scale(const BarChart& c) {
  if (c.scale != AxisScale::kAuto) return c.scale;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& b : c.bars) {
    if (b.value > 0.0) {
      lo = std::min(lo, b.value);
      hi = std::max(hi, b.value);
    }
  }
  return hi > 0.0 && hi / lo > 10.0 ? AxisScale::kLog : AxisScale::kLinear;
}

namespace {

struct Axis {
  AxisScale scale;
  double lo, hi;
  double map(double v) const {  // 0 at lo, 1 at hi
    if (scale == AxisScale::kLog) return (std::log10(std::max(v, lo)) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
    return (v - lo) / (hi - lo);
  }
};

Axis bar_axis(const BarChart& c) {
  const AxisScale s = resolve_scale(c);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& b : c.bars) {
    hi = std::max(hi, b.value + b.error);
    if (b.value > 0.0) lo = std::min(lo, std::max(b.value - b.error, b.value * 0.5));
  }
  if (!(hi > 0.0)) hi = 1.0;
  if (s == AxisScale::kLog) {
    if (!std::isfinite(lo)) lo = hi / 10.0;
    return {s, std::pow(10.0, std::floor(std::log10(lo))), std::pow(10.0, std::ceil(std::log10(hi)))};
  }
  return {s, 0.0, hi * 1.1};
}

}  // namespace

std::vector<double> axis_ticks(const BarChart& c) {
  const Axis a = bar_axis(c);
  std::vector<double> ticks;
  if (a.scale == AxisScale::kLog) {
    for (double v = a.lo; v <= a.hi * 1.0001; v *= 10.0) ticks.push_back(v);
  } else {
    const double raw = a.hi / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double step = raw / mag < 2 ? 2 * mag : raw / mag < 5 ? 5 * mag : 10 * mag;
    for (double v = 0.0; v <= a.hi; v += step) ticks.push_back(v);
  }
  return ticks;
}

std::string bar_chart_svg(const BarChart& c) {
  if (c.bars.empty()) throw InvalidArgument("bar chart needs at least one bar");
  const Axis a = bar_axis(c);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto y = [&](double v) { return kTop + ph * (1.0 - a.map(v)); };
  std::ostringstream os;
  header(os, c.title);
  os << "<g class=\"axis\" data-scale=\"" << (a.scale == AxisScale::kLog ? "log" : "linear") << "\">\n";
  for (double t : axis_ticks(c)) {
    os << "<line x1=\"" << kLeft << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << y(t) << "\" y2=\"" << y(t)
       << "\" stroke=\"#ddd\"/>\n<text class=\"tick\" x=\"" << kLeft - 6 << "\" y=\"" << y(t) + 4
       << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  os << "</g>\n<text x=\"18\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 18 " << kTop + ph / 2
     << ")\" text-anchor=\"middle\">" << escape(c.y_label) << (a.scale == AxisScale::kLog ? " (log scale)" : "")
     << "</text>\n";
  const double slot = pw / static_cast<double>(c.bars.size());
  for (std::size_t i = 0; i < c.bars.size(); ++i) {
    const auto& b = c.bars[i];
    const double x0 = kLeft + slot * static_cast<double>(i) + slot * 0.15, w = slot * 0.7;
    const double top = y(b.value), base = kTop + ph;
    os << "<rect x=\"" << x0 << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << std::max(0.0, base - top)
       << "\" fill=\"" << colour(0.2 + 0.6 * static_cast<double>(i % 4) / 3.0) << "\"><title>" << escape(b.label) << ": "
       << num(b.value) << "</title></rect>\n";
    if (b.error > 0.0) {
      const double cx = x0 + w / 2;
      os << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << y(b.value + b.error) << "\" y2=\""
         << y(std::max(b.value - b.error, a.lo)) << "\" stroke=\"black\"/>\n";
    }
    const double lx = x0 + w / 2, ly = base + 10;
    os << "<text x=\"" << lx << "\" y=\"" << ly << "\" text-anchor=\"end\" transform=\"rotate(-45 " << lx << " " << ly
       << ")\">" << escape(b.label) << "</text>\n";
  }
  os << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft << "\" y1=\"" << kTop << "\" y2=\"" << kTop + ph
     << "\" stroke=\"black\"/>\n</svg>\n";
  return os.str();
}

std::string heatmap_svg(const Heatmap& m) {
  if (m.rows == 0 || m.cols == 0 || m.values.size() != m.rows * m.cols) {
    throw InvalidArgument("heatmap values do not match rows x cols");
  }
  const auto [lo_it, hi_it] = std::minmax_element(m.values.begin(), m.values.end());
  const double lo = *lo_it, span = *hi_it > lo ? *hi_it - lo : 1.0;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom + 40;
  const double cw = pw / static_cast<double>(m.cols), rh = ph / static_cast<double>(m.rows);
  std::ostringstream os;
  header(os, m.title);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) {
      os << "<rect x=\"" << kLeft + cw * static_cast<double>(c) << "\" y=\""
         << kTop + ph - rh * static_cast<double>(r + 1) << "\" width=\"" << cw + 0.3 << "\" height=\"" << rh + 0.3
         << "\" fill=\"" << colour((m.values[r * m.cols + c] - lo) / span) << "\"/>\n";
    }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kTop + ph + 24 << "\" text-anchor=\"middle\">"
     << escape(m.x_label) << "</text>\n<text x=\"18\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 18 "
     << kTop + ph / 2 << ")\" text-anchor=\"middle\">" << escape(m.y_label) << "</text>\n</svg>\n";
  return os.str();
}

std::string line_chart_svg(const LineChart& c) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& s : c.series) {
    n = std::max(n, s.y.size());
    for (double v : s.y) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (n == 0 || !std::isfinite(lo)) throw InvalidArgument("line chart needs at least one finite point");
  if (hi == lo) hi = lo + 1.0;
  const double pw = kWidth - kLeft - kRight - 100, ph = kHeight - kTop - kBottom + 40;
  auto px = [&](std::size_t i) { return kLeft + (n > 1 ? pw * static_cast<double>(i) / static_cast<double>(n - 1) : pw / 2); };
  auto py = [&](double v) { return kTop + ph * (1.0 - (v - lo) / (hi - lo)); };
  std::ostringstream os;
  header(os, c.title);
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    os << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(v) << "\" y2=\"" << py(v)
       << "\" stroke=\"#ddd\"/>\n<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
       << num(v) << "</text>\n";
  }
  for (std::size_t s = 0; s < c.series.size(); ++s) {
    const std::string col = colour(c.series.size() > 1 ? static_cast<double>(s) / static_cast<double>(c.series.size() - 1) * 0.8 : 0.3);
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.series[s].y.size(); ++i) {
      if (std::isfinite(c.series[s].y[i])) os << px(i) << "," << py(c.series[s].y[i]) << " ";
    }
    os << "\"/>\n<text x=\"" << kLeft + pw + 8 << "\" y=\"" << kTop + 14 * static_cast<double>(s + 1) << "\" fill=\""
       << col << "\">" << escape(c.series[s].name) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kTop + ph + 24 << "\" text-anchor=\"middle\">"
     << escape(c.x_label) << "</text>\n<text x=\"18\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 18 "
     << kTop + ph / 2 << ")\" text-anchor=\"middle\">" << escape(c.y_label) << "</text>\n</svg>\n";
  return os.str();
}

}  // namespace cwtrnn::plot
