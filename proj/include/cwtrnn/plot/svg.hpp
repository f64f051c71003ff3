// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cwtrnn::plot {

struct Bar {
  std::string label;
  double value = 0.0;
  double error = 0.0;  // drawn as a +-error whisker when > 0
};

enum class AxisScale { kAuto, kLinear, kLog };

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<Bar> bars;
  // kAuto picks log when the positive values span more than 10x.
  AxisScale scale = AxisScale::kAuto;
};

// Resolved scale for a chart: kLinear or kLog.
AxisScale resolve_scale(const BarChart& chart);
// Tick values for the resolved scale (decades for log).
std::vector<double> axis_ticks(const BarChart& chart);
std::string bar_chart_svg(const BarChart& chart);

/// Row-major rows x cols grid drawn with a perceptual colour ramp; row 0 is
/// drawn at the bottom.
struct Heatmap {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
};

std::string heatmap_svg(const Heatmap& map);

struct Series {
  std::string name;
  std::vector<double> y;  // x is the index
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

std::string line_chart_svg(const LineChart& chart);

}  // namespace cwtrnn::plot
