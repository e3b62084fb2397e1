#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rlf {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// Standalone SVG line chart: one polyline with markers per series, linear
/// or log axes, tick labels at the data range ends. Nonpositive values are
/// dropped on log axes and non-finite values always.
void write_line_chart(std::ostream& out, const std::vector<Series>& series, const ChartOptions& options);

}  // namespace rlf
