#pragma once

// Minimal SVG rendering of a control chart.

#include <iosfwd>
#include <optional>
#include <string>

#include "fdamon/mewma.hpp"

namespace fdamon {

struct SvgChartOptions {
  std::string title;
  double threshold = 0.0;
  std::optional<double> divider;  // x position of the Phase-I / Phase-II boundary
  int width = 900;
  int height = 420;
  bool log_y = true;
};

/// T^2 against day index with the threshold as a horizontal line and an
/// optional dashed vertical divider. Alarm days are marked.
void write_chart_svg(std::ostream& out, const ChartRecord& record, const SvgChartOptions& options);

}  // namespace fdamon
