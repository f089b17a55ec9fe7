#pragma once

#include <string>
#include <vector>

namespace masslab {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers = true;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

/// Static line plot; non-finite points (and non-positive ones on log axes) are skipped and
/// break the polyline. Output is a deterministic function of the input.
std::string line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace masslab
