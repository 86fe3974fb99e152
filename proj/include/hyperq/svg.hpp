#pragma once

#include <string>
#include <vector>

namespace hyperq::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
};

/// Static line chart with a legend; output depends only on the arguments.
std::string line_chart(const Axes& axes, const std::vector<Series>& series);

struct Bar {
  std::string group;  // bars sharing a group are drawn side by side
  std::string label;
  double value = 0.0;
  double error = 0.0;  // half-height of the error whisker
};

std::string bar_chart(const Axes& axes, const std::vector<Bar>& bars);

}  // namespace hyperq::svg
