#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ptdt/eval/experiment.hpp"

namespace ptdt::eval {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, const std::vector<std::string>& x_ticks = {});

// values[row][col]; cells are shaded between the grid min and max.
std::string svg_heatmap(const std::string& title, const std::vector<std::string>& rows,
                        const std::vector<std::string>& cols, const std::vector<std::vector<double>>& values);

// Mean normalized score per method over seeds, one figure per
// (experiment, task[, method]). Returns (file stem, svg) pairs.
std::vector<std::pair<std::string, std::string>> plot_results(const std::vector<ResultRow>& rows);

}  // namespace ptdt::eval
