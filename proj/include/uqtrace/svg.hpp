// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace uqtrace::svg {

struct LineSeries {
  std::string name;
  std::string color;  // e.g. "#1f77b4"
  std::vector<double> x;
  std::vector<double> y;
};

// Deterministic line chart: fixed canvas, fixed-precision coordinates,
// no timestamps or generator metadata.
std::string line_chart(const std::string& title,
                       const std::vector<LineSeries>& series,
                       const std::string& x_label = "",
                       const std::string& y_label = "");

// Blue-white-red heatmap over [-limit, limit]; one rect per cell plus
// row/column labels.
std::string heatmap(const std::string& title,
                    const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels,
                    const std::vector<std::vector<double>>& values,
                    double limit = 1.0);

void write_file(const std::string& path, const std::string& content);

}  // namespace uqtrace::svg
