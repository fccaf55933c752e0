#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

/// Values laid out row-major as rows x cols; missing cells are drawn grey.
struct HeatmapData {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;  // one per column
  std::vector<std::string> y_ticks;  // one per row, top to bottom
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::optional<double>> values;
  /// Print each cell value inside its rectangle (off for large matrices).
  bool annotate_cells = true;
};

/// Deterministic SVG rendering with a linear blue-to-yellow scale.
std::string render_heatmap_svg(const HeatmapData& data);

void write_heatmap_svg(const HeatmapData& data, const std::filesystem::path& path);

/// Heatmap of a square matrix without per-cell labels.
HeatmapData matrix_heatmap(const Tensor& matrix, std::string title);

}  // namespace snn
