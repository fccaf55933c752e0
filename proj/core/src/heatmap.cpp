#include "snn/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "snn/csv.hpp"
#include "snn/error.hpp"

namespace snn {
namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Interpolates between a few viridis-like anchors.
std::string color_for(double t) {
  static const double anchors[][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * 4.0;
  const int i = std::min(3, static_cast<int>(pos));
  const double f = pos - i;
  int rgb[3];
  for (int k = 0; k < 3; ++k) {
    rgb[k] = static_cast<int>(std::lround(anchors[i][k] + f * (anchors[i + 1][k] - anchors[i][k])));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

}  // namespace

std::string render_heatmap_svg(const HeatmapData& d) {
  if (d.rows == 0 || d.cols == 0 || d.values.size() != d.rows * d.cols) {
    throw DimensionError("heatmap: " + std::to_string(d.values.size()) + " values for " +
                         std::to_string(d.rows) + "x" + std::to_string(d.cols) + " cells");
  }
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& v : d.values) {
    if (!v || !std::isfinite(*v)) continue;
    if (!any) lo = hi = *v;
    lo = std::min(lo, *v);
    hi = std::max(hi, *v);
    any = true;
  }

  const double cell = d.annotate_cells ? 60.0 : std::max(2.0, 480.0 / std::max(d.rows, d.cols));
  const double left = 90, top = 50, legend_w = 20, gap = 30;
  const double grid_w = cell * d.cols, grid_h = cell * d.rows;
  const double width = left + grid_w + gap + legend_w + 90;
  const double height = top + grid_h + 70;
  const bool tick_labels = d.annotate_cells || std::max(d.rows, d.cols) <= 32;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"25\" font-size=\"14\">" << escape(d.title) << "</text>\n";

  for (std::size_t r = 0; r < d.rows; ++r) {
    for (std::size_t c = 0; c < d.cols; ++c) {
      const auto& v = d.values[r * d.cols + c];
      const double x = left + c * cell, y = top + r * cell;
      std::string fill = "#bbbbbb";
      if (v && std::isfinite(*v)) fill = color_for(hi > lo ? (*v - lo) / (hi - lo) : 0.5);
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"" << fill << "\"/>\n";
      if (d.annotate_cells) {
        s << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
          << "\" text-anchor=\"middle\" fill=\"" << (v && hi > lo && (*v - lo) / (hi - lo) > 0.6 ? "black" : "white")
          << "\">" << (v ? csv::sig6(*v) : std::string("n/a")) << "</text>\n";
      }
    }
  }

  if (tick_labels) {
    for (std::size_t c = 0; c < d.cols && c < d.x_ticks.size(); ++c) {
      s << "<text x=\"" << left + (c + 0.5) * cell << "\" y=\"" << top + grid_h + 15
        << "\" text-anchor=\"middle\">" << escape(d.x_ticks[c]) << "</text>\n";
    }
    for (std::size_t r = 0; r < d.rows && r < d.y_ticks.size(); ++r) {
      s << "<text x=\"" << left - 6 << "\" y=\"" << top + (r + 0.5) * cell + 4
        << "\" text-anchor=\"end\">" << escape(d.y_ticks[r]) << "</text>\n";
    }
  }
  s << "<text x=\"" << left + grid_w / 2 << "\" y=\"" << top + grid_h + 35
    << "\" text-anchor=\"middle\">" << escape(d.x_label) << "</text>\n";
  s << "<text x=\"20\" y=\"" << top + grid_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
    << top + grid_h / 2 << ")\">" << escape(d.y_label) << "</text>\n";

  // Colour bar, max at the top.
  const double lx = left + grid_w + gap;
  const int steps = 32;
  for (int i = 0; i < steps; ++i) {
    s << "<rect x=\"" << lx << "\" y=\"" << top + grid_h * i / steps << "\" width=\"" << legend_w
      << "\" height=\"" << grid_h / steps + 0.5 << "\" fill=\"" << color_for(1.0 - (i + 0.5) / steps)
      << "\"/>\n";
  }
  s << "<text x=\"" << lx + legend_w + 4 << "\" y=\"" << top + 10 << "\">max "
    << (any ? csv::sig6(hi) : std::string("n/a")) << "</text>\n";
  s << "<text x=\"" << lx + legend_w + 4 << "\" y=\"" << top + grid_h << "\">min "
    << (any ? csv::sig6(lo) : std::string("n/a")) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

void write_heatmap_svg(const HeatmapData& data, const std::filesystem::path& path) {
  const std::string svg = render_heatmap_svg(data);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << svg;
  if (!out) throw Error("write failed for " + path.string());
}

HeatmapData matrix_heatmap(const Tensor& matrix, std::string title) {
  if (matrix.rank() != 2) throw DimensionError("matrix_heatmap: expected rank 2");
  HeatmapData d;
  d.title = std::move(title);
  d.x_label = "neuron";
  d.y_label = "neuron";
  d.rows = matrix.dim(0);
  d.cols = matrix.dim(1);
  d.annotate_cells = false;
  for (std::size_t i = 0; i < d.cols; ++i) d.x_ticks.push_back(std::to_string(i));
  for (std::size_t i = 0; i < d.rows; ++i) d.y_ticks.push_back(std::to_string(i));
  for (double v : matrix.data()) d.values.emplace_back(v);
  return d;
}

}  // namespace snn
