#pragma once

#include <string>
#include <vector>

#include "gnp/ndiff/tensor.hpp"

namespace gnp::cli {

struct HeatmapPanel {
  std::string title;
  nd::Tensor matrix;  ///< square
};

/// Side-by-side heatmaps on a shared blue-white-red scale symmetric about
/// zero, with a labelled colour bar.
std::string heatmap_svg(const std::vector<HeatmapPanel>& panels);

struct SamplePanel {
  std::string title;
  std::vector<double> x;      ///< dense grid, increasing
  std::vector<double> mean;   ///< at x
  std::vector<double> lower;  ///< band at x
  std::vector<double> upper;
  std::vector<std::vector<double>> samples;  ///< paths at x
  std::vector<double> ctx_x;
  std::vector<double> ctx_y;
  std::vector<double> tgt_x;  ///< held-out observations, may be empty
  std::vector<double> tgt_y;
};

/// Stacked panels: band, mean curve, sample paths, observation markers.
std::string samples_svg(const std::vector<SamplePanel>& panels);

/// Diverging colour for t in [-1, 1] as "#rrggbb".
std::string diverging_color(double t);

}  // namespace gnp::cli
