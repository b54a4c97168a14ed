#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "gnp/ndiff/tape.hpp"

namespace gnp::models {

/// Uniform 1D grid. Point k sits at anchor + (start + k) * spacing, so two
/// grids with the same anchor and spacing agree on every point they share.
struct ConvGrid {
  double anchor = 0.0;
  double spacing = 1.0;
  std::int64_t start = 0;
  std::size_t length = 0;

  double position(std::size_t k) const { return anchor + static_cast<double>(start + static_cast<std::int64_t>(k)) * spacing; }
  double lower() const { return position(0); }
  double upper() const { return position(length - 1); }
};

/// Grid anchored at the smallest context input (the smallest target input
/// when the context is empty), extended `margin` points beyond every input,
/// with start index and length both multiples of `block`.
ConvGrid make_grid(std::span<const double> ctx_x, std::span<const double> tgt_x, double points_per_unit,
                   std::size_t margin, std::size_t block);

/// Number of grid points within `widths` lengthscales, rounded up.
std::size_t window_points(double lengthscale, double spacing, double widths = 8.0);

/// Encoder set convolution onto `grid`: a ((1 + dim_y) x length) map whose
/// first row is the density sum_i phi(g - x_i) and whose remaining rows hold
/// sum_i phi(g - x_i) y_i / (density + 1e-8), with phi an EQ bump of
/// lengthscale exp(log_lengthscale). Differentiable in the lengthscale only.
/// An empty context gives an all-zero map.
nd::Var setconv_to_grid(nd::Tape& tape, const ConvGrid& grid, std::span<const double> ctx_x,
                        std::span<const double> ctx_y, std::size_t dim_y, nd::Var log_lengthscale);

/// Decoder set convolution: row m of the (targets x channels) result is
/// sum_k phi(x_m - g_k) z[:, k] over grid points within the truncation window.
/// Throws std::out_of_range when a window leaves the grid.
nd::Var setconv_from_grid(const ConvGrid& grid, nd::Var channels, std::span<const double> tgt_x,
                          nd::Var log_lengthscale);

}  // namespace gnp::models
