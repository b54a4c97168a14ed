#include "gnp/models/setconv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

namespace gnp::models {

namespace {

constexpr double kDensityEps = 1e-8;

std::int64_t floor_to(std::int64_t v, std::int64_t m) {
  const std::int64_t q = v / m;
  return (v % m != 0 && v < 0 ? q - 1 : q) * m;
}

std::int64_t ceil_to(std::int64_t v, std::int64_t m) { return -floor_to(-v, m); }

/// Inclusive grid index range within `window` points of x, clipped when `clip`.
std::pair<std::int64_t, std::int64_t> window_range(const ConvGrid& g, double x, std::size_t window) {
  const double u = (x - g.anchor) / g.spacing - static_cast<double>(g.start);
  const auto w = static_cast<double>(window);
  return {static_cast<std::int64_t>(std::ceil(u - w)), static_cast<std::int64_t>(std::floor(u + w))};
}

}  // namespace

ConvGrid make_grid(std::span<const double> ctx_x, std::span<const double> tgt_x, double points_per_unit,
                   std::size_t margin, std::size_t block) {
  if (!(points_per_unit > 0.0)) throw std::invalid_argument("make_grid: points_per_unit must be > 0");
  if (block == 0) throw std::invalid_argument("make_grid: block must be >= 1");
  ConvGrid g;
  g.spacing = 1.0 / points_per_unit;
  const auto b = static_cast<std::int64_t>(block);
  if (ctx_x.empty() && tgt_x.empty()) {
    g.start = 0;
    g.length = block;
    return g;
  }
  g.anchor = ctx_x.empty() ? *std::min_element(tgt_x.begin(), tgt_x.end())
                           : *std::min_element(ctx_x.begin(), ctx_x.end());
  double lo = 0.0, hi = 0.0;
  for (auto xs : {ctx_x, tgt_x}) {
    for (double x : xs) {
      if (!std::isfinite(x)) throw std::invalid_argument("make_grid: non-finite input location");
      const double u = (x - g.anchor) / g.spacing;
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
  }
  const auto m = static_cast<std::int64_t>(margin);
  const std::int64_t first = floor_to(static_cast<std::int64_t>(std::floor(lo)) - m, b);
  const std::int64_t last = ceil_to(static_cast<std::int64_t>(std::ceil(hi)) + m + 1, b);
  g.start = first;
  g.length = static_cast<std::size_t>(last - first);
  return g;
}

std::size_t window_points(double lengthscale, double spacing, double widths) {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw std::invalid_argument(fmt::format("set convolution lengthscale must be finite and > 0, got {}", lengthscale));
  }
  return static_cast<std::size_t>(std::ceil(widths * lengthscale / spacing));
}

nd::Var setconv_to_grid(nd::Tape& tape, const ConvGrid& grid, std::span<const double> ctx_x,
                        std::span<const double> ctx_y, std::size_t dim_y, nd::Var log_lengthscale) {
  const std::size_t n = ctx_x.size();
  const std::size_t len = grid.length;
  if (ctx_y.size() != n * dim_y) {
    throw std::invalid_argument(
        fmt::format("setconv_to_grid: {} context outputs for {} inputs of dimension {}", ctx_y.size(), n, dim_y));
  }
  const double ls = std::exp(log_lengthscale.value().item());
  const std::size_t window = window_points(ls, grid.spacing);
  const std::size_t channels = 1 + dim_y;

  // Per grid point: density, weighted sums, and their lengthscale derivatives.
  std::vector<double> dens(len, 0.0), d_dens(len, 0.0);
  std::vector<double> sums(len * dim_y, 0.0), d_sums(len * dim_y, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto [a, b] = window_range(grid, ctx_x[i], window);
    a = std::max<std::int64_t>(a, 0);
    b = std::min<std::int64_t>(b, static_cast<std::int64_t>(len) - 1);
    for (std::int64_t k = a; k <= b; ++k) {
      const double d = (grid.position(static_cast<std::size_t>(k)) - ctx_x[i]) / ls;
      const double phi = std::exp(-0.5 * d * d);
      const double dphi = phi * d * d;
      const auto kk = static_cast<std::size_t>(k);
      dens[kk] += phi;
      d_dens[kk] += dphi;
      for (std::size_t c = 0; c < dim_y; ++c) {
        sums[kk * dim_y + c] += phi * ctx_y[i * dim_y + c];
        d_sums[kk * dim_y + c] += dphi * ctx_y[i * dim_y + c];
      }
    }
  }
  nd::Tensor out = nd::Tensor::matrix(channels, len);
  for (std::size_t k = 0; k < len; ++k) {
    out(0, k) = dens[k];
    for (std::size_t c = 0; c < dim_y; ++c) out(1 + c, k) = sums[k * dim_y + c] / (dens[k] + kDensityEps);
  }
  return tape.record(
      "setconv_to_grid", std::move(out), {log_lengthscale},
      [ls_id = log_lengthscale.id(), dim_y, len, dens = std::move(dens), d_dens = std::move(d_dens),
       sums = std::move(sums), d_sums = std::move(d_sums)](nd::Tape& t, std::size_t self) {
        if (!t.requires_grad(ls_id)) return;
        const nd::Tensor& g = t.grad(self);
        double acc = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
          acc += g(0, k) * d_dens[k];
          const double denom = dens[k] + kDensityEps;
          for (std::size_t c = 0; c < dim_y; ++c) {
            acc += g(1 + c, k) * (d_sums[k * dim_y + c] / denom - sums[k * dim_y + c] * d_dens[k] / (denom * denom));
          }
        }
        t.accumulate(ls_id, nd::Tensor::scalar(acc));
      });
}

nd::Var setconv_from_grid(const ConvGrid& grid, nd::Var channels, std::span<const double> tgt_x,
                          nd::Var log_lengthscale) {
  nd::Tape& tape = channels.tape();
  const nd::Tensor& z = channels.value();
  if (z.cols() != grid.length) {
    throw nd::ShapeError(fmt::format("setconv_from_grid: map has {} columns but the grid has {} points", z.cols(),
                                     grid.length));
  }
  const std::size_t m = tgt_x.size();
  const std::size_t c = z.rows();
  const double ls = std::exp(log_lengthscale.value().item());
  const std::size_t window = window_points(ls, grid.spacing);

  // Sparse weights: for target j, grid indices [first[j], first[j] + count[j]).
  std::vector<std::size_t> first(m), count(m);
  std::vector<double> phi, dphi;
  phi.reserve(m * (2 * window + 1));
  dphi.reserve(m * (2 * window + 1));
  nd::Tensor out = nd::Tensor::matrix(m, c);
  for (std::size_t j = 0; j < m; ++j) {
    const auto [a, b] = window_range(grid, tgt_x[j], window);
    if (a < 0 || b >= static_cast<std::int64_t>(grid.length)) {
      throw std::out_of_range(fmt::format("setconv_from_grid: target {} lies outside the grid [{}, {}]", tgt_x[j],
                                          grid.lower(), grid.upper()));
    }
    first[j] = static_cast<std::size_t>(a);
    count[j] = static_cast<std::size_t>(b - a + 1);
    for (std::size_t k = first[j]; k < first[j] + count[j]; ++k) {
      const double d = (tgt_x[j] - grid.position(k)) / ls;
      const double p = std::exp(-0.5 * d * d);
      phi.push_back(p);
      dphi.push_back(p * d * d);
      for (std::size_t ch = 0; ch < c; ++ch) out(j, ch) += p * z(ch, k);
    }
  }
  return tape.record(
      "setconv_from_grid", std::move(out), {channels, log_lengthscale},
      [z_id = channels.id(), ls_id = log_lengthscale.id(), m, c, first = std::move(first), count = std::move(count),
       phi = std::move(phi), dphi = std::move(dphi)](nd::Tape& t, std::size_t self) {
        const nd::Tensor& g = t.grad(self);
        const bool want_z = t.requires_grad(z_id);
        const bool want_ls = t.requires_grad(ls_id);
        const nd::Tensor& zv = t.value(z_id);
        nd::Tensor gz = want_z ? nd::Tensor::matrix(zv.rows(), zv.cols()) : nd::Tensor{};
        double gls = 0.0;
        std::size_t w = 0;
        for (std::size_t j = 0; j < m; ++j) {
          for (std::size_t k = first[j]; k < first[j] + count[j]; ++k, ++w) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              if (want_z) gz(ch, k) += g(j, ch) * phi[w];
              if (want_ls) gls += g(j, ch) * dphi[w] * zv(ch, k);
            }
          }
        }
        if (want_z) t.accumulate(z_id, gz);
        if (want_ls) t.accumulate(ls_id, nd::Tensor::scalar(gls));
      });
}

}  // namespace gnp::models
