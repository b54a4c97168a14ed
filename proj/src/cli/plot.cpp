#include "gnp/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "gnp/cli/svg.hpp"
#include "gnp/models/copula.hpp"

namespace gnp::cli {

namespace {

std::vector<double> dense_grid(const tasks::Task& task, std::size_t points) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto* xs : {&task.ctx_x, &task.tgt_x}) {
    for (double x : *xs) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (!(lo <= hi)) throw std::invalid_argument("plot: task has no inputs");
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

}  // namespace

PredictivePlots plot_predictive(const models::Model& model, const tasks::Task& task, std::size_t points,
                                std::size_t samples, std::uint64_t seed) {
  if (points < 2) throw std::invalid_argument("plot: need at least 2 grid points");
  task.check_shape();
  const std::size_t dim_y = model.spec().dim_y;
  if (task.dim_y != dim_y) {
    throw std::invalid_argument(fmt::format("plot: task has {} outputs but the model has {}", task.dim_y, dim_y));
  }
  const std::vector<double> grid = dense_grid(task, points);
  const models::GaussianPredictive pred = model.predict(task.ctx_x, task.ctx_y, grid);

  nd::Tensor k = pred.covariance(false);
  const std::size_t n = k.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) k(i, j) = k(j, i) = 0.5 * (k(i, j) + k(j, i));

  PredictivePlots out;
  out.covariance_txt = fmt::format("# {} {}\n", n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.covariance_txt += fmt::format("{}{}", j ? " " : "", k(i, j));
    out.covariance_txt += '\n';
  }

  const std::vector<double> var = pred.marginal_variance(false);
  const nd::Tensor draws = samples > 0 ? models::predictive_sample(pred, seed, samples, false) : nd::Tensor::matrix(n, 0);
  const auto to_output = [&](double v, std::size_t row) {
    return pred.has_copula() ? models::copula_forward(v, pred.psi[row]) : v;
  };

  std::vector<HeatmapPanel> heat;
  std::vector<SamplePanel> panels;
  for (std::size_t a = 0; a < dim_y; ++a) {
    HeatmapPanel hp;
    hp.title = dim_y > 1 ? fmt::format("latent covariance, output {}", a) : "latent covariance";
    hp.matrix = nd::Tensor::matrix(points, points);
    for (std::size_t i = 0; i < points; ++i)
      for (std::size_t j = 0; j < points; ++j) hp.matrix(i, j) = k(a * points + i, a * points + j);
    heat.push_back(std::move(hp));

    SamplePanel sp;
    sp.title = fmt::format("{}{}: {}, +-2 sd band, {} noise-free sample(s)", task.meta.generator,
                           dim_y > 1 ? fmt::format(" output {}", a) : "", pred.has_copula() ? "median" : "mean",
                           samples);
    sp.x = grid;
    for (std::size_t i = 0; i < points; ++i) {
      const std::size_t row = a * points + i;
      const double sd = std::sqrt(std::max(var[row], 0.0));
      sp.mean.push_back(to_output(pred.mean[row], row));
      sp.lower.push_back(to_output(pred.mean[row] - 2.0 * sd, row));
      sp.upper.push_back(to_output(pred.mean[row] + 2.0 * sd, row));
    }
    for (std::size_t s = 0; s < samples; ++s) {
      std::vector<double> path(points);
      for (std::size_t i = 0; i < points; ++i) path[i] = draws(a * points + i, s);
      sp.samples.push_back(std::move(path));
    }
    for (std::size_t i = 0; i < task.num_context(); ++i) {
      sp.ctx_x.push_back(task.ctx_x[i]);
      sp.ctx_y.push_back(task.ctx_y[i * dim_y + a]);
    }
    for (std::size_t i = 0; i < task.num_targets(); ++i) {
      sp.tgt_x.push_back(task.tgt_x[i]);
      sp.tgt_y.push_back(task.tgt_y[i * dim_y + a]);
    }
    panels.push_back(std::move(sp));
  }
  out.covariance_svg = heatmap_svg(heat);
  out.samples_svg = samples_svg(panels);
  return out;
}

nd::Tensor parse_matrix_text(const std::string& text) {
  std::istringstream in(text);
  std::string hash;
  std::size_t rows = 0, cols = 0;
  if (!(in >> hash >> rows >> cols) || hash != "#") throw std::invalid_argument("matrix text: bad header");
  nd::Tensor m = nd::Tensor::matrix(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    std::string tok;
    if (!(in >> tok)) throw std::invalid_argument("matrix text: too few entries");
    m[i] = std::stod(tok);
  }
  return m;
}

}  // namespace gnp::cli
