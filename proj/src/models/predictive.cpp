#include "gnp/models/predictive.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "gnp/models/copula.hpp"
#include "gnp/ndiff/linalg.hpp"
#include "gnp/ndiff/ops.hpp"

namespace gnp::models {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

nd::Var column_constant(nd::Tape& tape, const std::vector<double>& v) { return tape.constant(nd::Tensor::column(v)); }

nd::Var dense_loglik(nd::Var cov, nd::Var r) {
  const auto n = static_cast<double>(r.rows());
  nd::Var l = nd::cholesky(cov);
  nd::Var z = nd::solve_lower(l, r);
  nd::Var quad = nd::sum(nd::square(z));
  nd::Var half_logdet = nd::sum_log_diag(l);
  // -0.5 * (n log 2pi + 2 sum log L_ii + |z|^2)
  return nd::add_scalar(nd::neg(nd::add(half_logdet, nd::scale(quad, 0.5))), -0.5 * n * kLog2Pi);
}

nd::Var ones_column(nd::Tape& tape, std::size_t n) { return tape.constant(nd::Tensor::matrix(n, 1, 1.0)); }

}  // namespace

std::string_view to_string(CovarianceForm f) {
  switch (f) {
    case CovarianceForm::mean_field: return "mean_field";
    case CovarianceForm::low_rank: return "low_rank";
    case CovarianceForm::kvv: return "kvv";
  }
  return "?";
}

void GaussianPredictive::check() const {
  const std::size_t n = mean.size();
  auto fail = [&](std::string_view what, std::size_t got) {
    throw std::invalid_argument(fmt::format("predictive: {} has {} entries, expected {}", what, got, n));
  };
  if (n != dim_y * num_targets) fail("mean", n);
  if (noise.size() != n) fail("noise", noise.size());
  if (form == CovarianceForm::mean_field && variance.size() != n) fail("variance", variance.size());
  if (form != CovarianceForm::mean_field && basis.rows() != n) fail("basis", basis.rows());
  if (form == CovarianceForm::kvv && scale.size() != n) fail("scale", scale.size());
  if (!psi.empty() && psi.size() != n) fail("psi", psi.size());
}

nd::Tensor GaussianPredictive::covariance(bool with_noise) const {
  const std::size_t n = size();
  nd::Tensor k = nd::Tensor::matrix(n, n);
  switch (form) {
    case CovarianceForm::mean_field:
      for (std::size_t i = 0; i < n; ++i) k(i, i) = variance[i];
      break;
    case CovarianceForm::low_rank: k = nd::matmul_nt(basis, basis); break;
    case CovarianceForm::kvv: {
      const std::size_t d = basis.cols();
      for (std::size_t i = 0; i < n; ++i) {
        k(i, i) = scale[i] * scale[i];
        for (std::size_t j = 0; j < i; ++j) {
          double d2 = 0.0;
          for (std::size_t a = 0; a < d; ++a) {
            const double diff = basis(i, a) - basis(j, a);
            d2 += diff * diff;
          }
          k(i, j) = k(j, i) = scale[i] * scale[j] * std::exp(-0.5 * d2);
        }
      }
      break;
    }
  }
  if (with_noise)
    for (std::size_t i = 0; i < n; ++i) k(i, i) += noise[i];
  return k;
}

std::vector<double> GaussianPredictive::marginal_variance(bool with_noise) const {
  const std::size_t n = size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    switch (form) {
      case CovarianceForm::mean_field: out[i] = variance[i]; break;
      case CovarianceForm::low_rank:
        for (std::size_t a = 0; a < basis.cols(); ++a) out[i] += basis(i, a) * basis(i, a);
        break;
      case CovarianceForm::kvv: out[i] = scale[i] * scale[i]; break;
    }
    if (with_noise) out[i] += noise[i];
  }
  return out;
}

GaussianPredictive GaussianPredictive::select(std::span<const std::size_t> rows) const {
  GaussianPredictive out;
  out.form = form;
  out.dim_y = 1;
  out.num_targets = rows.size();
  auto pick = [&](const std::vector<double>& src, std::vector<double>& dst) {
    if (src.empty()) return;
    for (auto r : rows) dst.push_back(src.at(r));
  };
  pick(mean, out.mean);
  pick(variance, out.variance);
  pick(scale, out.scale);
  pick(noise, out.noise);
  pick(psi, out.psi);
  if (form != CovarianceForm::mean_field) {
    out.basis = nd::Tensor::matrix(rows.size(), basis.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t a = 0; a < basis.cols(); ++a) out.basis(i, a) = basis(rows[i], a);
  }
  return out;
}

GaussianPredictive PredictiveVars::value() const {
  GaussianPredictive out;
  out.form = form;
  out.dim_y = dim_y;
  out.num_targets = num_targets;
  auto column = [](nd::Var v) { return v.valid() ? v.value().to_vector() : std::vector<double>{}; };
  out.mean = column(mean);
  out.variance = column(variance);
  out.scale = column(scale);
  out.noise = column(noise);
  out.psi = column(psi);
  if (basis.valid()) out.basis = basis.value();
  return out;
}

PredictiveVars as_constants(nd::Tape& tape, const GaussianPredictive& pred) {
  pred.check();
  PredictiveVars out;
  out.form = pred.form;
  out.dim_y = pred.dim_y;
  out.num_targets = pred.num_targets;
  out.mean = column_constant(tape, pred.mean);
  out.noise = column_constant(tape, pred.noise);
  if (!pred.variance.empty()) out.variance = column_constant(tape, pred.variance);
  if (!pred.scale.empty()) out.scale = column_constant(tape, pred.scale);
  if (!pred.psi.empty()) out.psi = column_constant(tape, pred.psi);
  if (pred.form != CovarianceForm::mean_field) out.basis = tape.constant(pred.basis);
  return out;
}

nd::Var gaussian_loglik(const PredictiveVars& pred, nd::Var y, LowRankRoute route) {
  nd::Tape& tape = pred.mean.tape();
  const std::size_t n = pred.mean.rows();
  if (y.rows() != n || y.cols() != 1) {
    throw nd::ShapeError(fmt::format("predictive loglik: {} observations for {} predictive rows",
                                     nd::shape_string(y.value().shape()), n));
  }
  nd::Var r = nd::sub(y, pred.mean);
  switch (pred.form) {
    case CovarianceForm::mean_field: {
      nd::Var s2 = nd::add(pred.variance, pred.noise);
      nd::Var terms = nd::add(nd::log(s2), nd::div(nd::square(r), s2));
      return nd::add_scalar(nd::scale(nd::sum(terms), -0.5), -0.5 * static_cast<double>(n) * kLog2Pi);
    }
    case CovarianceForm::low_rank: {
      const std::size_t d = pred.basis.cols();
      const bool capacitance =
          route == LowRankRoute::capacitance || (route == LowRankRoute::automatic && d <= n);
      if (!capacitance) {
        nd::Var k = nd::matmul(pred.basis, nd::transpose(pred.basis));
        return dense_loglik(nd::add_diag(k, pred.noise), r);
      }
      // Sigma = G G^T + D. With A = I + G^T D^{-1} G = L L^T:
      //   log|Sigma| = log|D| + 2 sum log L_ii
      //   r^T Sigma^{-1} r = r^T D^{-1} r - |L^{-1} G^T D^{-1} r|^2
      nd::Var inv_noise = nd::div(ones_column(tape, n), pred.noise);
      nd::Var scaled = nd::mul_col_vector(pred.basis, inv_noise);
      nd::Var gt = nd::transpose(pred.basis);
      nd::Var cap = nd::add_diag(nd::matmul(gt, scaled), ones_column(tape, d));
      nd::Var l = nd::cholesky(cap);
      nd::Var z = nd::solve_lower(l, nd::matmul(nd::transpose(scaled), r));
      nd::Var logdet = nd::add(nd::sum(nd::log(pred.noise)), nd::scale(nd::sum_log_diag(l), 2.0));
      nd::Var quad = nd::sub(nd::sum(nd::mul(nd::square(r), inv_noise)), nd::sum(nd::square(z)));
      return nd::add_scalar(nd::scale(nd::add(logdet, quad), -0.5), -0.5 * static_cast<double>(n) * kLog2Pi);
    }
    case CovarianceForm::kvv: {
      return dense_loglik(nd::kvv_covariance(pred.basis, pred.scale, pred.noise), r);
    }
  }
  throw std::logic_error("unreachable");
}

nd::Var predictive_loglik(const PredictiveVars& pred, const nd::Tensor& y, LowRankRoute route) {
  nd::Tape& tape = pred.mean.tape();
  if (!pred.psi.valid()) return gaussian_loglik(pred, tape.constant(y), route);
  nd::Var v = copula_latent(pred.psi, y);
  return nd::add(gaussian_loglik(pred, v, route), copula_log_jacobian_sum(pred.psi, y, v));
}

double predictive_loglik(const GaussianPredictive& pred, std::span<const double> y, LowRankRoute route) {
  if (y.size() != pred.size()) {
    throw std::invalid_argument(
        fmt::format("predictive loglik: {} observations for {} predictive rows", y.size(), pred.size()));
  }
  nd::Tape tape;
  const PredictiveVars vars = as_constants(tape, pred);
  return predictive_loglik(vars, nd::Tensor::column(y), route).value().item();
}

nd::Tensor predictive_sample(const GaussianPredictive& pred, CounterRng& rng, std::size_t count, bool with_noise) {
  pred.check();
  if (count < 1) throw std::invalid_argument("predictive_sample: count must be >= 1");
  const std::size_t n = pred.size();
  nd::Tensor out = nd::Tensor::matrix(n, count);
  nd::Tensor factor;
  if (pred.form == CovarianceForm::kvv) factor = nd::psd_factor(pred.covariance(false));
  const std::size_t d = pred.form == CovarianceForm::mean_field ? 0 : pred.basis.cols();
  std::vector<double> eps;
  for (std::size_t s = 0; s < count; ++s) {
    switch (pred.form) {
      case CovarianceForm::mean_field:
        for (std::size_t i = 0; i < n; ++i) out(i, s) = pred.mean[i] + std::sqrt(pred.variance[i]) * rng.normal();
        break;
      case CovarianceForm::low_rank:
        eps.resize(d);
        for (double& e : eps) e = rng.normal();
        for (std::size_t i = 0; i < n; ++i) {
          double acc = pred.mean[i];
          for (std::size_t a = 0; a < d; ++a) acc += pred.basis(i, a) * eps[a];
          out(i, s) = acc;
        }
        break;
      case CovarianceForm::kvv:
        eps.resize(n);
        for (double& e : eps) e = rng.normal();
        for (std::size_t i = 0; i < n; ++i) {
          double acc = pred.mean[i];
          for (std::size_t j = 0; j < n; ++j) acc += factor(i, j) * eps[j];
          out(i, s) = acc;
        }
        break;
    }
    if (with_noise)
      for (std::size_t i = 0; i < n; ++i) out(i, s) += std::sqrt(pred.noise[i]) * rng.normal();
    if (pred.has_copula())
      for (std::size_t i = 0; i < n; ++i) out(i, s) = copula_forward(out(i, s), pred.psi[i]);
  }
  return out;
}

nd::Tensor predictive_sample(const GaussianPredictive& pred, std::uint64_t seed, std::size_t count,
                             bool with_noise) {
  CounterRng rng(seed, 0, Purpose::sample);
  return predictive_sample(pred, rng, count, with_noise);
}

nd::Tensor multioutput_covariance(CovarianceForm form, std::span<const nd::Tensor> features,
                                  std::span<const std::vector<double>> scales) {
  if (form == CovarianceForm::mean_field) {
    throw std::invalid_argument("multioutput_covariance: mean-field outputs carry no cross-covariance features");
  }
  if (features.empty()) throw std::invalid_argument("multioutput_covariance: no outputs");
  const std::size_t m = features[0].rows(), d = features[0].cols();
  for (std::size_t a = 0; a < features.size(); ++a) {
    if (features[a].cols() != d) {
      throw std::invalid_argument(
          fmt::format("multioutput_covariance: output {} has D_g = {}, output 0 has {}", a, features[a].cols(), d));
    }
    if (features[a].rows() != m) {
      throw std::invalid_argument(fmt::format("multioutput_covariance: output {} has {} targets, expected {}", a,
                                              features[a].rows(), m));
    }
  }
  if (form == CovarianceForm::kvv && scales.size() != features.size()) {
    throw std::invalid_argument("multioutput_covariance: kvv needs one scale vector per output");
  }
  const std::size_t dy = features.size(), n = dy * m;
  nd::Tensor k = nd::Tensor::matrix(n, n);
  for (std::size_t a = 0; a < dy; ++a) {
    for (std::size_t b = 0; b < dy; ++b) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          double acc = 0.0;
          if (form == CovarianceForm::low_rank) {
            for (std::size_t c = 0; c < d; ++c) acc += features[a](i, c) * features[b](j, c);
          } else {
            double d2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              const double diff = features[a](i, c) - features[b](j, c);
              d2 += diff * diff;
            }
            acc = scales[a].at(i) * scales[b].at(j) * std::exp(-0.5 * d2);
          }
          k(a * m + i, b * m + j) = acc;
        }
      }
    }
  }
  return k;
}

std::vector<double> stack_outputs(std::span<const double> point_major, std::size_t dim_y) {
  const std::size_t m = point_major.size() / dim_y;
  std::vector<double> out(point_major.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < dim_y; ++a) out[a * m + i] = point_major[i * dim_y + a];
  return out;
}

std::vector<double> unstack_outputs(std::span<const double> stacked, std::size_t dim_y) {
  const std::size_t m = stacked.size() / dim_y;
  std::vector<double> out(stacked.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < dim_y; ++a) out[i * dim_y + a] = stacked[a * m + i];
  return out;
}

}  // namespace gnp::models
