#include "gnp/gp/posterior.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "gnp/ndiff/linalg.hpp"

namespace gnp::gp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

GaussianMoments posterior(const KernelSpec& spec, double noise_var, std::span<const double> ctx_x,
                          std::span<const double> ctx_y, std::span<const double> tgt_x) {
  if (ctx_x.size() != ctx_y.size()) {
    throw std::invalid_argument(fmt::format("posterior: {} context inputs but {} outputs", ctx_x.size(), ctx_y.size()));
  }
  if (noise_var < 0.0) throw std::invalid_argument("posterior: negative noise variance");

  GaussianMoments out;
  out.covariance = gram(spec, tgt_x, tgt_x);
  out.mean.assign(tgt_x.size(), 0.0);
  if (ctx_x.empty()) return out;

  nd::Tensor kcc = gram(spec, ctx_x, ctx_x);
  for (std::size_t i = 0; i < ctx_x.size(); ++i) kcc(i, i) += noise_var;
  const nd::Tensor l = nd::cholesky(kcc).factor;
  const nd::Tensor kct = gram(spec, ctx_x, tgt_x);

  // mean = K_tc (K_cc + s^2 I)^{-1} y ; cov = K_tt - V^T V with V = L^{-1} K_ct.
  const nd::Tensor alpha = nd::solve_lower_transposed(l, nd::solve_lower(l, nd::Tensor::column(ctx_y)));
  const nd::Tensor mean = nd::matmul_tn(kct, alpha);
  for (std::size_t i = 0; i < tgt_x.size(); ++i) out.mean[i] = mean[i];
  const nd::Tensor v = nd::solve_lower(l, kct);
  const nd::Tensor vtv = nd::matmul_tn(v, v);
  const std::size_t m = tgt_x.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double c = out.covariance(i, j) - 0.5 * (vtv(i, j) + vtv(j, i));
      out.covariance(i, j) = out.covariance(j, i) = c;
    }
    out.covariance(i, i) = std::max(out.covariance(i, i), 0.0);
  }
  return out;
}

std::vector<double> prior_sample(const KernelSpec& spec, double noise_var, std::span<const double> xs,
                                 CounterRng& rng) {
  const std::size_t n = xs.size();
  std::vector<double> y(n, 0.0);
  if (n == 0) return y;
  const nd::Tensor f = nd::psd_factor(gram(spec, xs, xs));
  std::vector<double> eps(n);
  for (double& e : eps) e = rng.normal();
  const double noise_sd = std::sqrt(noise_var);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += f(i, j) * eps[j];
    y[i] = acc;
  }
  if (noise_sd > 0.0)
    for (double& v : y) v += noise_sd * rng.normal();
  return y;
}

std::vector<double> prior_sample(const KernelSpec& spec, double noise_var, std::span<const double> xs,
                                 std::uint64_t seed) {
  CounterRng rng(seed, 0, Purpose::sample);
  return prior_sample(spec, noise_var, xs, rng);
}

double oracle_loglik(const GaussianMoments& moments, std::span<const double> y, bool diagonal_only) {
  const std::size_t m = moments.size();
  if (y.size() != m || moments.covariance.rows() != m || moments.covariance.cols() != m) {
    throw std::invalid_argument(
        fmt::format("oracle_loglik: {} observations for a {}-dimensional Gaussian", y.size(), m));
  }
  if (diagonal_only) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double var = moments.covariance(i, i);
      if (!(var > 0.0)) {
        throw nd::NotPositiveDefinite(fmt::format("oracle_loglik: variance {} at index {}", var, i), 0.0);
      }
      const double r = y[i] - moments.mean[i];
      total += -0.5 * (kLog2Pi + std::log(var) + r * r / var);
    }
    return total;
  }
  const nd::Tensor l = nd::cholesky(moments.covariance).factor;
  nd::Tensor r = nd::Tensor::matrix(m, 1);
  for (std::size_t i = 0; i < m; ++i) r[i] = y[i] - moments.mean[i];
  const nd::Tensor z = nd::solve_lower(l, r);
  double quad = 0.0, logdet = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    quad += z[i] * z[i];
    logdet += 2.0 * std::log(l(i, i));
  }
  return -0.5 * (static_cast<double>(m) * kLog2Pi + logdet + quad);
}

GaussianMoments with_noise(GaussianMoments moments, double noise_var) {
  for (std::size_t i = 0; i < moments.size(); ++i) moments.covariance(i, i) += noise_var;
  return moments;
}

}  // namespace gnp::gp
