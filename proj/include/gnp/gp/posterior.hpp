#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gnp/gp/kernel.hpp"
#include "gnp/ndiff/tensor.hpp"
#include "gnp/rng.hpp"

namespace gnp::gp {

/// Mean vector and dense covariance of a multivariate Gaussian.
struct GaussianMoments {
  std::vector<double> mean;
  nd::Tensor covariance;

  std::size_t size() const noexcept { return mean.size(); }
};

/// Exact GP conditioning of the latent function at `tgt_x` on noisy
/// observations (ctx_x, ctx_y) with observation noise variance `noise_var`.
/// With an empty context this is the prior. Throws nd::NotPositiveDefinite if
/// the context Gram cannot be factorized even with jitter.
GaussianMoments posterior(const KernelSpec& spec, double noise_var, std::span<const double> ctx_x,
                          std::span<const double> ctx_y, std::span<const double> tgt_x);

/// y = F eps + sqrt(noise_var) eps' with F F^T = gram(X, X) (rank-revealing pivoted
/// Cholesky, so coincident inputs give identical noise-free outputs).
std::vector<double> prior_sample(const KernelSpec& spec, double noise_var, std::span<const double> xs,
                                 CounterRng& rng);
std::vector<double> prior_sample(const KernelSpec& spec, double noise_var, std::span<const double> xs,
                                 std::uint64_t seed);

/// Total log-density log N(y; m, K) in nats. With `diagonal_only` the
/// off-diagonal entries of K are treated as zero.
double oracle_loglik(const GaussianMoments& moments, std::span<const double> y, bool diagonal_only);

/// Moments of the noisy observations: covariance + noise_var * I.
GaussianMoments with_noise(GaussianMoments moments, double noise_var);

}  // namespace gnp::gp
