#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gnp/ndiff/tape.hpp"
#include "gnp/ndiff/tensor.hpp"
#include "gnp/rng.hpp"

namespace gnp::models {

/// Covariance structure of a Gaussian predictive over n stacked outputs.
///
/// - mean_field: K = diag(s2)
/// - low_rank:   K = G G^T                      (G: n x D_g)
/// - kvv:        K_ij = v_i v_j exp(-|g_i - g_j|^2 / 2)
///
/// Observation noise adds diag(noise) on top of K in every form.
enum class CovarianceForm { mean_field, low_rank, kvv };
std::string_view to_string(CovarianceForm f);

/// Value-level Gaussian predictive. With dim_y outputs at num_targets inputs,
/// rows are stacked output-major: row a * num_targets + i is output a at
/// target i. `psi` is non-empty when an exponential copula is attached.
struct GaussianPredictive {
  CovarianceForm form = CovarianceForm::mean_field;
  std::size_t dim_y = 1;
  std::size_t num_targets = 0;
  std::vector<double> mean;
  std::vector<double> variance;  ///< mean_field only
  nd::Tensor basis;              ///< low_rank / kvv: n x D_g
  std::vector<double> scale;     ///< kvv only
  std::vector<double> noise;     ///< per-row observation noise variance
  std::vector<double> psi;       ///< copula scales, empty when absent

  std::size_t size() const noexcept { return mean.size(); }
  bool has_copula() const noexcept { return !psi.empty(); }
  /// K (+ diag(noise) when `with_noise`) as a dense n x n matrix.
  nd::Tensor covariance(bool with_noise) const;
  /// Diagonal of the covariance.
  std::vector<double> marginal_variance(bool with_noise) const;
  /// The predictive restricted to the given stacked rows, in that order.
  /// dim_y becomes 1 and num_targets the row count.
  GaussianPredictive select(std::span<const std::size_t> rows) const;
  /// Throws std::invalid_argument if the component sizes disagree.
  void check() const;
};

/// Differentiable counterpart of GaussianPredictive (n x 1 columns, basis
/// n x D_g). Unused components are invalid Vars.
struct PredictiveVars {
  CovarianceForm form = CovarianceForm::mean_field;
  std::size_t dim_y = 1;
  std::size_t num_targets = 0;
  nd::Var mean;
  nd::Var variance;
  nd::Var basis;
  nd::Var scale;
  nd::Var noise;
  nd::Var psi;

  GaussianPredictive value() const;
};

/// Records a GaussianPredictive's tensors as constants on `tape`.
PredictiveVars as_constants(nd::Tape& tape, const GaussianPredictive& pred);

/// How the low-rank log-density is evaluated. Both routes are exact.
enum class LowRankRoute {
  automatic,    ///< capacitance when D_g <= n, dense otherwise
  capacitance,  ///< D_g x D_g matrix-inversion / determinant lemmas
  dense,        ///< Cholesky of the n x n covariance
};

/// log N(y; m, K + diag(noise)) in nats, differentiable in every component
/// and in y. `y` is n x 1 in stacked row order.
nd::Var gaussian_loglik(const PredictiveVars& pred, nd::Var y, LowRankRoute route = LowRankRoute::automatic);

/// Gaussian log-density when no copula is attached; otherwise the copula
/// log-density log pi_G(Theta(y)) + sum log Theta'(y).
nd::Var predictive_loglik(const PredictiveVars& pred, const nd::Tensor& y,
                          LowRankRoute route = LowRankRoute::automatic);

/// Value-level convenience wrapper around predictive_loglik.
double predictive_loglik(const GaussianPredictive& pred, std::span<const double> y,
                         LowRankRoute route = LowRankRoute::automatic);

/// `count` joint samples as an n x count matrix. Low-rank samples use
/// m + G eps (+ noise) without factorizing an n x n matrix; kvv samples use a
/// rank-revealing pivoted Cholesky of K. With a copula attached the samples
/// are mapped through the marginal transform.
nd::Tensor predictive_sample(const GaussianPredictive& pred, CounterRng& rng, std::size_t count, bool with_noise);
nd::Tensor predictive_sample(const GaussianPredictive& pred, std::uint64_t seed, std::size_t count,
                             bool with_noise);

/// Cross-output covariance from per-output features: block (a, b) holds
/// g_a(x_i)^T g_b(x_j) for low_rank and v_a v_b exp(-|g_a - g_b|^2 / 2) for
/// kvv. All feature matrices must share D_g and the row count.
nd::Tensor multioutput_covariance(CovarianceForm form, std::span<const nd::Tensor> features,
                                  std::span<const std::vector<double>> scales = {});

/// Converts point-major outputs (y[i * dim_y + a]) to the stacked output-major
/// order used by predictives, and back.
std::vector<double> stack_outputs(std::span<const double> point_major, std::size_t dim_y);
std::vector<double> unstack_outputs(std::span<const double> stacked, std::size_t dim_y);

}  // namespace gnp::models
