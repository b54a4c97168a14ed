#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gnp/gp/posterior.hpp"
#include "gnp/models/model.hpp"
#include "gnp/tasks/generator.hpp"

namespace gnp::train {

struct MeanSe {
  double mean = 0.0;
  double stderr_ = 0.0;  ///< standard error of the mean (0 for a single value)
  std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> values);

struct EvalResult {
  MeanSe model;
  /// Present when the generator is a GP: exact posterior and its diagonal.
  std::optional<MeanSe> oracle;
  std::optional<MeanSe> diagonal_oracle;
  std::vector<double> per_task;  ///< model values, nats/datapoint
};

/// Observation-noise-inclusive GP posterior of a task's targets.
gp::GaussianMoments oracle_moments(const tasks::GaussianTaskConfig& cfg, const tasks::Task& task);

/// The exact GP posterior as a low-rank GaussianPredictive (basis from a
/// rank-revealing factor of the latent covariance, noise on the diagonal).
models::GaussianPredictive oracle_predictive(const tasks::GaussianTaskConfig& cfg, const tasks::Task& task);

/// Per-datapoint log-likelihood of the model on `tasks`, with both oracles
/// when `gaussian` is non-null.
EvalResult eval_loglik(const models::Model& model, std::span<const tasks::Task> tasks,
                       const tasks::GaussianTaskConfig* gaussian, std::size_t threads = 1);

/// Generates tasks (seed, i, purpose) for i < n_tasks and evaluates them.
EvalResult eval_loglik(const models::Model& model, const tasks::GeneratorConfig& generator, std::uint64_t seed,
                       std::size_t n_tasks, Purpose purpose = Purpose::test_task, std::size_t threads = 1);

struct ThresholdConfig {
  std::size_t samples = 1000;
  double factor = 1.1;
  /// Sample latent function paths rather than noisy observations.
  bool noise_free = true;
  /// Output whose series is thresholded (multi-output tasks).
  std::size_t output = 0;
};

struct ThresholdResult {
  double threshold = 0.0;
  double probability = 0.0;  ///< clamped to [1/(n+2), 1 - 1/(n+2)]
  bool event = false;
  double log_score = 0.0;
};

/// Probability that the series exceeds factor * max(context outputs)
/// somewhere on the target inputs, estimated from joint predictive samples,
/// and the log score of the realized event.
ThresholdResult threshold_task(const models::GaussianPredictive& pred, const tasks::Task& task,
                               const ThresholdConfig& config, std::uint64_t seed);
ThresholdResult threshold_task(const models::Model& model, const tasks::Task& task, const ThresholdConfig& config,
                               std::uint64_t seed);

struct EquivarianceReport {
  double mean_deviation = 0.0;
  double covariance_deviation = 0.0;
  double max() const { return std::max(mean_deviation, covariance_deviation); }
};

/// Max-abs change of the predictive mean and covariance when every context
/// and target input is shifted by `shift_grid_steps / points_per_unit`.
EquivarianceReport equivariance_check(const models::Model& model, const tasks::Task& task, double shift_grid_steps);

}  // namespace gnp::train
