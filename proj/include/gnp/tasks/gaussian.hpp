#pragma once

#include <string>

#include "gnp/gp/kernel.hpp"
#include "gnp/tasks/task.hpp"

namespace gnp::tasks {

/// Synthetic GP regression episodes.
struct GaussianTaskConfig {
  gp::KernelSpec kernel;
  double noise_var = 0.05 * 0.05;
  std::size_t min_context = 3;
  std::size_t max_context = 50;
  std::size_t num_targets = 100;
  double x_min = -2.0;
  double x_max = 2.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  /// Generator tag recorded in task metadata, e.g. "gp-eq".
  std::string tag() const;
};

/// N ~ Uniform{min_context..max_context}; N + M inputs iid uniform on
/// [x_min, x_max]; outputs drawn jointly from the noisy GP prior. The first N
/// points form the context.
Task sample_gaussian_task(const GaussianTaskConfig& cfg, const TaskKey& key);

}  // namespace gnp::tasks
