#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnp/rng.hpp"

namespace gnp::tasks {

/// Where a task came from: generator tag plus the counter-RNG key that
/// reproduces it.
struct TaskMeta {
  std::string generator;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  Purpose purpose = Purpose::train_task;

  bool operator==(const TaskMeta&) const = default;
};

/// One meta-learning episode. Outputs are stored point-major: with
/// dim_y outputs, ctx_y[n * dim_y + a] is output a at ctx_x[n].
struct Task {
  std::vector<double> ctx_x;
  std::vector<double> ctx_y;
  std::vector<double> tgt_x;
  std::vector<double> tgt_y;
  std::size_t dim_y = 1;
  TaskMeta meta;

  std::size_t num_context() const noexcept { return ctx_x.size(); }
  std::size_t num_targets() const noexcept { return tgt_x.size(); }
  /// Throws std::invalid_argument if the array lengths disagree.
  void check_shape() const;

  bool operator==(const Task&) const = default;
};

/// Identifies one draw from a task stream.
struct TaskKey {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  Purpose purpose = Purpose::train_task;
};

}  // namespace gnp::tasks
