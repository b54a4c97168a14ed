#include "gnp/tasks/gaussian.hpp"

#include <stdexcept>

#include <fmt/format.h>

#include "gnp/gp/posterior.hpp"

namespace gnp::tasks {

void Task::check_shape() const {
  if (dim_y == 0) throw std::invalid_argument("task: dim_y must be >= 1");
  if (ctx_y.size() != ctx_x.size() * dim_y || tgt_y.size() != tgt_x.size() * dim_y) {
    throw std::invalid_argument(fmt::format("task: {} context inputs with {} outputs, {} targets with {} outputs (dim_y {})",
                                            ctx_x.size(), ctx_y.size(), tgt_x.size(), tgt_y.size(), dim_y));
  }
}

void GaussianTaskConfig::validate() const {
  kernel.validate();
  if (!(noise_var >= 0.0)) throw std::invalid_argument("generator.noise_var must be >= 0");
  if (min_context < 1) throw std::invalid_argument("generator.min_context must be >= 1");
  if (max_context < min_context) throw std::invalid_argument("generator.max_context must be >= generator.min_context");
  if (num_targets < 1) throw std::invalid_argument("generator.num_targets must be >= 1");
  if (!(x_max > x_min)) throw std::invalid_argument("generator.x_max must exceed generator.x_min");
}

std::string GaussianTaskConfig::tag() const { return fmt::format("gp-{}", gp::to_string(kernel.kind)); }

Task sample_gaussian_task(const GaussianTaskConfig& cfg, const TaskKey& key) {
  CounterRng rng(key.seed, key.index, key.purpose);
  const auto n = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(cfg.min_context), static_cast<std::int64_t>(cfg.max_context)));
  const std::size_t total = n + cfg.num_targets;
  std::vector<double> xs(total);
  for (double& x : xs) x = rng.uniform(cfg.x_min, cfg.x_max);
  const std::vector<double> ys = gp::prior_sample(cfg.kernel, cfg.noise_var, xs, rng);

  Task task;
  task.ctx_x.assign(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(n));
  task.ctx_y.assign(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(n));
  task.tgt_x.assign(xs.begin() + static_cast<std::ptrdiff_t>(n), xs.end());
  task.tgt_y.assign(ys.begin() + static_cast<std::ptrdiff_t>(n), ys.end());
  task.meta = TaskMeta{cfg.tag(), key.seed, key.index, key.purpose};
  return task;
}

}  // namespace gnp::tasks
