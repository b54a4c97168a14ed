#include "gnp/train/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "gnp/ndiff/linalg.hpp"
#include "gnp/train/train.hpp"
#include "parallel.hpp"

namespace gnp::train {

MeanSe mean_se(std::span<const double> values) {
  MeanSe out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.stderr_ = std::sqrt(sq / static_cast<double>(out.n - 1) / static_cast<double>(out.n));
  }
  return out;
}

gp::GaussianMoments oracle_moments(const tasks::GaussianTaskConfig& cfg, const tasks::Task& task) {
  return gp::with_noise(gp::posterior(cfg.kernel, cfg.noise_var, task.ctx_x, task.ctx_y, task.tgt_x), cfg.noise_var);
}

models::GaussianPredictive oracle_predictive(const tasks::GaussianTaskConfig& cfg, const tasks::Task& task) {
  const gp::GaussianMoments latent = gp::posterior(cfg.kernel, cfg.noise_var, task.ctx_x, task.ctx_y, task.tgt_x);
  models::GaussianPredictive p;
  p.form = models::CovarianceForm::low_rank;
  p.num_targets = latent.size();
  p.mean = latent.mean;
  p.basis = nd::psd_factor(latent.covariance);
  p.noise.assign(latent.size(), cfg.noise_var);
  return p;
}

EvalResult eval_loglik(const models::Model& model, std::span<const tasks::Task> tasks,
                       const tasks::GaussianTaskConfig* gaussian, std::size_t threads) {
  if (tasks.size() < 2) throw std::invalid_argument("eval_loglik: need at least 2 tasks");
  EvalResult out;
  out.per_task.resize(tasks.size());
  std::vector<double> full(tasks.size()), diag(tasks.size());
  detail::parallel_for(tasks.size(), threads, [&](std::size_t i) {
    nd::Tape tape;
    out.per_task[i] = task_objective(tape, model, tasks[i]).value().item();
    if (gaussian != nullptr) {
      const gp::GaussianMoments m = oracle_moments(*gaussian, tasks[i]);
      const double per = 1.0 / static_cast<double>(tasks[i].num_targets());
      full[i] = gp::oracle_loglik(m, tasks[i].tgt_y, false) * per;
      diag[i] = gp::oracle_loglik(m, tasks[i].tgt_y, true) * per;
    }
  });
  out.model = mean_se(out.per_task);
  if (gaussian != nullptr) {
    out.oracle = mean_se(full);
    out.diagonal_oracle = mean_se(diag);
  }
  return out;
}

EvalResult eval_loglik(const models::Model& model, const tasks::GeneratorConfig& generator, std::uint64_t seed,
                       std::size_t n_tasks, Purpose purpose, std::size_t threads) {
  std::vector<tasks::Task> ts(n_tasks);
  detail::parallel_for(n_tasks, threads,
                       [&](std::size_t i) { ts[i] = tasks::generate(generator, tasks::TaskKey{seed, i, purpose}); });
  return eval_loglik(model, ts, tasks::as_gaussian(generator), threads);
}

ThresholdResult threshold_task(const models::GaussianPredictive& pred, const tasks::Task& task,
                               const ThresholdConfig& config, std::uint64_t seed) {
  if (task.num_context() == 0) throw std::invalid_argument("threshold_task: the context is empty");
  if (config.samples < 100) throw std::invalid_argument("threshold_task: need at least 100 samples");
  if (config.output >= task.dim_y) throw std::invalid_argument("threshold_task: output index out of range");
  const std::size_t m = task.num_targets(), dy = task.dim_y, a = config.output;
  if (pred.size() != m * dy) throw std::invalid_argument("threshold_task: predictive does not match the task");

  ThresholdResult out;
  double ctx_max = -INFINITY;
  for (std::size_t i = 0; i < task.num_context(); ++i) ctx_max = std::max(ctx_max, task.ctx_y[i * dy + a]);
  out.threshold = config.factor * ctx_max;
  double tgt_max = -INFINITY;
  for (std::size_t i = 0; i < m; ++i) tgt_max = std::max(tgt_max, task.tgt_y[i * dy + a]);
  out.event = tgt_max > out.threshold;

  CounterRng rng(seed, task.meta.index, Purpose::threshold);
  const nd::Tensor paths = models::predictive_sample(pred, rng, config.samples, !config.noise_free);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < config.samples; ++s) {
    for (std::size_t i = 0; i < m; ++i) {
      if (paths(a * m + i, s) > out.threshold) {
        ++hits;
        break;
      }
    }
  }
  const double n = static_cast<double>(config.samples);
  const double lo = 1.0 / (n + 2.0);
  out.probability = std::clamp(static_cast<double>(hits) / n, lo, 1.0 - lo);
  out.log_score = out.event ? std::log(out.probability) : std::log1p(-out.probability);
  return out;
}

ThresholdResult threshold_task(const models::Model& model, const tasks::Task& task, const ThresholdConfig& config,
                               std::uint64_t seed) {
  return threshold_task(model.predict(task), task, config, seed);
}

EquivarianceReport equivariance_check(const models::Model& model, const tasks::Task& task, double shift_grid_steps) {
  const double u = shift_grid_steps / model.spec().points_per_unit;
  tasks::Task shifted = task;
  for (double& x : shifted.ctx_x) x += u;
  for (double& x : shifted.tgt_x) x += u;
  const models::GaussianPredictive a = model.predict(task);
  const models::GaussianPredictive b = model.predict(shifted);
  EquivarianceReport r;
  for (std::size_t i = 0; i < a.size(); ++i) r.mean_deviation = std::max(r.mean_deviation, std::abs(a.mean[i] - b.mean[i]));
  r.covariance_deviation = nd::max_abs_diff(a.covariance(true), b.covariance(true));
  return r;
}

}  // namespace gnp::train
