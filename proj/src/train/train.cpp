#include "gnp/train/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gnp/models/checkpoint.hpp"
#include "gnp/ndiff/linalg.hpp"
#include "gnp/ndiff/ops.hpp"
#include "gnp/tasks/task_io.hpp"
#include "gnp/train/optim.hpp"
#include "parallel.hpp"

namespace gnp::train {

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw std::invalid_argument(fmt::format("train.{} must be >= 1, got {}", name, v));
  };
  positive(epochs, "epochs");
  positive(iterations, "iterations");
  positive(batch, "batch");
  positive(validation_every, "validation_every");
  positive(validation_tasks, "validation_tasks");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument(fmt::format("train.learning_rate must be > 0, got {}", learning_rate));
  }
  if (!(grad_clip > 0.0)) throw std::invalid_argument(fmt::format("train.grad_clip must be > 0, got {}", grad_clip));
}

bool TrainHistory::same_trajectory(const TrainHistory& other) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  if (!same(initial_validation, other.initial_validation) || best_epoch != other.best_epoch ||
      !same(best_validation, other.best_validation) || epochs.size() != other.epochs.size()) {
    return false;
  }
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = other.epochs[i];
    if (a.epoch != b.epoch || !same(a.train_objective, b.train_objective) ||
        !same(a.validation_objective, b.validation_objective) || a.jitter_events != b.jitter_events ||
        a.skipped_steps != b.skipped_steps) {
      return false;
    }
  }
  return true;
}

ObjectiveError::ObjectiveError(const tasks::Task& task, const std::string& detail)
    : std::runtime_error(fmt::format("objective failed on task (generator {}, seed {}, index {}, purpose {}): {}",
                                     task.meta.generator, task.meta.seed, task.meta.index,
                                     tasks::to_string(task.meta.purpose), detail)) {}

nd::Var task_objective(nd::Tape& tape, const models::Model& model, const tasks::Task& task) {
  if (task.num_targets() == 0) throw ObjectiveError(task, "task has no targets");
  try {
    const models::PredictiveVars pred = model.forward(tape, task);
    const nd::Tensor y = nd::Tensor::column(models::stack_outputs(task.tgt_y, task.dim_y));
    return nd::scale(models::predictive_loglik(pred, y), 1.0 / static_cast<double>(task.num_targets()));
  } catch (const nd::NotPositiveDefinite& e) {
    throw ObjectiveError(task, e.what());
  } catch (const std::domain_error& e) {
    throw ObjectiveError(task, e.what());
  }
}

ObjectiveValue objective(const models::Model& model, std::span<const tasks::Task> batch, std::size_t threads) {
  if (batch.empty()) throw std::invalid_argument("objective: empty batch");
  std::vector<double> values(batch.size());
  std::vector<nd::Gradients> grads(batch.size());
  std::vector<std::size_t> jitter(batch.size());
  detail::parallel_for(batch.size(), threads, [&](std::size_t i) {
    nd::Tape tape;
    const nd::Var obj = task_objective(tape, model, batch[i]);
    values[i] = obj.value().item();
    grads[i] = tape.backward(obj);
    jitter[i] = tape.jitter_events();
  });
  ObjectiveValue out;
  out.grads = nd::zero_gradients(model.params());
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.value += w * values[i];
    out.jitter_events += jitter[i];
    for (std::size_t e = 0; e < out.grads.size(); ++e) {
      auto dst = out.grads[e].values();
      const auto src = grads[i][e].values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
    }
  }
  return out;
}

double objective_value(const models::Model& model, std::span<const tasks::Task> batch, std::size_t threads) {
  if (batch.empty()) throw std::invalid_argument("objective: empty batch");
  std::vector<double> values(batch.size());
  detail::parallel_for(batch.size(), threads, [&](std::size_t i) {
    nd::Tape tape;
    values[i] = task_objective(tape, model, batch[i]).value().item();
  });
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(batch.size());
}

TrainResult train(const models::ModelSpec& spec, const tasks::GeneratorConfig& generator, const TrainConfig& config,
                  const TrainOptions& options) {
  spec.validate();
  config.validate();
  if (tasks::generator_dim_y(generator) != spec.dim_y) {
    throw std::invalid_argument(fmt::format("train: generator produces dim_y {} but model.dim_y is {}",
                                            tasks::generator_dim_y(generator), spec.dim_y));
  }
  const std::size_t threads = std::max<std::size_t>(options.threads, 1);
  models::Model model(spec, config.seed);
  Adam adam(model.params(), AdamConfig{config.learning_rate});

  auto make_tasks = [&](std::size_t first, std::size_t count, Purpose purpose) {
    std::vector<tasks::Task> out(count);
    detail::parallel_for(count, threads, [&](std::size_t i) {
      out[i] = tasks::generate(generator, tasks::TaskKey{config.seed, first + i, purpose});
    });
    return out;
  };
  const std::vector<tasks::Task> validation = make_tasks(0, config.validation_tasks, Purpose::validation_task);

  TrainResult result{model, {}};
  TrainHistory& history = result.history;
  history.initial_validation = objective_value(model, validation, threads);
  history.best_validation = history.initial_validation;
  nd::ParamStore best = model.params();

  std::size_t next_task = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    const std::size_t skipped_before = adam.skipped();
    double total = 0.0;
    for (std::size_t it = 0; it < config.iterations; ++it) {
      const std::vector<tasks::Task> batch = make_tasks(next_task, config.batch, Purpose::train_task);
      next_task += config.batch;
      ObjectiveValue obj = objective(model, batch, threads);
      total += obj.value;
      rec.jitter_events += obj.jitter_events;
      clip_global_norm(obj.grads, config.grad_clip);
      adam.step(model.params(), obj.grads);
    }
    rec.train_objective = total / static_cast<double>(config.iterations);
    rec.skipped_steps = adam.skipped() - skipped_before;
    rec.validation_objective = std::numeric_limits<double>::quiet_NaN();
    if (epoch % config.validation_every == 0 || epoch == config.epochs) {
      rec.validation_objective = objective_value(model, validation, threads);
      if (rec.validation_objective > history.best_validation) {
        history.best_validation = rec.validation_objective;
        history.best_epoch = epoch;
        best = model.params();
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.epochs.push_back(rec);
    if (!options.checkpoint_dir.empty() && options.checkpoint_every > 0 && epoch % options.checkpoint_every == 0) {
      std::filesystem::create_directories(options.checkpoint_dir);
      models::save_checkpoint(model, options.checkpoint_dir / fmt::format("epoch-{:04d}.gnpc", epoch));
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  if (config.early_stop) {
    result.model = models::Model(spec, std::move(best));
  } else {
    result.model = std::move(model);
  }
  return result;
}

}  // namespace gnp::train
