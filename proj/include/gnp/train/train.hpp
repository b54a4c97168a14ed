#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gnp/models/model.hpp"
#include "gnp/tasks/generator.hpp"

namespace gnp::train {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t iterations = 256;  ///< optimizer steps per epoch
  std::size_t batch = 8;         ///< tasks per step
  double learning_rate = 5e-4;
  std::uint64_t seed = 0;
  std::size_t validation_every = 1;  ///< epochs between validation passes
  std::size_t validation_tasks = 128;
  /// Return the snapshot with the best validation objective instead of the last.
  bool early_stop = true;
  double grad_clip = 10.0;

  /// Throws std::invalid_argument naming the offending field as train.<name>.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_objective = 0.0;       ///< mean over the epoch's steps, nats/datapoint
  double validation_objective = 0.0;  ///< NaN when validation did not run this epoch
  double seconds = 0.0;
  std::size_t jitter_events = 0;
  std::size_t skipped_steps = 0;
};

struct TrainHistory {
  double initial_validation = 0.0;  ///< validation objective before the first step
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  ///< 0 means the initial parameters
  double best_validation = 0.0;

  /// Equality of everything except wall-clock seconds.
  bool same_trajectory(const TrainHistory& other) const;
};

/// Raised when a task's likelihood cannot be evaluated; names the task.
class ObjectiveError : public std::runtime_error {
 public:
  ObjectiveError(const tasks::Task& task, const std::string& detail);
};

/// Per-datapoint log-likelihood of one task, recorded on `tape`.
nd::Var task_objective(nd::Tape& tape, const models::Model& model, const tasks::Task& task);

struct ObjectiveValue {
  double value = 0.0;  ///< mean over tasks of loglik / num_targets
  nd::Gradients grads;
  std::size_t jitter_events = 0;
};

/// Mean per-datapoint log-likelihood over `batch` and its gradient. Tasks are
/// evaluated on separate tapes (in parallel when threads > 1) and reduced in
/// task order, so the result does not depend on the thread count.
ObjectiveValue objective(const models::Model& model, std::span<const tasks::Task> batch, std::size_t threads = 1);

/// Mean per-datapoint log-likelihood without gradients.
double objective_value(const models::Model& model, std::span<const tasks::Task> batch, std::size_t threads = 1);

struct TrainOptions {
  std::size_t threads = 1;
  /// When non-empty, a checkpoint is written here every `checkpoint_every` epochs.
  std::filesystem::path checkpoint_dir;
  std::size_t checkpoint_every = 0;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  models::Model model;
  TrainHistory history;
};

/// Task streams: training task k of the run is key (seed, k, train_task);
/// validation uses the fixed set (seed, i, validation_task).
TrainResult train(const models::ModelSpec& spec, const tasks::GeneratorConfig& generator, const TrainConfig& config,
                  const TrainOptions& options = {});

}  // namespace gnp::train
