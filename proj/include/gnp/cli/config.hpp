#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gnp/models/model_spec.hpp"
#include "gnp/tasks/generator.hpp"
#include "gnp/train/eval.hpp"
#include "gnp/train/train.hpp"

namespace gnp::cli {

/// Invalid configuration. `field()` is the dotted path of the offending key,
/// e.g. "model.d_g", or empty for file-level problems.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& detail);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct EvalConfig {
  std::size_t test_tasks = 0;
  /// Tasks scored on the threshold-estimation task (0 disables it).
  std::size_t threshold_tasks = 0;
  train::ThresholdConfig threshold;
  /// Tasks used for the translation-equivariance report (0 disables it).
  std::size_t equivariance_tasks = 0;
  /// Dense target grid and sample paths of the emitted plots.
  std::size_t plot_points = 200;
  std::size_t plot_samples = 3;
};

struct BenchConfig {
  std::size_t context = 0;
  std::vector<std::size_t> targets;
  /// Heads timed in turn; the rest of the model block is shared.
  std::vector<models::HeadKind> heads;
  std::size_t repeats = 0;
  std::size_t warmups = 3;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out_dir;
  tasks::GeneratorConfig generator;
  models::ModelSpec model;
  train::TrainConfig train;
  std::size_t checkpoint_every = 0;
  EvalConfig eval;
  std::optional<BenchConfig> bench;

  /// Stable text form; parse_config(canonical_text()) reproduces the config.
  std::string canonical_text() const;
  /// Hex SHA-256 of canonical_text() with the output directory left out.
  std::string hash() const;
  /// Short identifier derived from hash().
  std::string run_id() const;
  /// e.g. "convgnp-kvv" or "convgnp-kvv-copula".
  std::string model_label() const;
};

/// e.g. "convgnp-kvv" or "convgnp-kvv-copula".
std::string model_label(const models::ModelSpec& spec);

/// Parses the sectioned key-value format. Every scientific parameter must be
/// present; unknown keys, duplicate keys, and malformed values are errors.
/// A preset named by `base_preset` or by an `experiment.preset` key supplies
/// every key the text does not set.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>",
                              const std::optional<std::string>& base_preset = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::optional<std::string>& base_preset = std::nullopt);

/// Bundled configurations.
std::vector<std::string> preset_names();
/// Throws ConfigError listing the available presets if `name` is unknown.
std::string preset_text(std::string_view name);

/// Sets the seed of the experiment and of every stream derived from it.
void set_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace gnp::cli
