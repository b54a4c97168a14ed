#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gnp/cli/config.hpp"
#include "gnp/train/eval.hpp"

namespace gnp::cli {

/// One metrics row. `stderr_` and `n` are blank in the CSV when not applicable.
struct MetricRow {
  std::string model;
  std::string head;
  std::string metric;
  double value = 0.0;
  std::optional<double> stderr_;
  std::size_t n = 0;
};

inline constexpr const char* kMetricsHeader = "run_id,seed,model,head,generator,metric,value,stderr,n";

std::string metrics_csv(const ExperimentConfig& config, const std::vector<MetricRow>& rows);

struct RunResult {
  std::vector<MetricRow> metrics;
  std::filesystem::path out_dir;
};

/// generate -> train -> evaluate -> plot. Writes config.cfg, history.csv,
/// model.gnpc, metrics.csv, covariance.svg, covariance.txt, samples.svg and
/// manifest.json into `out_dir`. On failure the manifest is still written,
/// flagged "failed", and the exception propagates.
RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir, std::size_t threads,
                         std::ostream& log);

/// Writes `bytes` to `path` and records it for the manifest.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path root);
  void write(const std::string& relative, const std::string& bytes);
  /// Records a file produced by other code.
  void adopt(const std::string& relative);
  const std::filesystem::path& root() const noexcept { return root_; }
  const std::vector<std::string>& files() const noexcept { return files_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

/// manifest.json: config hash, code version, timestamps, status, and every
/// emitted file with its SHA-256.
void write_manifest(const ArtifactWriter& artifacts, const ExperimentConfig& config, const std::string& command,
                    const std::string& started, const std::string& status, const std::string& error,
                    const std::vector<std::pair<std::string, std::string>>& notes = {});

std::string code_version();
std::string utc_now();

}  // namespace gnp::cli
