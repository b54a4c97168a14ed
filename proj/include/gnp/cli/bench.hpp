#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gnp/cli/config.hpp"

namespace gnp::cli {

struct BenchRow {
  models::HeadKind head = models::HeadKind::mean_field;
  std::string phase;  ///< "forward" or "loglik"
  std::size_t n_context = 0;
  std::size_t n_targets = 0;
  std::size_t repeats = 0;
  double median_seconds = 0.0;
  std::optional<double> iqr_seconds;  ///< absent for a single repeat
  std::size_t peak_bytes = 0;         ///< tensor bytes above the pre-phase baseline
};

struct BenchFit {
  models::HeadKind head = models::HeadKind::mean_field;
  std::string phase;
  double exponent = 0.0;  ///< least-squares slope of log time against log M
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<BenchFit> fits;
};

/// Median and inter-quartile range (linear interpolation between order
/// statistics). The range is absent for fewer than two values.
std::pair<double, std::optional<double>> median_iqr(std::vector<double> values);

/// Least-squares slope of log(y) on log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Times one forward pass and one log-likelihood evaluation of the model for
/// each head and target count in `config.bench`.
BenchReport run_bench(const ExperimentConfig& config, std::ostream& log);

std::string bench_csv(const ExperimentConfig& config, const BenchReport& report);
std::string bench_fit_csv(const ExperimentConfig& config, const BenchReport& report);

inline constexpr const char* kBenchHeader =
    "run_id,model,head,phase,n_context,n_targets,repeats,median_seconds,iqr_seconds,peak_bytes";
inline constexpr const char* kBenchFitHeader = "run_id,model,head,phase,exponent,n_targets";

}  // namespace gnp::cli
