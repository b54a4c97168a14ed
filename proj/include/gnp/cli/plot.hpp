#pragma once

#include <cstdint>
#include <string>

#include "gnp/models/model.hpp"
#include "gnp/tasks/task.hpp"

namespace gnp::cli {

struct PredictivePlots {
  std::string covariance_svg;
  /// The plotted covariance as text: a "# rows cols" header, then one row per line.
  std::string covariance_txt;
  std::string samples_svg;
};

/// Predicts on `points` evenly spaced inputs spanning the task's context and
/// targets, then renders the latent covariance (one panel per output) and a
/// sample plot with context markers, the predictive centre, a +-2 marginal
/// standard deviation band and `samples` noise-free paths. With a copula the
/// centre and band are the latent ones mapped through the marginal transform.
PredictivePlots plot_predictive(const models::Model& model, const tasks::Task& task, std::size_t points,
                                std::size_t samples, std::uint64_t seed);

/// Parses the text written by plot_predictive.
nd::Tensor parse_matrix_text(const std::string& text);

}  // namespace gnp::cli
