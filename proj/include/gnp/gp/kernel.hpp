#pragma once

#include <span>
#include <string>
#include <string_view>

#include "gnp/ndiff/tensor.hpp"

namespace gnp::gp {

enum class KernelKind { eq, matern52, noisy_mixture, weakly_periodic };

std::string_view to_string(KernelKind kind);
/// Parses "eq", "matern52", "noisy_mixture" or "weakly_periodic".
KernelKind parse_kernel_kind(std::string_view name);

/// Stationary covariance on scalar inputs.
///
/// - eq:              variance * exp(-r^2 / (2 lengthscale^2))
/// - matern52:        variance * (1 + r/l + r^2/(3 l^2)) exp(-r/l)
/// - noisy_mixture:   eq(variance, lengthscale) + eq(variance2, lengthscale2)
/// - weakly_periodic: eq(variance, lengthscale) * exp(-2 sin^2(pi r / period) / periodic_lengthscale^2)
struct KernelSpec {
  KernelKind kind = KernelKind::eq;
  double variance = 1.0;
  double lengthscale = 1.0;
  double variance2 = 1.0;
  double lengthscale2 = 0.25;
  double period = 0.25;
  double periodic_lengthscale = 1.0;

  /// The synthetic-task presets: EQ (1, 1); Matern-5/2 (1, 1); mixture of
  /// EQ (1, 1) and EQ (1, 0.25); EQ (1, 1) times periodic (p = 0.25, l = 1).
  static KernelSpec preset(KernelKind kind);

  /// Throws std::invalid_argument naming the first non-positive parameter.
  void validate() const;
  /// k(x, x).
  double total_variance() const;
};

double kernel_eval(const KernelSpec& spec, double x, double x2);
/// The periodic factor of the weakly periodic kernel as a function of x - x'.
double periodic_factor(const KernelSpec& spec, double delta);

/// Entry (i, j) = k(xs[i], ys[j]).
nd::Tensor gram(const KernelSpec& spec, std::span<const double> xs, std::span<const double> ys);

}  // namespace gnp::gp
