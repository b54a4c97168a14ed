#pragma once

// Standard normal distribution helpers evaluated in the log domain where the
// tails would otherwise underflow.

namespace gnp::models {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_cdf(double x);
/// log Phi(x), accurate for all finite x (asymptotic series below -37).
double log_normal_cdf(double x);
/// log phi(x).
inline double log_normal_pdf(double x) { return -kLogSqrt2Pi - 0.5 * x * x; }
/// Phi^{-1}(p) for p in (0, 1) (Wichura's AS241, ~1e-16 relative).
double normal_quantile(double p);
/// The x with log(1 - Phi(x)) = log_q, for log_q < 0. Handles upper-tail
/// probabilities far below the smallest double.
double normal_quantile_upper_log(double log_q);

}  // namespace gnp::models
