#pragma once

#include <array>
#include <stdexcept>

#include "gnp/ndiff/tensor.hpp"

namespace gnp::nd {

/// Relative jitter levels tried in order; each is multiplied by mean(diag(S)).
inline constexpr std::array<double, 4> kJitterLadder = {0.0, 1e-8, 1e-6, 1e-4};

class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(const std::string& what, double attempted_jitter)
      : std::runtime_error(what), jitter_(attempted_jitter) {}
  /// Largest absolute jitter that was tried.
  double jitter() const noexcept { return jitter_; }

 private:
  double jitter_;
};

struct CholeskyResult {
  Tensor factor;        ///< Lower triangular, factor * factor^T = S + jitter * I.
  double jitter = 0.0;  ///< Absolute jitter added to the diagonal.
  int level = 0;        ///< Index into kJitterLadder that succeeded.
};

/// Cholesky factorization with the jitter escalation ladder. S must be square
/// and symmetric within 1e-10 (relative to its largest diagonal entry).
CholeskyResult cholesky(const Tensor& s);

/// Square-root factor F with F F^T = S for symmetric positive semi-definite S,
/// from a diagonally pivoted Cholesky that stops at numerical rank (columns
/// past the rank are zero). Used for sampling, where rank-deficient covariances are
/// legitimate and jitter would blur exact ties.
Tensor psd_factor(const Tensor& s);

Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T b
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// L^{-1} B for lower-triangular L.
Tensor solve_lower(const Tensor& l, const Tensor& b);
/// L^{-T} B for lower-triangular L.
Tensor solve_lower_transposed(const Tensor& l, const Tensor& b);

/// Max-abs entrywise difference; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace gnp::nd
