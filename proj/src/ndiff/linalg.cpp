#include "gnp/ndiff/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "eigen_map.hpp"

namespace gnp::nd {

CholeskyResult cholesky(const Tensor& s) {
  const std::size_t n = s.rows();
  if (s.cols() != n) throw ShapeError(fmt::format("cholesky: matrix is not square: {}", shape_string(s.shape())));

  double scale = 0.0;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    scale += s(i, i);
    max_diag = std::max(max_diag, std::abs(s(i, i)));
  }
  scale = n > 0 ? scale / static_cast<double>(n) : 0.0;
  const double sym_tol = 1e-10 * std::max(1.0, max_diag);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(s(i, j) - s(j, i)) > sym_tol) {
        throw std::invalid_argument(
            fmt::format("cholesky: matrix not symmetric at ({}, {}): {} vs {}", i, j, s(i, j), s(j, i)));
      }
    }
  }
  if (scale <= 0.0) scale = 1.0;

  // A symmetric row-major buffer reads the same as column-major. Factoring
  // the upper triangle of that view in place, S = U^T U, leaves U^T = L in
  // the row-major lower triangle.
  Tensor out = Tensor::matrix(n, n);
  const auto dim = static_cast<Eigen::Index>(n);
  double attempted = 0.0;
  for (std::size_t level = 0; level < kJitterLadder.size(); ++level) {
    attempted = kJitterLadder[level] * scale;
    std::copy(s.data(), s.data() + s.size(), out.data());
    for (std::size_t i = 0; i < n; ++i) out(i, i) += attempted;
    Eigen::Map<Eigen::MatrixXd> view(out.data(), dim, dim);
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>, Eigen::Upper> llt(view);
    if (llt.info() != Eigen::Success) continue;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) out(i, j) = 0.0;
    if (!as_matrix(out).allFinite()) continue;
    return CholeskyResult{std::move(out), attempted, static_cast<int>(level)};
  }
  throw NotPositiveDefinite(
      fmt::format("cholesky: {}x{} matrix not positive definite (jitter up to {:.3g})", n, n, attempted),
      attempted);
}

Tensor psd_factor(const Tensor& s) {
  const std::size_t n = s.rows();
  if (s.cols() != n) throw ShapeError(fmt::format("psd_factor: matrix is not square: {}", shape_string(s.shape())));
  Tensor out = Tensor::matrix(n, n);
  if (n == 0) return out;

  // Cholesky with diagonal pivoting, stopped once the largest remaining
  // Schur-complement diagonal is negligible.
  std::vector<double> residual(n);
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    residual[i] = s(i, i);
    max_diag = std::max(max_diag, std::abs(s(i, i)));
  }
  const double tol = 1e-12 * std::max(max_diag, std::numeric_limits<double>::min());
  std::vector<bool> used(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!used[i] && (piv == n || residual[i] > residual[piv])) piv = i;
    const double d = residual[piv];
    if (!std::isfinite(d)) throw NotPositiveDefinite("psd_factor: non-finite diagonal", 0.0);
    if (d <= tol) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!used[i] && residual[i] < -1e-6 * std::max(1.0, max_diag)) {
          throw NotPositiveDefinite(
              fmt::format("psd_factor: matrix is not positive semi-definite (residual {:.3g})", residual[i]), 0.0);
        }
      }
      break;
    }
    used[piv] = true;
    const double root = std::sqrt(d);
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i] && i != piv) continue;
      double v = s(i, piv);
      for (std::size_t j = 0; j < k; ++j) v -= out(i, j) * out(piv, j);
      out(i, k) = i == piv ? root : v / root;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!used[i]) residual[i] -= out(i, k) * out(i, k);
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError(fmt::format("matmul: {} x {}", shape_string(a.shape()), shape_string(b.shape())));
  }
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError(fmt::format("matmul_tn: {}^T x {}", shape_string(a.shape()), shape_string(b.shape())));
  }
  Tensor out = Tensor::matrix(a.cols(), b.cols());
  if (a.rows() == 0) return out;
  as_matrix(out).noalias() = as_matrix(a).transpose() * as_matrix(b);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError(fmt::format("matmul_nt: {} x {}^T", shape_string(a.shape()), shape_string(b.shape())));
  }
  Tensor out = Tensor::matrix(a.rows(), b.rows());
  if (a.cols() == 0) return out;
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b).transpose();
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out = Tensor::matrix(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor solve_lower(const Tensor& l, const Tensor& b) {
  if (l.rows() != l.cols() || l.rows() != b.rows()) {
    throw ShapeError(fmt::format("solve_lower: {} \\ {}", shape_string(l.shape()), shape_string(b.shape())));
  }
  Tensor out = Tensor::matrix(b.rows(), b.cols());
  if (b.size() == 0) return out;
  as_matrix(out) = as_matrix(l).triangularView<Eigen::Lower>().solve(as_matrix(b));
  return out;
}

Tensor solve_lower_transposed(const Tensor& l, const Tensor& b) {
  if (l.rows() != l.cols() || l.rows() != b.rows()) {
    throw ShapeError(
        fmt::format("solve_lower_transposed: {} \\ {}", shape_string(l.shape()), shape_string(b.shape())));
  }
  Tensor out = Tensor::matrix(b.rows(), b.cols());
  if (b.size() == 0) return out;
  as_matrix(out) = as_matrix(l).transpose().triangularView<Eigen::Upper>().solve(as_matrix(b));
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError(fmt::format("max_abs_diff: {} vs {}", shape_string(a.shape()), shape_string(b.shape())));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace gnp::nd
