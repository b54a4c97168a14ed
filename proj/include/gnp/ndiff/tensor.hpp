#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnp/ndiff/alloc.hpp"

namespace gnp::nd {

using Shape = std::vector<std::size_t>;
using Buffer = std::vector<double, TrackingAllocator<double>>;

std::string shape_string(const Shape& shape);

/// Raised when operand shapes are incompatible. The message names the op and
/// the offending tape nodes where applicable.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major array of doubles.
///
/// Most of the library treats tensors as matrices: rank-0 is 1x1, rank-1 of
/// length n is n x 1, and higher ranks collapse trailing extents into columns.
/// Feature maps for 1D convolutions are (channels, length).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::span<const double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, v); }
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor(Shape{rows, cols}, fill);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::span<const double> values) {
    return Tensor(Shape{rows, cols}, values);
  }
  /// n x 1 column.
  static Tensor column(std::span<const double> values) { return Tensor(Shape{values.size(), 1}, values); }
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::size_t rows() const noexcept { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const noexcept {
    if (shape_.size() <= 1) return 1;
    std::size_t c = 1;
    for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
    return c;
  }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return {values_.data(), values_.size()}; }
  std::span<const double> values() const noexcept { return {values_.data(), values_.size()}; }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }

  /// Value of a single-element tensor.
  double item() const;
  bool same_shape(const Tensor& other) const noexcept { return rows() == other.rows() && cols() == other.cols(); }
  std::vector<double> to_vector() const { return {values_.begin(), values_.end()}; }
  void fill(double v);
  /// Elementwise in-place accumulation; shapes must agree.
  Tensor& operator+=(const Tensor& other);

 private:
  Shape shape_;
  Buffer values_;
};

}  // namespace gnp::nd
