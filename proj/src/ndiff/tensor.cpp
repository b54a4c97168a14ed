#include "gnp/ndiff/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace gnp::nd {

namespace {

std::size_t extent_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string shape_string(const Shape& shape) { return fmt::format("({})", fmt::join(shape, ", ")); }

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(extent_product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::span<const double> values) : shape_(std::move(shape)) {
  if (extent_product(shape_) != values.size()) {
    throw ShapeError(fmt::format("tensor: shape {} needs {} values, got {}", shape_string(shape_),
                                 extent_product(shape_), values.size()));
  }
  values_.assign(values.begin(), values.end());
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError(fmt::format("tensor: item() on shape {}", shape_string(shape_)));
  }
  return values_[0];
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.size() != size()) {
    throw ShapeError(
        fmt::format("tensor: += between {} and {}", shape_string(shape_), shape_string(other.shape_)));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

}  // namespace gnp::nd
