#pragma once

#include <Eigen/Core>

#include "gnp/ndiff/tensor.hpp"

namespace gnp::nd {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajorMatrix>;
using ConstMatMap = Eigen::Map<const RowMajorMatrix>;

inline MatMap as_matrix(Tensor& t) {
  return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

}  // namespace gnp::nd
