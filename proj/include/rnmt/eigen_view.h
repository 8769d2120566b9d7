#pragma once

#include <Eigen/Core>

#include "rnmt/tensor.h"

// Zero-copy Eigen views over tensor buffers, treating a tensor as
// rows() x cols() row-major.
namespace rnmt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;
using RowView = Eigen::Map<Eigen::RowVectorXd>;
using ConstRowView = Eigen::Map<const Eigen::RowVectorXd>;

inline ConstMatrixView as_matrix(const Tensor& t) {
  return ConstMatrixView(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline MatrixView as_matrix(Tensor& t) {
  return MatrixView(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline MatrixView grad_matrix(const Tensor& t) {
  return MatrixView(t.grad().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline ConstRowView as_row(const Tensor& t) {
  return ConstRowView(t.data().data(), static_cast<Eigen::Index>(t.size()));
}
inline RowView grad_row(const Tensor& t) { return RowView(t.grad().data(), static_cast<Eigen::Index>(t.size())); }

}  // namespace rnmt
