#pragma once

#include "mreg/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace mreg {

template <typename Derived>
auto max_abs(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return m.size() == 0 ? Scalar(0) : m.cwiseAbs().maxCoeff();
}

// ||M - M^T||_max <= rtol * ||M||_max.
template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m,
                  typename Derived::Scalar rtol) {
  if (m.rows() != m.cols()) return false;
  return max_abs(m - m.transpose()) <= rtol * max_abs(m);
}

template <typename Derived>
auto asymmetry(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Scalar scale = max_abs(m);
  return scale == Scalar(0) ? Scalar(0) : max_abs(m - m.transpose()) / scale;
}

template <typename Derived>
auto symmetric_part(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return Matrix<Scalar>((m + m.transpose()) * Scalar(0.5));
}

template <typename Derived>
auto min_symmetric_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(symmetric_part(m),
                                                   Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Largest singular value.
template <typename Derived>
auto spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) return Scalar(0);
  Eigen::BDCSVD<Matrix<Scalar>> svd(m.eval());
  return svd.singularValues()(0);
}

template <typename Derived>
auto singular_values(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::BDCSVD<Matrix<Scalar>> svd(m.eval());
  return Vector<Scalar>(svd.singularValues());
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace mreg
