#pragma once

#include <Eigen/Dense>

#include <concepts>
#include <functional>

namespace mreg {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Real scalars only: forms are bilinear, not sesquilinear.
template <typename Scalar>
concept RealScalar = std::floating_point<Scalar>;

// t -> coordinate matrix of an operator.
template <typename Scalar>
using OperatorFamily = std::function<Matrix<Scalar>(Scalar)>;

// t -> coordinate vector.
template <typename Scalar>
using VectorFamily = std::function<Vector<Scalar>(Scalar)>;

}  // namespace mreg
