#pragma once

#include "mreg/errors.hpp"
#include "mreg/linalg.hpp"
#include "mreg/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <string>

namespace mreg {

// Which norm a coordinate vector is measured in. H and V elements share one
// coordinate system; V' elements are functional coordinates f, acting on v
// by f^T v.
enum class Space { H, V, Vdual };

namespace detail {

template <typename Scalar>
void require_spd(const Matrix<Scalar>& m, const char* name) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    std::ostringstream os;
    os << name << " must be a non-empty square matrix (got " << m.rows() << "x"
       << m.cols() << ")";
    throw DimensionError(os.str());
  }
  if (!m.allFinite()) throw ValidationError(std::string(name) + " has non-finite entries");
  const Scalar lambda_min = min_symmetric_eigenvalue(m);
  if (!is_symmetric(m, Scalar(1e-12))) {
    std::ostringstream os;
    os << name << " is not symmetric (relative asymmetry " << asymmetry(m)
       << ", minimal eigenvalue of symmetric part " << lambda_min << ")";
    throw ValidationError(os.str());
  }
  if (!(lambda_min > 0)) {
    std::ostringstream os;
    os << name << " is not positive definite (minimal eigenvalue " << lambda_min << ")";
    throw ValidationError(os.str());
  }
}

}  // namespace detail

// Finite-dimensional model of V -> H -> V' with
//   (u|v)_H = u^T G_H v,  (u|v)_V = u^T G_V v,  <f, v> = f^T v.
// Immutable after construction.
template <RealScalar Scalar>
class GelfandTriple {
 public:
  using MatrixType = Matrix<Scalar>;
  using VectorType = Vector<Scalar>;

  GelfandTriple(MatrixType gram_h, MatrixType gram_v)
      : gram_h_(std::move(gram_h)), gram_v_(std::move(gram_v)) {
    detail::require_spd(gram_h_, "gram_H");
    detail::require_spd(gram_v_, "gram_V");
    if (gram_h_.rows() != gram_v_.rows()) {
      std::ostringstream os;
      os << "gram_H is " << gram_h_.rows() << "x" << gram_h_.rows() << " but gram_V is "
         << gram_v_.rows() << "x" << gram_v_.rows();
      throw DimensionError(os.str());
    }
    // Symmetrize exactly so the factorizations see a symmetric matrix.
    gram_h_ = symmetric_part(gram_h_);
    gram_v_ = symmetric_part(gram_v_);
    llt_h_.compute(gram_h_);
    llt_v_.compute(gram_v_);
    if (llt_h_.info() != Eigen::Success || llt_v_.info() != Eigen::Success)
      throw ValidationError("Cholesky factorization of a Gram matrix failed");

    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixType> ges(gram_h_, gram_v_);
    if (ges.info() != Eigen::Success)
      throw NumericalError("generalized eigensolver failed for (gram_H, gram_V)");
    const Index top = dim() - 1;
    c_h_ = std::sqrt(ges.eigenvalues()(top));
    extremal_ = ges.eigenvectors().col(top);
  }

  Index dim() const { return gram_h_.rows(); }
  const MatrixType& gram_h() const { return gram_h_; }
  const MatrixType& gram_v() const { return gram_v_; }

  // Smallest constant with ||u||_H <= c_H ||u||_V.
  Scalar c_h() const { return c_h_; }

  // A vector attaining ||u||_H = c_H ||u||_V.
  const VectorType& extremal_vector() const { return extremal_; }

  template <typename A, typename B>
  Scalar inner_h(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) const {
    check(u);
    check(v);
    return u.dot(gram_h_ * v);
  }
  template <typename A, typename B>
  Scalar inner_v(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) const {
    check(u);
    check(v);
    return u.dot(gram_v_ * v);
  }
  template <typename A>
  Scalar norm_h(const Eigen::MatrixBase<A>& u) const {
    check(u);
    return (llt_h_.matrixU() * u).norm();
  }
  template <typename A>
  Scalar norm_v(const Eigen::MatrixBase<A>& u) const {
    check(u);
    return (llt_v_.matrixU() * u).norm();
  }

  // ||f||_{V'} = sqrt(f^T G_V^{-1} f).
  template <typename A>
  Scalar dual_norm(const Eigen::MatrixBase<A>& f) const {
    check(f);
    return llt_v_.matrixL().solve(f.eval()).norm();
  }

  template <typename A>
  Scalar norm(const Eigen::MatrixBase<A>& x, Space space) const {
    switch (space) {
      case Space::H: return norm_h(x);
      case Space::V: return norm_v(x);
      case Space::Vdual: return dual_norm(x);
    }
    return Scalar(0);
  }

  template <typename A, typename B>
  Scalar pairing(const Eigen::MatrixBase<A>& f, const Eigen::MatrixBase<B>& v) const {
    check(f);
    check(v);
    return f.dot(v);
  }

  // g in H seen as the functional v -> (g|v)_H.
  template <typename A>
  VectorType embed_h_to_vprime(const Eigen::MatrixBase<A>& g) const {
    check(g);
    return gram_h_ * g;
  }

  // Riesz representatives: G_V^{-1} f in V, G_H^{-1} f in H.
  template <typename A>
  VectorType riesz_v(const Eigen::MatrixBase<A>& f) const {
    check(f);
    return llt_v_.solve(f.eval());
  }
  template <typename A>
  VectorType riesz_h(const Eigen::MatrixBase<A>& f) const {
    check(f);
    return llt_h_.solve(f.eval());
  }
  template <typename A>
  MatrixType solve_h(const Eigen::MatrixBase<A>& rhs) const {
    return llt_h_.solve(rhs.eval());
  }

  const Eigen::LLT<MatrixType>& llt_h() const { return llt_h_; }
  const Eigen::LLT<MatrixType>& llt_v() const { return llt_v_; }

  // Operator norm of the coordinate map x -> X x between the given spaces:
  // || W_to X W_from^{-1} ||_2 with W the whitening of each norm.
  MatrixType whitened(const MatrixType& x, Space from, Space to) const {
    if (x.rows() != dim() || x.cols() != dim())
      throw DimensionError("operator matrix does not match the triple dimension");
    MatrixType y;
    switch (from) {
      case Space::H:
        y = llt_h_.matrixL().solve(x.transpose()).transpose();
        break;
      case Space::V:
        y = llt_v_.matrixL().solve(x.transpose()).transpose();
        break;
      case Space::Vdual:
        y = x * MatrixType(llt_v_.matrixL());
        break;
    }
    switch (to) {
      case Space::H: return llt_h_.matrixU() * y;
      case Space::V: return llt_v_.matrixU() * y;
      case Space::Vdual: return llt_v_.matrixL().solve(y);
    }
    return y;
  }

  Scalar operator_norm(const MatrixType& x, Space from, Space to) const {
    return spectral_norm(whitened(x, from, to));
  }

 private:
  template <typename A>
  void check(const Eigen::MatrixBase<A>& x) const {
    if (x.rows() != dim() || x.cols() != 1) {
      std::ostringstream os;
      os << "vector of length " << x.rows() << " does not match triple dimension " << dim();
      throw DimensionError(os.str());
    }
  }

  MatrixType gram_h_;
  MatrixType gram_v_;
  Eigen::LLT<MatrixType> llt_h_;
  Eigen::LLT<MatrixType> llt_v_;
  Scalar c_h_{};
  VectorType extremal_;
};

template <RealScalar Scalar>
GelfandTriple<Scalar> new_triple(Matrix<Scalar> gram_h, Matrix<Scalar> gram_v) {
  return GelfandTriple<Scalar>(std::move(gram_h), std::move(gram_v));
}

// Free-function spellings used throughout the tests and CLI.
template <RealScalar Scalar, typename A>
Scalar dual_norm(const GelfandTriple<Scalar>& triple, const Eigen::MatrixBase<A>& f) {
  return triple.dual_norm(f);
}

template <RealScalar Scalar, typename A>
Vector<Scalar> embed_h_to_vprime(const GelfandTriple<Scalar>& triple,
                                 const Eigen::MatrixBase<A>& g) {
  return triple.embed_h_to_vprime(g);
}

}  // namespace mreg
