#pragma once

#include "mreg/evolve.hpp"
#include "mreg/forms.hpp"
#include "mreg/triple.hpp"

#include <Eigen/QR>

#include <cmath>
#include <random>

namespace mreg {

// Q diag(d) Q^T with Q Haar-like orthogonal and log-uniform d in [lo, hi].
template <RealScalar Scalar, typename Rng>
Matrix<Scalar> random_spd(Rng& rng, Index n, Scalar lo, Scalar hi) {
  std::normal_distribution<Scalar> normal;
  std::uniform_real_distribution<Scalar> unit(0, 1);
  Matrix<Scalar> g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  const Matrix<Scalar> q = Eigen::HouseholderQR<Matrix<Scalar>>(g).householderQ();
  Vector<Scalar> d(n);
  for (Index i = 0; i < n; ++i) d(i) = std::exp(std::log(lo) + unit(rng) * (std::log(hi) - std::log(lo)));
  return symmetric_part(Matrix<Scalar>(q * d.asDiagonal() * q.transpose()));
}

template <RealScalar Scalar, typename Rng>
Matrix<Scalar> random_matrix(Rng& rng, Index rows, Index cols, Scalar scale = 1) {
  std::normal_distribution<Scalar> normal(0, scale);
  Matrix<Scalar> m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

template <RealScalar Scalar, typename Rng>
Vector<Scalar> random_vector(Rng& rng, Index n, Scalar scale = 1) {
  return random_matrix<Scalar>(rng, n, 1, scale);
}

// Symmetric A1 with spectrum (relative to G_H) log-uniform in [lo, hi].
template <RealScalar Scalar>
struct RandomSymmetricForm {
  GelfandTriple<Scalar> triple;
  Matrix<Scalar> a1;
};

template <RealScalar Scalar, typename Rng>
RandomSymmetricForm<Scalar> random_symmetric_form(Rng& rng, Index n, Scalar lo = Scalar(0.1), Scalar hi = Scalar(1e4)) {
  const Matrix<Scalar> gh = random_spd<Scalar>(rng, n, Scalar(0.5), Scalar(2));
  const Matrix<Scalar> gv = gh + random_spd<Scalar>(rng, n, Scalar(0.1), Scalar(10));
  Eigen::LLT<Matrix<Scalar>> llt(gh);
  const Matrix<Scalar> l = llt.matrixL();
  // A1 = L S L^T has generalized spectrum equal to the spectrum of S.
  const Matrix<Scalar> s = random_spd<Scalar>(rng, n, lo, hi);
  return {GelfandTriple<Scalar>(gh, gv), symmetric_part(Matrix<Scalar>(l * s * l.transpose()))};
}

// Random maximal-regularity test problem with exactly known constants:
//   A1(t) = P + t Q    (extreme generalized eigenvalues of an affine
//                       symmetric family are attained at the endpoints),
//   A2(t) = R cos t    (M2 = |R|_{V->H} <= alpha, attained at t = 0),
//   B(t)  = c(t) I + G_H^{-1} W, W skew, so (B g|g)_H = c(t) |g|_H^2.
template <RealScalar Scalar, typename Rng>
EvolutionProblem<Scalar> random_mr_problem(Rng& rng, Index max_dim = 10) {
  std::uniform_int_distribution<Index> dim_dist(1, max_dim);
  std::uniform_real_distribution<Scalar> unit(0, 1);
  const Index n = dim_dist(rng);
  const Scalar T = Scalar(0.5) + unit(rng);
  const Matrix<Scalar> gh = random_spd<Scalar>(rng, n, Scalar(0.5), Scalar(2));
  const Matrix<Scalar> gv = gh + random_spd<Scalar>(rng, n, Scalar(0.2), Scalar(5));
  GelfandTriple<Scalar> tr(gh, gv);

  const Matrix<Scalar> p = random_spd<Scalar>(rng, n, Scalar(0.5), Scalar(4));
  // Q with |Q|_{V->V'} <= lambda_min(P, G_V) / (2T) keeps A1 coercive.
  Matrix<Scalar> q = symmetric_part(random_matrix<Scalar>(rng, n, n));
  const Scalar alpha_p = min_generalized_eigenvalue(p, gv);
  q *= alpha_p / (2 * T * tr.operator_norm(q, Space::V, Space::Vdual)) * unit(rng);
  const Matrix<Scalar> p_end = p + T * q;
  FormConstants<Scalar> c;
  c.alpha = std::min(alpha_p, min_generalized_eigenvalue(p_end, gv));
  c.M1 = std::max(max_generalized_eigenvalue(p, gv), max_generalized_eigenvalue(p_end, gv));
  c.Mdot1 = tr.operator_norm(q, Space::V, Space::Vdual);
  // |R|_{V->H} <= alpha keeps gamma, and with it C, of moderate size.
  Matrix<Scalar> r = random_matrix<Scalar>(rng, n, n);
  r *= c.alpha * unit(rng) / tr.operator_norm(r, Space::V, Space::H);
  c.M2 = tr.operator_norm(r, Space::V, Space::H);
  c.T = T;
  FormDecomposition<Scalar> form(
      tr, [p, q](Scalar t) -> Matrix<Scalar> { return p + t * q; },
      [r](Scalar t) -> Matrix<Scalar> { return r * std::cos(t); }, c);

  const Scalar b0 = Scalar(0.5) + unit(rng), b1 = unit(rng), freq = 1 + 3 * unit(rng);
  Matrix<Scalar> w = random_matrix<Scalar>(rng, n, n, Scalar(0.3));
  w = (w - w.transpose()).eval() / 2;
  const Matrix<Scalar> skew = tr.solve_h(w);
  Perturbation<Scalar> b{[b0, b1, freq, skew](Scalar t) -> Matrix<Scalar> {
                           const Scalar ct = b0 + b1 * (1 + std::sin(freq * t)) / 2;
                           return ct * Matrix<Scalar>::Identity(skew.rows(), skew.cols()) + skew;
                         },
                         b0, b0 + b1, false};
  b = make_perturbation(tr, b.B, b.beta0, b.beta1, Scalar(0), T);

  const Vector<Scalar> g0 = random_vector<Scalar>(rng, n), g1 = random_vector<Scalar>(rng, n);
  Source<Scalar> f{[g0, g1](Scalar t) -> Vector<Scalar> { return g0 + std::sin(3 * t) * g1; }, false};
  return EvolutionProblem<Scalar>(std::move(form), std::move(b), std::move(f), random_vector<Scalar>(rng, n));
}

}  // namespace mreg
