#pragma once

#include "mreg/errors.hpp"
#include "mreg/evolve.hpp"
#include "mreg/spacetime.hpp"
#include "mreg/sqrtop.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mreg {

template <RealScalar Scalar>
struct MRDiagnostics {
  Scalar norm_L2V = 0;
  Scalar norm_H1H = 0;  // |u'|_{L^2(H)}
  Scalar norm_MR = 0;   // sqrt(norm_L2V^2 + norm_H1H^2)
  Scalar norm_Au_L2H = 0;
  Scalar sup_V_norm = 0;
  Scalar energy_residual = 0;
  Scalar apriori_C = 0;
  Scalar apriori_lhs = 0;
  Scalar apriori_rhs = 0;
  bool apriori_satisfied = false;
  Scalar u0_norm_V = 0;
  Scalar f_norm_L2H = 0;
  CoercivityConstants<Scalar> coercivity{};
};

template <RealScalar Scalar>
struct MROptions {
  Scalar slack = Scalar(0.05);
  Scalar fd_step = 0;  // 0: 1e-5 T
};

namespace detail {

template <RealScalar Scalar>
Scalar trapezoid(const std::vector<Scalar>& times, const std::vector<Scalar>& values) {
  Scalar sum = 0;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) sum += (times[k + 1] - times[k]) * (values[k] + values[k + 1]) / 2;
  return sum;
}

}  // namespace detail

// Maximal-regularity norms, energy-identity residual and the a-priori bound
//   |u|_MR <= C (|u0|_V + |f|_{L^2(H)}).
// Piecewise forms use worst-case constants over the pieces.
template <RealScalar Scalar>
MRDiagnostics<Scalar> mr_diagnostics(const EvolutionProblem<Scalar>& problem, const Trajectory<Scalar>& u,
                                     const MROptions<Scalar>& options = {}) {
  if (u.dim() != problem.dim()) throw DimensionError("trajectory and problem dimensions differ");
  const auto& tr = problem.triple();
  const auto& form = problem.form();
  const std::size_t nodes = u.times.size();
  MRDiagnostics<Scalar> d;

  std::vector<Scalar> v2(nodes), au2(nodes), f2(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    const Index kk = static_cast<Index>(k);
    const Scalar t = u.times[k];
    const Vector<Scalar> x = u.states.col(kk);
    const Scalar nv = tr.norm_v(x);
    v2[k] = nv * nv;
    d.sup_V_norm = std::max(d.sup_V_norm, nv);
    const Vector<Scalar> au = tr.solve_h(form.piece_at(t).full(t) * x);
    const Scalar nau = tr.norm_h(au);
    au2[k] = nau * nau;
    const Scalar nf = problem.source().zero ? Scalar(0) : tr.norm_h(problem.f(t));
    f2[k] = nf * nf;
  }
  d.norm_L2V = std::sqrt(detail::trapezoid(u.times, v2));
  d.norm_Au_L2H = std::sqrt(detail::trapezoid(u.times, au2));
  d.f_norm_L2H = std::sqrt(detail::trapezoid(u.times, f2));
  Scalar h1 = 0;
  for (Index k = 0; k < u.n_steps(); ++k) {
    const Scalar n = tr.norm_h(Vector<Scalar>(u.derivative.col(k)));
    h1 += u.dt(k) * n * n;
  }
  d.norm_H1H = std::sqrt(h1);
  d.norm_MR = std::hypot(d.norm_L2V, d.norm_H1H);

  // sum_k |a1(t_{k+1},u_{k+1},u_{k+1}) - a1(t_k,u_k,u_k) - int_k (a1'(u,u) + 2 <A1 u, u'>)|
  // with the cell integral by the trapezoid rule.
  const Scalar h = options.fd_step > 0 ? options.fd_step : Scalar(1e-5) * problem.horizon();
  for (Index k = 0; k < u.n_steps(); ++k) {
    const Scalar t0 = u.times[static_cast<std::size_t>(k)], t1 = u.times[static_cast<std::size_t>(k + 1)];
    const auto& piece = form.piece_at((t0 + t1) / 2);
    const Vector<Scalar> x0 = u.states.col(k), x1 = u.states.col(k + 1);
    const Vector<Scalar> dx = u.derivative.col(k);
    const Matrix<Scalar> a0 = piece.a1(t0), a1 = piece.a1(t1);
    const Scalar e0 = x0.dot(a0 * x0), e1 = x1.dot(a1 * x1);
    const Scalar r0 = x0.dot(derivative_estimate(piece, t0, h) * x0) + 2 * dx.dot(a0 * x0);
    const Scalar r1 = x1.dot(derivative_estimate(piece, t1, h) * x1) + 2 * dx.dot(a1 * x1);
    const Scalar rate = (r0 + r1) / 2;
    d.energy_residual += std::abs(e1 - e0 - rate * (t1 - t0));
  }

  const auto constants = form.combined_constants();
  d.coercivity = coercivity_constants(constants, problem.perturbation().beta0);
  d.apriori_C = apriori_constant(d.coercivity.delta, constants.M1);
  d.u0_norm_V = tr.norm_v(problem.u0());
  d.apriori_lhs = d.norm_MR;
  d.apriori_rhs = d.apriori_C * (d.u0_norm_V + d.f_norm_L2H);
  d.apriori_satisfied = d.apriori_lhs <= d.apriori_rhs * (1 + options.slack);
  return d;
}

template <RealScalar Scalar>
struct SqrtPropertyRow {
  Index dim;
  Scalar r_upper;  // sup |A^{1/2} u|_H / |u|_V
  Scalar r_lower;  // inf of the same quotient
  std::string method;
};

template <RealScalar Scalar>
struct SqrtPropertyReport {
  std::vector<SqrtPropertyRow<Scalar>> rows;
  Scalar spread = 0;  // max r_upper / min r_lower
  bool pass = false;
};

// A = G_H^{-1} K is similar to the H-orthonormal A_hat = L_H^{-1} K L_H^{-T};
// |A^{1/2} u|_H / |u|_V are the singular values of A_hat^{1/2} L_H^T L_V^{-T}.
template <RealScalar Scalar>
SqrtPropertyRow<Scalar> sqrt_property_row(const FormDecomposition<Scalar>& form, Scalar t) {
  const auto& tr = form.triple();
  const Matrix<Scalar> K = form.full(t);
  const auto& lh = tr.llt_h().matrixL();
  Matrix<Scalar> a_hat = lh.solve(K);
  a_hat = lh.solve(a_hat.transpose()).transpose();
  Matrix<Scalar> root;
  std::string method;
  if (is_symmetric(a_hat, Scalar(1e-12))) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(symmetric_part(a_hat));
    if (!(es.eigenvalues()(0) > 0)) throw ValidationError("operator is not positive; no square root");
    root = es.operatorSqrt();
    method = "symmetric";
  } else {
    root = a_hat.sqrt();
    method = "schur";
    if (!root.allFinite()) throw NumericalError("Schur square root failed");
  }
  const Matrix<Scalar> lv_inv_t =
      tr.llt_v().matrixU().solve(Matrix<Scalar>::Identity(tr.dim(), tr.dim()));  // L_V^{-T}
  const Matrix<Scalar> lh_t = tr.llt_h().matrixU();                            // L_H^T
  const Vector<Scalar> sv = singular_values(root * lh_t * lv_inv_t);
  return {tr.dim(), sv(0), sv(sv.size() - 1), method};
}

template <RealScalar Scalar>
SqrtPropertyReport<Scalar> sqrt_property_probe(const std::vector<FormDecomposition<Scalar>>& family, Scalar t0,
                                               Scalar max_spread = 4) {
  SqrtPropertyReport<Scalar> rep;
  Scalar hi = 0, lo = std::numeric_limits<Scalar>::infinity();
  for (const auto& form : family) {
    rep.rows.push_back(sqrt_property_row(form, t0));
    hi = std::max(hi, rep.rows.back().r_upper);
    lo = std::min(lo, rep.rows.back().r_lower);
  }
  rep.spread = hi / lo;
  rep.pass = rep.spread <= max_spread;
  return rep;
}

}  // namespace mreg
