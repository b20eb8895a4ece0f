#pragma once

#include "mreg/errors.hpp"
#include "mreg/forms.hpp"
#include "mreg/linalg.hpp"
#include "mreg/quadrature.hpp"
#include "mreg/triple.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace mreg {

// A1(t) = G_H Phi diag(m) Phi^T G_H with Phi^T G_H Phi = I: the form is a
// multiplication operator by m in the coordinates u_hat = Phi^T G_H u.
template <RealScalar Scalar>
struct SpectralFactorization {
  Vector<Scalar> eigvals;
  Matrix<Scalar> eigvecs;
  Matrix<Scalar> gram_h;
  Scalar time{};

  Index dim() const { return eigvals.size(); }
  Vector<Scalar> transform(const Vector<Scalar>& u) const { return eigvecs.transpose() * (gram_h * u); }
};

template <RealScalar Scalar>
SpectralFactorization<Scalar> spectral_decompose(const Matrix<Scalar>& a1, const Matrix<Scalar>& gram_h,
                                                 Scalar t = 0) {
  if (!is_symmetric(a1, Scalar(1e-12)))
    throw ValidationError("spectral factorization requires a symmetric a1 (relative asymmetry " +
                          std::to_string(asymmetry(a1)) + ")");
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix<Scalar>> ges(symmetric_part(a1), gram_h);
  if (ges.info() != Eigen::Success) throw NumericalError("generalized eigensolver failed");
  if (!(ges.eigenvalues()(0) > 0))
    throw ValidationError("a1 is not positive definite; spectral powers are undefined");
  return {ges.eigenvalues(), ges.eigenvectors(), gram_h, t};
}

template <RealScalar Scalar>
SpectralFactorization<Scalar> spectral_decompose(const FormDecomposition<Scalar>& form, Scalar t) {
  return spectral_decompose(form.a1(t), form.triple().gram_h(), t);
}

namespace detail {

template <RealScalar Scalar>
Vector<Scalar> multiplier_power(const Vector<Scalar>& m, Scalar p) {
  if (p == Scalar(1)) return m;
  if (p == Scalar(-1)) return m.cwiseInverse();
  if (p == Scalar(0.5)) return m.cwiseSqrt();
  if (p == Scalar(-0.5)) return m.cwiseSqrt().cwiseInverse();
  throw ValidationError("only the powers +-1/2 and +-1 are supported");
}

}  // namespace detail

// Phi diag(m^p) Phi^T G_H x: the H-coordinate action of A^p.
template <RealScalar Scalar>
Vector<Scalar> power_apply(const SpectralFactorization<Scalar>& fact, Scalar p, const Vector<Scalar>& x) {
  if (x.size() != fact.dim()) throw DimensionError("power_apply: vector has the wrong length");
  const Vector<Scalar> mp = detail::multiplier_power(fact.eigvals, p);
  return fact.eigvecs * (mp.asDiagonal() * fact.transform(x));
}

template <RealScalar Scalar>
Matrix<Scalar> power_matrix(const SpectralFactorization<Scalar>& fact, Scalar p) {
  const Vector<Scalar> mp = detail::multiplier_power(fact.eigvals, p);
  return fact.eigvecs * mp.asDiagonal() * fact.eigvecs.transpose() * fact.gram_h;
}

// A^{1/2} in V' coordinates: u -> G_H A^{1/2} u.
template <RealScalar Scalar>
Matrix<Scalar> sqrt_operator(const SpectralFactorization<Scalar>& fact) {
  return fact.gram_h * power_matrix(fact, Scalar(0.5));
}

// A^{-1/2} in H (equivalently V) coordinates.
template <RealScalar Scalar>
Matrix<Scalar> invsqrt_operator(const SpectralFactorization<Scalar>& fact) {
  return power_matrix(fact, Scalar(-0.5));
}

// A^{-1/2} x = (1/pi) int_0^inf lambda^{-1/2} (lambda + A)^{-1} x d lambda.
// With lambda = tan^2(theta) this is
//   (2/pi) int_0^{pi/2} (sin^2 G_H + cos^2 A1)^{-1} G_H x d theta.
template <RealScalar Scalar>
Vector<Scalar> invsqrt_quadrature(const Matrix<Scalar>& a1, const Matrix<Scalar>& gram_h,
                                  const Vector<Scalar>& x, Index n_nodes = 200) {
  if (n_nodes < 8) throw ValidationError("invsqrt_quadrature needs at least 8 nodes");
  if (x.size() != a1.rows()) throw DimensionError("invsqrt_quadrature: vector has the wrong length");
  if (!is_symmetric(a1, Scalar(1e-12))) throw ValidationError("invsqrt_quadrature requires a symmetric a1");
  const auto rule = gauss_legendre<Scalar>(n_nodes, 0, std::numbers::pi_v<Scalar> / 2);
  const Vector<Scalar> gx = gram_h * x;
  const Matrix<Scalar> a = symmetric_part(a1);
  Vector<Scalar> sum = Vector<Scalar>::Zero(x.size());
  for (Index k = 0; k < n_nodes; ++k) {
    const Scalar s = std::sin(rule.nodes(k)), c = std::cos(rule.nodes(k));
    Eigen::LLT<Matrix<Scalar>> llt(s * s * gram_h + c * c * a);
    if (llt.info() != Eigen::Success) throw NumericalError("shifted resolvent solve failed", k);
    sum += rule.weights(k) * llt.solve(gx);
  }
  return (2 / std::numbers::pi_v<Scalar>)*sum;
}

template <RealScalar Scalar>
Vector<Scalar> invsqrt_quadrature(const FormDecomposition<Scalar>& form, Scalar t, const Vector<Scalar>& x,
                                  Index n_nodes = 200) {
  return invsqrt_quadrature(form.a1(t), form.triple().gram_h(), x, n_nodes);
}

template <RealScalar Scalar>
struct BoundRow {
  Scalar t;
  Scalar lambda;  // NaN for the lambda-independent bounds
  std::string name;
  Scalar measured;
  Scalar ceiling;
  bool pass;
};

template <RealScalar Scalar>
struct BoundReport {
  std::vector<BoundRow<Scalar>> rows;
  bool all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
  }
  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.pass; }));
  }
};

// Resolvent and square-root bounds for a symmetric coercive a1 at one time,
// with alpha and M the extreme generalized eigenvalues of (A1, G_V):
//   (a) |(lambda + A)^{-1}|_{V->V}  <= c1 / (1 + lambda),
//   (b) |(lambda + A)^{-1}|_{V'->V} <= 1 / alpha,
//   (c) |A^{-1/2}|_{H->V} <= 1 / sqrt(alpha),
//   (d) |A^{1/2}|_{H->V'} <= sqrt(M),
// where c1 = sqrt(M/alpha) max{1, c_H^2/alpha}.
template <RealScalar Scalar>
BoundReport<Scalar> verify_resolvent_bounds(const GelfandTriple<Scalar>& triple, const Matrix<Scalar>& a1,
                                            const std::vector<Scalar>& lambda_grid, Scalar t = 0,
                                            Scalar slack = Scalar(1e-10)) {
  BoundReport<Scalar> report;
  const Matrix<Scalar>& gh = triple.gram_h();
  const Scalar alpha = min_generalized_eigenvalue(a1, triple.gram_v());
  const Scalar big_m = max_generalized_eigenvalue(a1, triple.gram_v());
  const Scalar ch2 = triple.c_h() * triple.c_h();
  const Scalar c1 = std::sqrt(big_m / alpha) * std::max(Scalar(1), ch2 / alpha);
  auto push = [&](Scalar lambda, const char* name, Scalar measured, Scalar ceiling) {
    report.rows.push_back({t, lambda, name, measured, ceiling, measured <= ceiling * (1 + slack)});
  };
  const Matrix<Scalar> a = symmetric_part(a1);
  for (Scalar lambda : lambda_grid) {
    if (!(lambda >= 0)) throw ValidationError("lambda grid must be nonnegative");
    Eigen::LLT<Matrix<Scalar>> llt(lambda * gh + a);
    if (llt.info() != Eigen::Success) throw NumericalError("resolvent factorization failed");
    const Matrix<Scalar> resolvent = llt.solve(Matrix<Scalar>::Identity(a.rows(), a.cols()));
    push(lambda, "resolvent_VV", triple.operator_norm(Matrix<Scalar>(resolvent * gh), Space::V, Space::V),
         c1 / (1 + lambda));
    push(lambda, "resolvent_VdualV", triple.operator_norm(resolvent, Space::Vdual, Space::V), 1 / alpha);
  }
  const auto fact = spectral_decompose(a1, gh, t);
  const Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();
  push(nan, "invsqrt_HV", triple.operator_norm(invsqrt_operator(fact), Space::H, Space::V), 1 / std::sqrt(alpha));
  push(nan, "sqrt_HVdual", triple.operator_norm(sqrt_operator(fact), Space::H, Space::Vdual), std::sqrt(big_m));
  return report;
}

template <RealScalar Scalar>
BoundReport<Scalar> verify_resolvent_bounds(const FormDecomposition<Scalar>& form, Scalar t,
                                            const std::vector<Scalar>& lambda_grid) {
  return verify_resolvent_bounds(form.triple(), form.a1(t), lambda_grid, t);
}

// Central difference of a matrix family, one-sided within h of the ends.
template <RealScalar Scalar>
Matrix<Scalar> finite_difference(const OperatorFamily<Scalar>& family, Scalar t, Scalar h, Scalar begin,
                                 Scalar end) {
  if (!(h > 0)) throw ValidationError("finite-difference step must be positive");
  const Scalar slack = detail::time_slack(begin, end);
  if (t < begin - slack || t > end + slack) throw RangeError("finite difference outside the interval");
  t = std::clamp(t, begin, end);
  h = std::min(h, (end - begin) / 2);
  if (t - h < begin) return (family(t + h) - family(t)) / h;
  if (t + h > end) return (family(t) - family(t - h)) / h;
  return (family(t + h) - family(t - h)) / (2 * h);
}

template <RealScalar Scalar>
Matrix<Scalar> derivative_estimate(const FormDecomposition<Scalar>& form, Scalar t, Scalar h = 0) {
  if (!form.contains(t)) throw RangeError("derivative_estimate: time outside the form interval");
  if (h == 0) h = Scalar(1e-5) * form.horizon();
  OperatorFamily<Scalar> a1 = [&form](Scalar s) { return form.a1(s); };
  return finite_difference(a1, t, h, form.begin(), form.end());
}

template <RealScalar Scalar>
struct SqrtLipschitz {
  Scalar invsqrt;          // sup |A^{-1/2}(t) - A^{-1/2}(s)|_{V->V} / |t-s|
  Scalar sqrt;             // sup |A^{1/2}(t) - A^{1/2}(s)|_{V->V'} / |t-s|
  Scalar invsqrt_ceiling;  // c1 Mdot1 / alpha
  Scalar sqrt_ceiling;     // Mdot1 (c_H/sqrt(alpha) + M1 c1/alpha)
  bool within() const { return invsqrt <= invsqrt_ceiling * (1 + 1e-8) && sqrt <= sqrt_ceiling * (1 + 1e-8); }
};

template <RealScalar Scalar>
SqrtLipschitz<Scalar> sqrt_lipschitz_probe(const FormDecomposition<Scalar>& form,
                                           const std::vector<std::pair<Scalar, Scalar>>& pairs) {
  const auto& tr = form.triple();
  const auto& c = form.constants();
  const Scalar ch = tr.c_h();
  const Scalar c1 = std::sqrt(c.M1 / c.alpha) * std::max(Scalar(1), ch * ch / c.alpha);
  SqrtLipschitz<Scalar> out{0, 0, c1 * c.Mdot1 / c.alpha, c.Mdot1 * (ch / std::sqrt(c.alpha) + c.M1 * c1 / c.alpha)};
  for (const auto& [s, t] : pairs) {
    if (s == t) continue;
    const auto fs = spectral_decompose(form, s);
    const auto ft = spectral_decompose(form, t);
    const Scalar dt = std::abs(t - s);
    out.invsqrt = std::max(
        out.invsqrt,
        tr.operator_norm(Matrix<Scalar>(invsqrt_operator(ft) - invsqrt_operator(fs)), Space::V, Space::V) / dt);
    out.sqrt = std::max(
        out.sqrt,
        tr.operator_norm(Matrix<Scalar>(sqrt_operator(ft) - sqrt_operator(fs)), Space::V, Space::Vdual) / dt);
  }
  return out;
}

}  // namespace mreg
