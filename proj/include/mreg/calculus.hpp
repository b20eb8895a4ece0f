#pragma once

#include "mreg/errors.hpp"
#include "mreg/forms.hpp"
#include "mreg/sqrtop.hpp"
#include "mreg/trajectory.hpp"
#include "mreg/triple.hpp"

#include <cmath>

namespace mreg {

template <RealScalar Scalar>
struct CalculusResidual {
  Scalar absolute = 0;
  Scalar scale = 0;
  Scalar relative() const { return scale > 0 ? absolute / scale : absolute; }
};

namespace detail {

template <RealScalar Scalar>
void require_same_grid(const Trajectory<Scalar>& u, const Trajectory<Scalar>& v) {
  if (u.times != v.times) throw DimensionError("trajectories live on different grids");
  if (u.dim() != v.dim()) throw DimensionError("trajectories have different dimensions");
}

}  // namespace detail

// <v(T),u(T)> - <v(0),u(0)> - int (<v',u> + <v,u'>) for piecewise-linear u
// (V coordinates) and v (V' coordinates); Simpson per cell is exact here.
template <RealScalar Scalar>
CalculusResidual<Scalar> ibp_check(const Trajectory<Scalar>& u, const Trajectory<Scalar>& v) {
  detail::require_same_grid(u, v);
  const Scalar end = v.final_state().dot(u.final_state());
  const Scalar start = v.state(0).dot(u.state(0));
  CalculusResidual<Scalar> r;
  Scalar integral = 0;
  r.scale = std::abs(end) + std::abs(start);
  for (Index k = 0; k < u.n_steps(); ++k) {
    const auto du = u.derivative.col(k);
    const auto dv = v.derivative.col(k);
    const Vector<Scalar> um = (u.state(k) + u.state(k + 1)) / 2, vm = (v.state(k) + v.state(k + 1)) / 2;
    auto g = [&](const auto& uu, const auto& vv) { return dv.dot(uu) + vv.dot(du); };
    const Scalar cell =
        u.dt(k) / 6 * (g(u.state(k), v.state(k)) + 4 * g(um, vm) + g(u.state(k + 1), v.state(k + 1)));
    integral += cell;
    r.scale += std::abs(cell);
  }
  r.absolute = std::abs(end - start - integral);
  return r;
}

// Integrated product rule (S u)' = S' u + S u' on every cell:
//   sum_k | S(t_{k+1}) u_{k+1} - S(t_k) u_k - trapezoid(S' u + S u') |_target
// with S' by finite differences of step h.
template <RealScalar Scalar>
CalculusResidual<Scalar> product_rule_check(const GelfandTriple<Scalar>& triple, const OperatorFamily<Scalar>& S,
                                            const Trajectory<Scalar>& u, Scalar h, Space target = Space::Vdual) {
  CalculusResidual<Scalar> r;
  const Scalar begin = u.begin(), end = u.end();
  Matrix<Scalar> s0 = S(u.times.front());
  Matrix<Scalar> ds0 = finite_difference(S, u.times.front(), h, begin, end);
  for (Index k = 0; k < u.n_steps(); ++k) {
    const Scalar t1 = u.times[static_cast<std::size_t>(k + 1)];
    const Matrix<Scalar> s1 = S(t1);
    const Matrix<Scalar> ds1 = finite_difference(S, t1, h, begin, end);
    const Vector<Scalar> x0 = u.state(k), x1 = u.state(k + 1), dx = u.derivative.col(k);
    const Vector<Scalar> jump = s1 * x1 - s0 * x0;
    const Vector<Scalar> quad = u.dt(k) / 2 * (ds0 * x0 + s0 * dx + ds1 * x1 + s1 * dx);
    r.absolute += triple.norm(Vector<Scalar>(jump - quad), target);
    r.scale += triple.norm(jump, target);
    s0 = s1;
    ds0 = ds1;
  }
  return r;
}

// Product rule with S = A^{1/2}(t) in V' coordinates from the spectral route.
template <RealScalar Scalar>
CalculusResidual<Scalar> chain_rule_sqrt_check(const FormDecomposition<Scalar>& form, const Trajectory<Scalar>& u,
                                               Scalar h = 0) {
  if (h == 0) h = Scalar(1e-5) * form.horizon();
  OperatorFamily<Scalar> root = [&form](Scalar t) { return sqrt_operator(spectral_decompose(form, t)); };
  return product_rule_check(form.triple(), root, u, h, Space::Vdual);
}

}  // namespace mreg
