#pragma once

#include "mreg/diagnostics.hpp"
#include "mreg/errors.hpp"
#include "mreg/evolve.hpp"
#include "mreg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace mreg {

// u' + m(t,u) A(t) u = m(t,u) f, written as B_u u' + A u = B_u f with the
// nodal multiplication B_u = diag(1/m(t,u_i)). m is clipped into
// [delta_m, 1/delta_m] at evaluation time. G_H must be diagonal (lumped),
// so B_u is self-adjoint on H with exactly those bounds.
template <RealScalar Scalar>
struct QuasilinearProblem {
  FormDecomposition<Scalar> form;
  std::function<Scalar(Scalar, Scalar)> m;
  Scalar delta_m;
  Source<Scalar> f;
  Vector<Scalar> u0;

  Index dim() const { return form.dim(); }

  Scalar clipped_m(Scalar t, Scalar xi) const { return std::clamp(m(t, xi), delta_m, 1 / delta_m); }

  void validate() const {
    if (!(delta_m > 0 && delta_m <= 1)) throw ValidationError("delta_m must lie in (0, 1]");
    if (!m) throw ValidationError("quasilinear problem needs a coefficient m");
    const Matrix<Scalar>& gh = form.triple().gram_h();
    if (!(gh - Matrix<Scalar>(gh.diagonal().asDiagonal())).isZero(0))
      throw ValidationError("quasilinear problems need a diagonal (lumped) gram_H");
    if (u0.size() != dim()) throw DimensionError("u0 has the wrong length");
    for (Scalar t : uniform_times(form.begin(), form.end(), 9))
      for (Scalar xi : uniform_times(Scalar(-10), Scalar(10), 41))
        if (!std::isfinite(m(t, xi))) throw ValidationError("m is not finite on the sample grid");
  }
};

template <RealScalar Scalar>
Matrix<Scalar> linearized_B(const QuasilinearProblem<Scalar>& problem, const Vector<Scalar>& v, Scalar t) {
  Vector<Scalar> d(v.size());
  for (Index i = 0; i < v.size(); ++i) d(i) = 1 / problem.clipped_m(t, v(i));
  return d.asDiagonal();
}

template <RealScalar Scalar>
Matrix<Scalar> linearized_B(const QuasilinearProblem<Scalar>& problem, const Trajectory<Scalar>& v, Index t_index) {
  return linearized_B(problem, Vector<Scalar>(v.state(t_index)), v.times[static_cast<std::size_t>(t_index)]);
}

// The linear problem solved by one application of S(v).
template <RealScalar Scalar>
EvolutionProblem<Scalar> linearized_problem(const QuasilinearProblem<Scalar>& problem, const Trajectory<Scalar>& v) {
  const Index n = problem.dim();
  // Bounds hold by clipping, no sampling needed.
  Perturbation<Scalar> b{[&problem, v](Scalar t) { return linearized_B(problem, v.at(t), t); }, problem.delta_m,
                         1 / problem.delta_m, false};
  Source<Scalar> f{};
  if (problem.f.zero) {
    f = zero_source<Scalar>();
  } else {
    f.f = [&problem, v, n](Scalar t) -> Vector<Scalar> {
      return linearized_B(problem, v.at(t), t) * problem.f(t, n);
    };
  }
  return EvolutionProblem<Scalar>(problem.form, std::move(b), std::move(f), problem.u0);
}

template <RealScalar Scalar>
Scalar l2h_distance(const GelfandTriple<Scalar>& tr, const Trajectory<Scalar>& a, const Trajectory<Scalar>& b) {
  std::vector<Scalar> sq(a.times.size());
  for (std::size_t k = 0; k < sq.size(); ++k) {
    const Scalar d = tr.norm_h(Vector<Scalar>(a.states.col(static_cast<Index>(k)) - b.states.col(static_cast<Index>(k))));
    sq[k] = d * d;
  }
  return std::sqrt(detail::trapezoid(a.times, sq));
}

// Discrete residual of the nonlinear equation for a theta-scheme trajectory,
// with B evaluated at the trajectory itself: L^2(0,T;H) norm of
//   B_u(t*) (u_{k+1}-u_k)/dt + A(t*) u_theta - B_u(t*) f(t*).
template <RealScalar Scalar>
Scalar quasilinear_residual(const QuasilinearProblem<Scalar>& problem, const Trajectory<Scalar>& u, Scalar theta) {
  const auto& tr = problem.form.triple();
  Scalar sum = 0;
  for (Index k = 0; k < u.n_steps(); ++k) {
    const Scalar dt = u.dt(k);
    const Scalar ts = u.times[static_cast<std::size_t>(k)] + theta * dt;
    const Vector<Scalar> uth = theta * u.states.col(k + 1) + (1 - theta) * u.states.col(k);
    const Matrix<Scalar> b = linearized_B(problem, u.at(ts), ts);
    Vector<Scalar> r = b * u.derivative.col(k) + tr.solve_h(problem.form.full(ts) * uth);
    if (!problem.f.zero) r -= b * problem.f(ts, problem.dim());
    const Scalar n = tr.norm_h(r);
    sum += dt * n * n;
  }
  return std::sqrt(sum);
}

template <RealScalar Scalar>
struct FixedPointStep {
  int iteration;
  Scalar distance;
  Scalar residual;
  Scalar norm_MR;
  bool apriori_satisfied;
};

template <RealScalar Scalar>
struct FixedPointResult {
  Trajectory<Scalar> trajectory;
  std::vector<FixedPointStep<Scalar>> history;
  bool converged = false;
};

template <RealScalar Scalar>
struct FixedPointOptions {
  Index n_steps = 100;
  Scalar theta = 1;
  Scalar tol = Scalar(1e-8);
  int max_iter = 50;
  Scalar damping = 1;
  bool diagnostics = true;
};

// Picard iteration v_{k+1} = (1-d) v_k + d S(v_k), v_0 = u0 for all t.
// Stops once |v_{k+1} - v_k|_{L^2(H)} <= tol and the nonlinear residual of
// S(v_k) is <= 10 tol. Running out of iterations is reported, not thrown.
template <RealScalar Scalar>
FixedPointResult<Scalar> solve_fixed_point(const QuasilinearProblem<Scalar>& problem,
                                           const FixedPointOptions<Scalar>& opt = {}) {
  problem.validate();
  if (!(opt.tol > 0)) throw ValidationError("tolerance must be positive");
  if (!(opt.damping > 0 && opt.damping <= 1)) throw ValidationError("damping must lie in (0, 1]");
  if (opt.max_iter < 1) throw ValidationError("max_iter must be at least 1");
  const auto& tr = problem.form.triple();
  const auto times = uniform_times(problem.form.begin(), problem.form.end(), opt.n_steps + 1);
  Matrix<Scalar> constant = problem.u0.replicate(1, opt.n_steps + 1);
  Trajectory<Scalar> v = make_trajectory(times, std::move(constant));

  FixedPointResult<Scalar> out;
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    const auto linear = linearized_problem(problem, v);
    Trajectory<Scalar> u = solve_theta(linear, opt.n_steps, opt.theta);
    FixedPointStep<Scalar> step{iter, 0, 0, 0, true};
    if (opt.diagnostics) {
      const auto d = mr_diagnostics(linear, u);
      step.norm_MR = d.norm_MR;
      step.apriori_satisfied = d.apriori_satisfied;
    }
    Trajectory<Scalar> next = u;
    if (opt.damping < 1) {
      next.states = (1 - opt.damping) * v.states + opt.damping * u.states;
      next.fill_derivative();
    }
    step.distance = l2h_distance(tr, next, v);
    step.residual = quasilinear_residual(problem, u, opt.theta);
    out.history.push_back(step);
    out.trajectory = std::move(u);
    v = std::move(next);
    if (step.distance <= opt.tol && step.residual <= 10 * opt.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

// The nonlinear ODE u' = f - diag(m(t,u)) G_H^{-1} K(t) u, for the oracle.
template <RealScalar Scalar>
OdeSystem<Scalar> quasilinear_ode(const QuasilinearProblem<Scalar>& problem) {
  OdeSystem<Scalar> sys;
  sys.dim = problem.dim();
  sys.t0 = problem.form.begin();
  sys.t1 = problem.form.end();
  sys.y0 = problem.u0;
  sys.rhs = [&problem](Scalar t, const Vector<Scalar>& y, std::size_t) -> Vector<Scalar> {
    Vector<Scalar> r = -problem.form.triple().solve_h(problem.form.full(t) * y);
    for (Index i = 0; i < y.size(); ++i) r(i) *= problem.clipped_m(t, y(i));
    if (!problem.f.zero) r += problem.f(t, problem.dim());
    return r;
  };
  return sys;
}

}  // namespace mreg
