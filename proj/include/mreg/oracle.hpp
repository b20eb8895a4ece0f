#pragma once

#include "mreg/errors.hpp"
#include "mreg/evolve.hpp"
#include "mreg/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

namespace mreg {

// y' = rhs(t, y, segment) on [t0, t1]; the integrator restarts at every
// breakpoint and tells rhs which segment it is in, so jumps are resolved.
template <RealScalar Scalar>
struct OdeSystem {
  Index dim = 0;
  std::function<Vector<Scalar>(Scalar, const Vector<Scalar>&, std::size_t)> rhs;
  Scalar t0 = 0;
  Scalar t1 = 1;
  Vector<Scalar> y0;
  std::vector<Scalar> breakpoints;  // interior points only
};

template <RealScalar Scalar>
OdeSystem<Scalar> make_ode(std::function<Vector<Scalar>(Scalar, const Vector<Scalar>&)> f, Scalar t0, Scalar t1,
                           Vector<Scalar> y0) {
  OdeSystem<Scalar> sys;
  sys.dim = y0.size();
  sys.rhs = [f = std::move(f)](Scalar t, const Vector<Scalar>& y, std::size_t) { return f(t, y); };
  sys.t0 = t0;
  sys.t1 = t1;
  sys.y0 = std::move(y0);
  return sys;
}

// u' = B(t)^{-1} (f(t) - G_H^{-1} K(t) u) in H coordinates.
template <RealScalar Scalar>
OdeSystem<Scalar> ode_system(const EvolutionProblem<Scalar>& problem) {
  OdeSystem<Scalar> sys;
  sys.dim = problem.dim();
  sys.t0 = problem.begin();
  sys.t1 = problem.end();
  sys.y0 = problem.u0();
  const auto& bp = problem.form().breakpoints();
  sys.breakpoints.assign(bp.begin() + 1, bp.end() - 1);
  sys.rhs = [&problem](Scalar t, const Vector<Scalar>& y, std::size_t segment) -> Vector<Scalar> {
    const auto& piece = problem.form().pieces()[segment];
    Vector<Scalar> r = -problem.triple().solve_h(piece.full(t) * y);
    if (!problem.source().zero) r += problem.f(t);
    if (problem.perturbation().identity) return r;
    return problem.B(t).partialPivLu().solve(r);
  };
  return sys;
}

// Dense output: per accepted step the five continuous-extension
// coefficients of the Dormand-Prince pair.
template <RealScalar Scalar>
class OracleSolution {
 public:
  struct Step {
    Scalar t;
    Scalar h;
    Matrix<Scalar> coeff;  // dim x 5
  };

  Scalar accuracy_estimate = 0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  bool implicit = false;

  Scalar begin() const { return t0_; }
  Scalar end() const { return t1_; }
  Index dim() const { return y0_.size(); }

  Vector<Scalar> operator()(Scalar t) const {
    if (steps_.empty()) return y0_;
    if (t <= steps_.front().t) return y0_;
    auto it = std::upper_bound(steps_.begin(), steps_.end(), t, [](Scalar v, const Step& s) { return v < s.t; });
    const Step& s = *(it - 1);
    const Scalar th = std::min<Scalar>((t - s.t) / s.h, 1);
    const Scalar th1 = 1 - th;
    const auto& c = s.coeff;
    return c.col(0) + th * (c.col(1) + th1 * (c.col(2) + th * (c.col(3) + th1 * c.col(4))));
  }

  std::vector<Scalar> step_times() const {
    std::vector<Scalar> out;
    for (const auto& s : steps_) out.push_back(s.t);
    out.push_back(t1_);
    return out;
  }

  void reset(Scalar t0, Scalar t1, Vector<Scalar> y0) {
    t0_ = t0;
    t1_ = t1;
    y0_ = std::move(y0);
    steps_.clear();
  }
  void push(Step s) { steps_.push_back(std::move(s)); }

 private:
  Scalar t0_ = 0, t1_ = 0;
  Vector<Scalar> y0_;
  std::vector<Step> steps_;
};

template <RealScalar Scalar>
struct OracleOptions {
  std::size_t max_steps = 2000000;
  Index check_points = 257;
  int max_refinements = 4;
};

namespace detail {

// One adaptive Dormand-Prince 5(4) run with local tolerance tau
// (absolute and relative) and PI step control.
template <RealScalar Scalar>
OracleSolution<Scalar> dopri5(const OdeSystem<Scalar>& sys, Scalar tau, const OracleOptions<Scalar>& opt) {
  constexpr Scalar c2 = Scalar(1) / 5, c3 = Scalar(3) / 10, c4 = Scalar(4) / 5, c5 = Scalar(8) / 9;
  constexpr Scalar a21 = Scalar(1) / 5;
  constexpr Scalar a31 = Scalar(3) / 40, a32 = Scalar(9) / 40;
  constexpr Scalar a41 = Scalar(44) / 45, a42 = Scalar(-56) / 15, a43 = Scalar(32) / 9;
  constexpr Scalar a51 = Scalar(19372) / 6561, a52 = Scalar(-25360) / 2187, a53 = Scalar(64448) / 6561,
                   a54 = Scalar(-212) / 729;
  constexpr Scalar a61 = Scalar(9017) / 3168, a62 = Scalar(-355) / 33, a63 = Scalar(46732) / 5247,
                   a64 = Scalar(49) / 176, a65 = Scalar(-5103) / 18656;
  constexpr Scalar a71 = Scalar(35) / 384, a73 = Scalar(500) / 1113, a74 = Scalar(125) / 192,
                   a75 = Scalar(-2187) / 6784, a76 = Scalar(11) / 84;
  constexpr Scalar e1 = Scalar(71) / 57600, e3 = Scalar(-71) / 16695, e4 = Scalar(71) / 1920,
                   e5 = Scalar(-17253) / 339200, e6 = Scalar(22) / 525, e7 = Scalar(-1) / 40;
  constexpr Scalar d1 = Scalar(-12715105075.0) / Scalar(11282082432.0),
                   d3 = Scalar(87487479700.0) / Scalar(32700410799.0),
                   d4 = Scalar(-10690763975.0) / Scalar(1880347072.0),
                   d5 = Scalar(701980252875.0) / Scalar(199316789632.0),
                   d6 = Scalar(-1453857185.0) / Scalar(822651844.0), d7 = Scalar(69997945.0) / Scalar(29380423.0);
  constexpr Scalar safe = Scalar(0.9), beta = Scalar(0.04), expo1 = Scalar(0.2) - beta * Scalar(0.75);
  constexpr Scalar facc1 = 5, facc2 = Scalar(0.1);

  OracleSolution<Scalar> sol;
  sol.reset(sys.t0, sys.t1, sys.y0);
  std::vector<Scalar> edges{sys.t0};
  for (Scalar b : sys.breakpoints)
    if (b > sys.t0 && b < sys.t1) edges.push_back(b);
  edges.push_back(sys.t1);

  const Index n = sys.dim;
  Vector<Scalar> y = sys.y0;
  auto err_norm = [&](const Vector<Scalar>& e, const Vector<Scalar>& ya, const Vector<Scalar>& yb) {
    const Vector<Scalar> sc = (tau + tau * ya.cwiseAbs().cwiseMax(yb.cwiseAbs()).array()).matrix();
    return std::sqrt((e.cwiseQuotient(sc)).squaredNorm() / Scalar(n));
  };

  for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
    const Scalar a = edges[seg], b = edges[seg + 1];
    auto f = [&](Scalar t, const Vector<Scalar>& v) { return sys.rhs(t, v, seg); };
    Scalar t = a;
    Vector<Scalar> k1 = f(t, y);
    // Initial step from the Hairer-Wanner heuristic.
    Scalar h;
    {
      const Vector<Scalar> sc = (tau + tau * y.cwiseAbs().array()).matrix();
      const Scalar dnf = std::sqrt(k1.cwiseQuotient(sc).squaredNorm() / Scalar(n));
      const Scalar dny = std::sqrt(y.cwiseQuotient(sc).squaredNorm() / Scalar(n));
      h = (dnf <= Scalar(1e-10) || dny <= Scalar(1e-10)) ? Scalar(1e-6) : Scalar(0.01) * dny / dnf;
      h = std::min(h, b - a);
      const Vector<Scalar> k2 = f(t + h, Vector<Scalar>(y + h * k1));
      const Scalar der2 = std::sqrt((k2 - k1).cwiseQuotient(sc).squaredNorm() / Scalar(n)) / h;
      const Scalar der12 = std::max(std::abs(der2), dnf);
      const Scalar h1 = der12 <= Scalar(1e-15) ? std::max(Scalar(1e-6), std::abs(h) * Scalar(1e-3))
                                                : std::pow(Scalar(0.01) / der12, Scalar(0.2));
      h = std::min({100 * std::abs(h), h1, b - a});
    }
    Scalar facold = Scalar(1e-4);
    bool last_rejected = false;
    while (t < b) {
      if (sol.steps + sol.rejected > opt.max_steps) throw StiffnessError("reference integrator exceeded its step budget");
      if (h < Scalar(1e-14) * std::max(Scalar(1), std::abs(t))) {
        std::ostringstream os;
        os << "step size underflow at t = " << t;
        throw StiffnessError(os.str());
      }
      const bool final_step = t + h * (1 + Scalar(1e-12)) >= b;
      if (final_step) h = b - t;
      const Vector<Scalar> k2 = f(t + c2 * h, Vector<Scalar>(y + h * a21 * k1));
      const Vector<Scalar> k3 = f(t + c3 * h, Vector<Scalar>(y + h * (a31 * k1 + a32 * k2)));
      const Vector<Scalar> k4 = f(t + c4 * h, Vector<Scalar>(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
      const Vector<Scalar> k5 =
          f(t + c5 * h, Vector<Scalar>(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
      const Vector<Scalar> k6 =
          f(t + h, Vector<Scalar>(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
      const Vector<Scalar> ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      const Scalar tnew = final_step ? b : t + h;
      const Vector<Scalar> k7 = f(tnew, ynew);
      const Vector<Scalar> e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      Scalar err = err_norm(e, y, ynew);
      if (!std::isfinite(err)) err = Scalar(1e10);
      const Scalar fac11 = std::pow(err, expo1);
      Scalar fac = fac11 / std::pow(facold, beta);
      fac = std::max(facc2, std::min(facc1, fac / safe));
      if (err <= 1) {
        facold = std::max(err, Scalar(1e-4));
        typename OracleSolution<Scalar>::Step s{t, tnew - t, Matrix<Scalar>(n, 5)};
        const Vector<Scalar> ydiff = ynew - y;
        const Vector<Scalar> bspl = h * k1 - ydiff;
        s.coeff.col(0) = y;
        s.coeff.col(1) = ydiff;
        s.coeff.col(2) = bspl;
        s.coeff.col(3) = ydiff - h * k7 - bspl;
        s.coeff.col(4) = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        sol.push(std::move(s));
        ++sol.steps;
        y = ynew;
        k1 = k7;
        t = tnew;
        Scalar hnew = h / fac;
        if (last_rejected) hnew = std::min(hnew, h);
        last_rejected = false;
        h = hnew;
      } else {
        h = h / std::min(facc1, fac11 / safe);
        last_rejected = true;
        ++sol.rejected;
      }
    }
  }
  return sol;
}

template <RealScalar Scalar>
Scalar solution_distance(const OracleSolution<Scalar>& a, const OracleSolution<Scalar>& b, Index points) {
  Scalar worst = 0;
  for (Scalar t : uniform_times(a.begin(), a.end(), points)) {
    const Vector<Scalar> ya = a(t), yb = b(t);
    worst = std::max(worst, ((ya - yb).cwiseAbs().array() / (1 + ya.cwiseAbs().array())).maxCoeff());
  }
  return worst;
}

}  // namespace detail

// Adaptive reference solution. Runs at local tolerance tau = tol and tau/32;
// the accuracy estimate is their largest mixed relative difference on a
// check grid and the finer run is returned. If the estimate exceeds tol both
// tolerances are divided by 32 (at most max_refinements times).
template <RealScalar Scalar>
OracleSolution<Scalar> reference_solve(const OdeSystem<Scalar>& sys, Scalar tol, const OracleOptions<Scalar>& opt = {}) {
  if (!(tol >= Scalar(1e-12) && tol <= Scalar(1e-6))) throw RangeError("oracle tolerance must lie in [1e-12, 1e-6]");
  if (sys.y0.size() != sys.dim || !sys.rhs) throw DimensionError("ODE system is incomplete");
  Scalar tau = tol;
  auto coarse = detail::dopri5(sys, tau, opt);
  for (int attempt = 0; attempt <= opt.max_refinements; ++attempt) {
    auto fine = detail::dopri5(sys, tau / 32, opt);
    const Scalar est = detail::solution_distance(coarse, fine, opt.check_points);
    fine.accuracy_estimate = est;
    if (est <= tol) return fine;
    tau /= 32;
    coarse = std::move(fine);
  }
  std::ostringstream os;
  os << "reference solution did not reach tolerance " << tol;
  throw NumericalError(os.str());
}

// Implicit fallback for stiff linear problems: backward Euler on N and 2N
// steps, Richardson extrapolation 2 u_{2N} - u_N at the coarse nodes, N
// doubled until two successive extrapolations agree to tol. Dense output is
// cubic Hermite from nodal values and the right-hand side.
template <RealScalar Scalar>
OracleSolution<Scalar> implicit_reference_solve(const EvolutionProblem<Scalar>& problem, Scalar tol,
                                                Index max_steps = Index(1) << 18) {
  const auto sys = ode_system(problem);
  auto extrapolate = [&](Index n) {
    const auto a = solve_theta(problem, n, Scalar(1));
    const auto b = solve_theta(problem, 2 * n, Scalar(1));
    Trajectory<Scalar> r = a;
    for (Index k = 0; k <= n; ++k) r.states.col(k) = 2 * b.states.col(2 * k) - a.states.col(k);
    return r;
  };
  const auto& bp = problem.form().breakpoints();
  Index n = 64 * static_cast<Index>(bp.size() - 1);
  // Keep breakpoints on the grid: n must be a multiple of the piece count
  // for uniform pieces; otherwise aligned_grid reports the misfit.
  auto prev = extrapolate(n);
  Scalar est = std::numeric_limits<Scalar>::infinity();
  while (true) {
    auto next = extrapolate(2 * n);
    est = 0;
    for (Index k = 0; k <= n; ++k) {
      const Vector<Scalar> ya = prev.states.col(k), yb = next.states.col(2 * k);
      est = std::max(est, ((ya - yb).cwiseAbs().array() / (1 + yb.cwiseAbs().array())).maxCoeff());
    }
    prev = std::move(next);
    n *= 2;
    if (est <= tol) break;
    if (n > max_steps) throw NumericalError("implicit reference solve did not reach the tolerance");
  }
  OracleSolution<Scalar> sol;
  sol.implicit = true;
  sol.accuracy_estimate = est;
  sol.reset(sys.t0, sys.t1, sys.y0);
  for (Index k = 0; k < n; ++k) {
    const Scalar t0 = prev.times[static_cast<std::size_t>(k)], t1 = prev.times[static_cast<std::size_t>(k + 1)];
    const Scalar h = t1 - t0;
    const std::size_t seg = problem.form().piece_index((t0 + t1) / 2);
    const Vector<Scalar> y0 = prev.states.col(k), y1 = prev.states.col(k + 1);
    const Vector<Scalar> f0 = sys.rhs(t0, y0, seg), f1 = sys.rhs(t1, y1, seg);
    // Hermite cubic written in the same nested basis as the DP5 output.
    typename OracleSolution<Scalar>::Step s{t0, h, Matrix<Scalar>(y0.size(), 5)};
    const Vector<Scalar> ydiff = y1 - y0;
    const Vector<Scalar> bspl = h * f0 - ydiff;
    s.coeff.col(0) = y0;
    s.coeff.col(1) = ydiff;
    s.coeff.col(2) = bspl;
    s.coeff.col(3) = ydiff - h * f1 - bspl;
    s.coeff.col(4).setZero();
    sol.push(std::move(s));
    ++sol.steps;
  }
  return sol;
}

template <RealScalar Scalar>
OracleSolution<Scalar> reference_solve(const EvolutionProblem<Scalar>& problem, Scalar tol,
                                       bool allow_fallback = true, const OracleOptions<Scalar>& opt = {}) {
  try {
    return reference_solve(ode_system(problem), tol, opt);
  } catch (const StiffnessError&) {
    if (!allow_fallback) throw;
    return implicit_reference_solve(problem, tol);
  }
}

// Oracle sampled on a grid, derivative by difference quotients.
template <RealScalar Scalar>
Trajectory<Scalar> sample_oracle(const OracleSolution<Scalar>& sol, const std::vector<Scalar>& times) {
  return sample_trajectory<Scalar>([&sol](Scalar t) { return sol(t); }, times);
}

}  // namespace mreg
