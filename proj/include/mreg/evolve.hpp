#pragma once

#include "mreg/errors.hpp"
#include "mreg/forms.hpp"
#include "mreg/trajectory.hpp"
#include "mreg/triple.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

namespace mreg {

// Multiplicative perturbation B(t) acting on H coordinates with
//   beta0 |g|_H^2 <= (B(t) g | g)_H <= beta1 |g|_H^2.
template <RealScalar Scalar>
struct Perturbation {
  OperatorFamily<Scalar> B;
  Scalar beta0 = 1;
  Scalar beta1 = 1;
  bool identity = false;

  Matrix<Scalar> operator()(Scalar t, Index dim) const {
    if (identity) return Matrix<Scalar>::Identity(dim, dim);
    return B(t);
  }
};

template <RealScalar Scalar>
std::pair<Scalar, Scalar> perturbation_range(const GelfandTriple<Scalar>& triple, const Matrix<Scalar>& b) {
  const Matrix<Scalar> gb = triple.gram_h() * b;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix<Scalar>> ges(symmetric_part(gb), triple.gram_h(),
                                                               Eigen::EigenvaluesOnly);
  return {ges.eigenvalues()(0), ges.eigenvalues()(ges.eigenvalues().size() - 1)};
}

template <RealScalar Scalar>
Perturbation<Scalar> identity_perturbation() {
  return Perturbation<Scalar>{{}, 1, 1, true};
}

// Validated on 33 uniform times of [begin, end].
template <RealScalar Scalar>
Perturbation<Scalar> make_perturbation(const GelfandTriple<Scalar>& triple, OperatorFamily<Scalar> b, Scalar beta0,
                                       Scalar beta1, Scalar begin, Scalar end) {
  if (!(beta0 > 0 && beta0 <= beta1)) throw ValidationError("perturbation needs 0 < beta0 <= beta1");
  for (Scalar t : uniform_times(begin, end, 33)) {
    const Matrix<Scalar> m = b(t);
    if (m.rows() != triple.dim() || m.cols() != triple.dim())
      throw DimensionError("B(t) has the wrong shape");
    if (!m.allFinite()) throw ValidationError("B(t) is not finite");
    const auto [lo, hi] = perturbation_range(triple, m);
    if (lo < beta0 * (1 - Scalar(1e-12)) || hi > beta1 * (1 + Scalar(1e-12))) {
      std::ostringstream os;
      os << "B(" << t << ") has (B g|g)_H / |g|_H^2 in [" << lo << ", " << hi << "], outside [" << beta0 << ", "
         << beta1 << "]";
      throw ValidationError(os.str());
    }
  }
  return Perturbation<Scalar>{std::move(b), beta0, beta1, false};
}

template <RealScalar Scalar>
Perturbation<Scalar> constant_perturbation(const GelfandTriple<Scalar>& triple, Matrix<Scalar> b) {
  const auto [lo, hi] = perturbation_range(triple, b);
  if (!(lo > 0)) throw ValidationError("constant B is not positive on H");
  return Perturbation<Scalar>{[b](Scalar) { return b; }, lo, hi, false};
}

// beta0, beta1 measured on n uniform samples.
template <RealScalar Scalar>
Perturbation<Scalar> measured_perturbation(const GelfandTriple<Scalar>& triple, OperatorFamily<Scalar> b,
                                           Scalar begin, Scalar end, Index n = 257) {
  Scalar lo = std::numeric_limits<Scalar>::infinity(), hi = 0;
  for (Scalar t : uniform_times(begin, end, n)) {
    const auto [a, z] = perturbation_range(triple, b(t));
    lo = std::min(lo, a);
    hi = std::max(hi, z);
  }
  if (!(lo > 0)) throw ValidationError("B(t) is not uniformly positive on H");
  return make_perturbation(triple, std::move(b), lo, hi, begin, end);
}

// Right-hand side f(t) in H coordinates. `zero` marks f identically zero.
template <RealScalar Scalar>
struct Source {
  VectorFamily<Scalar> f;
  bool zero = false;

  Vector<Scalar> operator()(Scalar t, Index dim) const {
    if (zero) return Vector<Scalar>::Zero(dim);
    return f(t);
  }
};

template <RealScalar Scalar>
Source<Scalar> zero_source() {
  return Source<Scalar>{{}, true};
}

template <RealScalar Scalar>
Source<Scalar> constant_source(Vector<Scalar> v) {
  const bool z = v.isZero(0);
  return Source<Scalar>{[v](Scalar) { return v; }, z};
}

// B(t) u' + A(t) u = f(t), u(begin) = u0.
template <RealScalar Scalar>
class EvolutionProblem {
 public:
  EvolutionProblem(PiecewiseForm<Scalar> form, Perturbation<Scalar> b, Source<Scalar> f, Vector<Scalar> u0)
      : form_(std::move(form)), b_(std::move(b)), f_(std::move(f)), u0_(std::move(u0)) {
    if (u0_.size() != form_.dim()) throw DimensionError("u0 has the wrong length");
    if (!u0_.allFinite()) throw ValidationError("u0 is not finite");
    if (!f_.zero && !f_.f) throw ValidationError("source needs a function or the zero flag");
    for (Scalar t : uniform_times(begin(), end(), 33)) {
      const Vector<Scalar> v = f_(t, dim());
      if (v.size() != dim()) throw DimensionError("f(t) has the wrong length");
      if (!v.allFinite()) {
        std::ostringstream os;
        os << "f(" << t << ") is not finite";
        throw ValidationError(os.str());
      }
    }
  }

  EvolutionProblem(FormDecomposition<Scalar> form, Perturbation<Scalar> b, Source<Scalar> f, Vector<Scalar> u0)
      : EvolutionProblem(PiecewiseForm<Scalar>::single(std::move(form)), std::move(b), std::move(f),
                         std::move(u0)) {}

  const PiecewiseForm<Scalar>& form() const { return form_; }
  const GelfandTriple<Scalar>& triple() const { return form_.triple(); }
  const Perturbation<Scalar>& perturbation() const { return b_; }
  const Source<Scalar>& source() const { return f_; }
  const Vector<Scalar>& u0() const { return u0_; }
  Index dim() const { return form_.dim(); }
  Scalar begin() const { return form_.begin(); }
  Scalar end() const { return form_.end(); }
  Scalar horizon() const { return end() - begin(); }

  Matrix<Scalar> B(Scalar t) const { return b_(t, dim()); }
  Vector<Scalar> f(Scalar t) const { return f_(t, dim()); }
  bool trivial() const { return f_.zero && u0_.isZero(0); }

  // Same data restricted to piece i, started from u_start.
  EvolutionProblem piece(std::size_t i, Vector<Scalar> u_start) const {
    return EvolutionProblem(PiecewiseForm<Scalar>::single(form_.pieces().at(i)), b_, f_, std::move(u_start));
  }

  EvolutionProblem with_initial(Vector<Scalar> u_start) const {
    return EvolutionProblem(form_, b_, f_, std::move(u_start));
  }

 private:
  PiecewiseForm<Scalar> form_;
  Perturbation<Scalar> b_;
  Source<Scalar> f_;
  Vector<Scalar> u0_;
};

namespace detail {

// Uniform grid with every breakpoint snapped onto a node.
template <RealScalar Scalar>
std::vector<Scalar> aligned_grid(const PiecewiseForm<Scalar>& form, Index n_steps) {
  const Scalar begin = form.begin(), end = form.end();
  const Scalar dt = (end - begin) / Scalar(n_steps);
  std::vector<Scalar> times(static_cast<std::size_t>(n_steps + 1));
  for (Index k = 0; k <= n_steps; ++k) times[static_cast<std::size_t>(k)] = begin + dt * Scalar(k);
  times.back() = end;
  const auto& bp = form.breakpoints();
  for (std::size_t i = 1; i + 1 < bp.size(); ++i) {
    const Scalar pos = (bp[i] - begin) / dt;
    const Scalar k = std::round(pos);
    if (std::abs(pos - k) > Scalar(1e-9)) {
      std::ostringstream os;
      os << "breakpoint " << bp[i] << " is not on the uniform grid with " << n_steps << " steps";
      throw ConfigError(os.str());
    }
    times[static_cast<std::size_t>(k)] = bp[i];
  }
  return times;
}

}  // namespace detail

// K(t) = A1(t) + G_H A2(t) for the piece owning the interval with midpoint `mid`.
template <RealScalar Scalar>
Matrix<Scalar> full_operator(const PiecewiseForm<Scalar>& form, Scalar t, Scalar mid) {
  return form.piece_at(mid).full(t);
}

// theta-scheme with t* = t_k + theta dt:
//   [G_H B(t*)/dt + theta K(t*)] u_{k+1} = [G_H B(t*)/dt - (1-theta) K(t*)] u_k + G_H f(t*).
template <RealScalar Scalar>
Trajectory<Scalar> solve_theta(const EvolutionProblem<Scalar>& problem, Index n_steps, Scalar theta = 1) {
  if (n_steps < 1) throw ValidationError("need at least one time step");
  if (!(theta >= Scalar(0.5) && theta <= 1)) throw ValidationError("theta must lie in [1/2, 1]");
  const Index n = problem.dim();
  Trajectory<Scalar> out;
  out.times = detail::aligned_grid(problem.form(), n_steps);
  out.states = Matrix<Scalar>::Zero(n, n_steps + 1);
  out.states.col(0) = problem.u0();
  if (problem.trivial()) {
    out.derivative = Matrix<Scalar>::Zero(n, n_steps);
    return out;
  }
  const Matrix<Scalar>& gh = problem.triple().gram_h();
  for (Index k = 0; k < n_steps; ++k) {
    const Scalar t0 = out.times[static_cast<std::size_t>(k)];
    const Scalar dt = out.dt(k);
    const Scalar ts = t0 + theta * dt;
    const Matrix<Scalar> K = full_operator(problem.form(), ts, t0 + dt / 2);
    const Matrix<Scalar> mass = gh * problem.B(ts) / dt;
    const Matrix<Scalar> lhs = mass + theta * K;
    Vector<Scalar> rhs = (mass - (1 - theta) * K) * out.states.col(k);
    if (!problem.source().zero) rhs += gh * problem.f(ts);
    Eigen::PartialPivLU<Matrix<Scalar>> lu(lhs);
    const Scalar rcond = lu.rcond();
    Vector<Scalar> next = lu.solve(rhs);
    if (!(rcond > std::numeric_limits<Scalar>::epsilon()) || !next.allFinite()) {
      std::ostringstream os;
      os << "step matrix is singular or ill-conditioned at step " << k << " (rcond " << rcond << ")";
      throw NumericalError(os.str(), static_cast<long>(k));
    }
    out.states.col(k + 1) = next;
  }
  out.fill_derivative();
  return out;
}

// Solve piece by piece; each piece starts from the previous final state.
template <RealScalar Scalar>
Trajectory<Scalar> solve_glued(const EvolutionProblem<Scalar>& problem, Index n_steps_per_piece,
                               Scalar theta = 1) {
  const auto& form = problem.form();
  Trajectory<Scalar> out;
  out.times.push_back(form.begin());
  std::vector<Matrix<Scalar>> blocks;
  Vector<Scalar> start = problem.u0();
  blocks.push_back(start);
  for (std::size_t i = 0; i < form.size(); ++i) {
    const auto sub = solve_theta(problem.piece(i, start), n_steps_per_piece, theta);
    out.times.insert(out.times.end(), sub.times.begin() + 1, sub.times.end());
    blocks.push_back(sub.states.rightCols(sub.states.cols() - 1));
    start = sub.final_state();
  }
  // Breakpoints come from the pieces; keep them exact.
  const auto& bp = form.breakpoints();
  for (std::size_t i = 1; i < bp.size(); ++i)
    out.times[i * static_cast<std::size_t>(n_steps_per_piece)] = bp[i];
  out.states.resize(problem.dim(), static_cast<Index>(out.times.size()));
  Index col = 0;
  for (const auto& b : blocks) {
    out.states.middleCols(col, b.cols()) = b;
    col += b.cols();
  }
  out.fill_derivative();
  return out;
}

}  // namespace mreg
