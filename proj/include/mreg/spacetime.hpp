#pragma once

#include "mreg/errors.hpp"
#include "mreg/evolve.hpp"
#include "mreg/quadrature.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <vector>

namespace mreg {

template <RealScalar Scalar>
struct CoercivityConstants {
  Scalar epsilon;
  Scalar gamma;
  Scalar delta;
};

// eps = beta0/2 and gamma chosen so that gamma alpha - Mdot1 - M2^2/(2 eps) = alpha;
// then delta = min{alpha/2, (beta0 - eps) e^{-gamma T}, alpha/2 e^{-gamma T}}.
template <RealScalar Scalar>
CoercivityConstants<Scalar> coercivity_constants(const FormConstants<Scalar>& c, Scalar beta0) {
  if (!(beta0 > 0) || !(c.alpha > 0)) throw ConfigError("coercivity constants need alpha > 0 and beta0 > 0");
  const Scalar eps = beta0 / 2;
  const Scalar gamma = (c.Mdot1 + c.M2 * c.M2 / (2 * eps) + c.alpha) / c.alpha;
  const Scalar decay = std::exp(-gamma * c.T);
  const Scalar delta = std::min({c.alpha / 2, (beta0 - eps) * decay, c.alpha / 2 * decay});
  if (!(delta > 0)) throw ConfigError("coercivity constant delta underflows; the horizon is too long");
  return {eps, gamma, delta};
}

// C = max{1/delta, sqrt(M1/(2 delta))}: from delta X^2 <= |f| X + M1/2 |u0|_V^2,
// X <= |f|/delta + sqrt(M1/(2 delta)) |u0|_V.
template <RealScalar Scalar>
Scalar apriori_constant(Scalar delta, Scalar M1) {
  return std::max(1 / delta, std::sqrt(M1 / (2 * delta)));
}

// Galerkin system on W_h = (continuous P1 in time) x R^dim for
//   E(u,w) = int (B u'|w')_H e^{-gamma t} + int a(t,u,w') e^{-gamma t} + a1(0,u(0),w(0)),
//   L(w)   = a1(0,u0,w(0)) + int (f|w')_H e^{-gamma t},
// with t measured from the start of the interval. Unknowns are the nodal
// values, ordered node-major.
template <RealScalar Scalar>
struct SpaceTimeSystem {
  std::vector<Scalar> times;
  Eigen::SparseMatrix<Scalar> E;
  Eigen::SparseMatrix<Scalar> norm;  // discrete |w|^2 = int|w'|_H^2 + int|w|_V^2 + |w(0)|_V^2
  Vector<Scalar> rhs;
  CoercivityConstants<Scalar> constants;
};

namespace detail {

template <RealScalar Scalar>
void add_block(std::vector<Eigen::Triplet<Scalar>>& out, Index row, Index col, const Matrix<Scalar>& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0) out.emplace_back(row + i, col + j, m(i, j));
}

}  // namespace detail

template <RealScalar Scalar>
SpaceTimeSystem<Scalar> assemble_spacetime(const EvolutionProblem<Scalar>& problem, Index n_cells) {
  if (n_cells < 1) throw ValidationError("need at least one time cell");
  if (!problem.form().is_single()) throw ConfigError("space-time solver needs a single Lipschitz form");
  const auto& form = problem.form().pieces().front();
  const auto& tr = problem.triple();
  const Index n = problem.dim();
  const Scalar begin = problem.begin();

  SpaceTimeSystem<Scalar> sys;
  sys.constants = coercivity_constants(form.constants(), problem.perturbation().beta0);
  const Scalar gamma = sys.constants.gamma;
  sys.times = uniform_times(begin, problem.end(), n_cells + 1);
  const Index total = n * (n_cells + 1);
  sys.rhs = Vector<Scalar>::Zero(total);

  std::vector<Eigen::Triplet<Scalar>> e_trip, n_trip;
  const Matrix<Scalar> a1_0 = form.a1(begin);
  detail::add_block<Scalar>(e_trip, 0, 0, a1_0);
  detail::add_block<Scalar>(n_trip, 0, 0, tr.gram_v());
  sys.rhs.head(n) = a1_0 * problem.u0();

  const auto ref = gauss_legendre<Scalar>(4, 0, 1);
  const Matrix<Scalar>& gh = tr.gram_h();
  for (Index c = 0; c < n_cells; ++c) {
    const Scalar t0 = sys.times[static_cast<std::size_t>(c)];
    const Scalar h = sys.times[static_cast<std::size_t>(c + 1)] - t0;
    const Scalar dpsi[2] = {-1 / h, 1 / h};
    Matrix<Scalar> e_loc[2][2], n_loc[2][2];
    for (auto& row : e_loc)
      for (auto& m : row) m = Matrix<Scalar>::Zero(n, n);
    for (auto& row : n_loc)
      for (auto& m : row) m = Matrix<Scalar>::Zero(n, n);
    Vector<Scalar> l_loc[2] = {Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n)};
    for (Index q = 0; q < ref.nodes.size(); ++q) {
      const Scalar s = ref.nodes(q);
      const Scalar w = ref.weights(q) * h;
      const Scalar t = t0 + s * h;
      const Scalar weight = w * std::exp(-gamma * (t - begin));
      const Scalar psi[2] = {1 - s, s};
      const Matrix<Scalar> gb = gh * problem.B(t);
      const Matrix<Scalar> K = form.full(t);
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          e_loc[i][j] += weight * (dpsi[i] * dpsi[j] * gb + dpsi[i] * psi[j] * K);
          n_loc[i][j] += w * (dpsi[i] * dpsi[j] * gh + psi[i] * psi[j] * tr.gram_v());
        }
        if (!problem.source().zero) l_loc[i] += weight * dpsi[i] * (gh * problem.f(t));
      }
    }
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        detail::add_block<Scalar>(e_trip, (c + i) * n, (c + j) * n, e_loc[i][j]);
        detail::add_block<Scalar>(n_trip, (c + i) * n, (c + j) * n, n_loc[i][j]);
      }
      sys.rhs.segment((c + i) * n, n) += l_loc[i];
    }
  }
  sys.E.resize(total, total);
  sys.E.setFromTriplets(e_trip.begin(), e_trip.end());
  sys.norm.resize(total, total);
  sys.norm.setFromTriplets(n_trip.begin(), n_trip.end());
  return sys;
}

template <RealScalar Scalar>
Trajectory<Scalar> solve_spacetime(const EvolutionProblem<Scalar>& problem, Index n_cells) {
  const Index n = problem.dim();
  if (problem.trivial()) {
    if (!problem.form().is_single()) throw ConfigError("space-time solver needs a single Lipschitz form");
    Trajectory<Scalar> out{uniform_times(problem.begin(), problem.end(), n_cells + 1),
                           Matrix<Scalar>::Zero(n, n_cells + 1), Matrix<Scalar>::Zero(n, n_cells)};
    return out;
  }
  auto sys = assemble_spacetime(problem, n_cells);
  sys.E.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<Scalar>> lu;
  lu.compute(sys.E);
  if (lu.info() != Eigen::Success) throw NumericalError("space-time system is singular: " + lu.lastErrorMessage());
  const Vector<Scalar> x = lu.solve(sys.rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw NumericalError("space-time solve failed");
  Matrix<Scalar> states = Eigen::Map<const Matrix<Scalar>>(x.data(), n, n_cells + 1);
  return make_trajectory(std::move(sys.times), std::move(states));
}

}  // namespace mreg
