#pragma once

#include "mreg/types.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

namespace mreg {

template <typename Scalar>
struct QuadratureRule {
  Vector<Scalar> nodes;
  Vector<Scalar> weights;
};

// n-point Gauss-Legendre rule on [a, b]. Newton iteration on P_n from the
// Chebyshev-like initial guesses, then symmetric completion.
template <RealScalar Scalar>
QuadratureRule<Scalar> gauss_legendre(Index n, Scalar a = Scalar(-1),
                                      Scalar b = Scalar(1)) {
  QuadratureRule<Scalar> rule{Vector<Scalar>(n), Vector<Scalar>(n)};
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar half_len = (b - a) / 2;
  const Scalar mid = (a + b) / 2;
  const Index m = (n + 1) / 2;
  for (Index i = 0; i < m; ++i) {
    Scalar z = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
    Scalar dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      Scalar p0 = 1, p1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const Scalar p2 = p1;
        p1 = p0;
        p0 = ((2 * Scalar(j) - 1) * z * p1 - (Scalar(j) - 1) * p2) / Scalar(j);
      }
      dp = Scalar(n) * (z * p0 - p1) / (z * z - 1);
      const Scalar dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) <= 4 * std::numeric_limits<Scalar>::epsilon()) break;
    }
    // Recompute derivative at the converged root for the weight.
    {
      Scalar p0 = 1, p1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const Scalar p2 = p1;
        p1 = p0;
        p0 = ((2 * Scalar(j) - 1) * z * p1 - (Scalar(j) - 1) * p2) / Scalar(j);
      }
      dp = Scalar(n) * (z * p0 - p1) / (z * z - 1);
    }
    const Scalar w = 2 / ((1 - z * z) * dp * dp);
    rule.nodes(i) = mid - half_len * z;
    rule.nodes(n - 1 - i) = mid + half_len * z;
    rule.weights(i) = half_len * w;
    rule.weights(n - 1 - i) = half_len * w;
  }
  return rule;
}

}  // namespace mreg
