#pragma once

#include "mreg/errors.hpp"
#include "mreg/types.hpp"

#include <algorithm>
#include <vector>

namespace mreg {

// Nodal states u_k (columns) on a strictly increasing grid and the backward
// difference quotients (u_{k+1} - u_k) / (t_{k+1} - t_k) per interval.
template <RealScalar Scalar>
struct Trajectory {
  std::vector<Scalar> times;
  Matrix<Scalar> states;
  Matrix<Scalar> derivative;

  Index dim() const { return states.rows(); }
  Index n_steps() const { return static_cast<Index>(times.size()) - 1; }
  Scalar begin() const { return times.front(); }
  Scalar end() const { return times.back(); }
  Scalar dt(Index k) const { return times[static_cast<std::size_t>(k + 1)] - times[static_cast<std::size_t>(k)]; }
  auto state(Index k) const { return states.col(k); }
  auto final_state() const { return states.col(states.cols() - 1); }

  void fill_derivative() {
    derivative.resize(states.rows(), n_steps());
    for (Index k = 0; k < n_steps(); ++k) derivative.col(k) = (states.col(k + 1) - states.col(k)) / dt(k);
  }

  // Piecewise-linear interpolation in time.
  Vector<Scalar> at(Scalar t) const {
    if (t <= times.front()) return states.col(0);
    if (t >= times.back()) return states.col(states.cols() - 1);
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const Index k = static_cast<Index>(it - times.begin()) - 1;
    const Scalar s = (t - times[static_cast<std::size_t>(k)]) / dt(k);
    return (1 - s) * states.col(k) + s * states.col(k + 1);
  }

  void validate() const {
    if (times.size() < 2) throw ValidationError("trajectory needs at least two nodes");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw ValidationError("trajectory times must be strictly increasing");
    if (states.cols() != static_cast<Index>(times.size()))
      throw DimensionError("trajectory has a state count different from the node count");
    if (derivative.cols() != n_steps() || derivative.rows() != states.rows())
      throw DimensionError("trajectory derivative has the wrong shape");
    if (!states.allFinite()) throw ValidationError("trajectory states are not finite");
  }
};

template <RealScalar Scalar>
Trajectory<Scalar> make_trajectory(std::vector<Scalar> times, Matrix<Scalar> states) {
  Trajectory<Scalar> tr{std::move(times), std::move(states), {}};
  tr.fill_derivative();
  tr.validate();
  return tr;
}

// Nodal samples of a function of time.
template <RealScalar Scalar, typename F>
Trajectory<Scalar> sample_trajectory(const F& u, const std::vector<Scalar>& times) {
  const Vector<Scalar> first = u(times.front());
  Matrix<Scalar> states(first.size(), static_cast<Index>(times.size()));
  states.col(0) = first;
  for (std::size_t k = 1; k < times.size(); ++k) states.col(static_cast<Index>(k)) = u(times[k]);
  return make_trajectory(times, std::move(states));
}

}  // namespace mreg
