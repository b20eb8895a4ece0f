#pragma once

#include "mreg/mreg.hpp"
#include "mreg/random_problems.hpp"

#include <cmath>
#include <random>

namespace support {

using mreg::Index;
using Mat = mreg::Matrix<double>;
using Vec = mreg::Vector<double>;

inline mreg::FormDecomposition<double> scalar(std::function<double(double)> a, double T = 1, double begin = 0) {
  return mreg::scalar_form<double>(std::move(a), T, 1.0, 1.0, {}, begin);
}

inline mreg::EvolutionProblem<double> scalar_problem(std::function<double(double)> a, double u0, double b = 1,
                                                     double T = 1) {
  auto form = scalar(std::move(a), T);
  auto B = b == 1 ? mreg::identity_perturbation<double>()
                  : mreg::constant_perturbation<double>(form.triple(), Mat::Constant(1, 1, b));
  return {std::move(form), B, mreg::zero_source<double>(), Vec::Constant(1, u0)};
}

inline mreg::FormDecomposition<double> robin(Index n, std::function<double(double)> beta, double lip, double T = 1,
                                            double begin = 0, bool lumped = false) {
  mreg::RobinOptions<double> opt;
  opt.begin = begin;
  opt.lumped_mass = lumped;
  return mreg::robin_form_1d<double>(n, [beta](double t, int) { return beta(t); }, lip, T, opt);
}

// f = mass * 1 (H-coordinates: the constant function 1), u0 = nodal x.
inline mreg::EvolutionProblem<double> robin_problem(Index n, std::function<double(double)> beta, double lip) {
  auto form = robin(n, std::move(beta), lip);
  const Vec x = mreg::P1Mesh<double>{n, 0.0, 1.0}.nodes();
  return {std::move(form), mreg::identity_perturbation<double>(), mreg::constant_source<double>(Vec::Ones(n + 1)),
          x};
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace support
