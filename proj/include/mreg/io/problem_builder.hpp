#pragma once

#include "mreg/evolve.hpp"
#include "mreg/forms.hpp"
#include "mreg/io/config.hpp"
#include "mreg/io/expr.hpp"
#include "mreg/quasilinear.hpp"

#include <optional>
#include <string>

namespace mreg::io {

// A form read from a config, with the spatial coordinate of every degree
// of freedom (mesh nodes for the 1D forms, the index otherwise).
struct BuiltForm {
  PiecewiseForm<double> form;
  Eigen::VectorXd nodes;
};

Eigen::MatrixXd parse_matrix(const std::string& text);

BuiltForm build_form(const Config& cfg, const std::string& section = "form");
FormDecomposition<double> build_form_piece(const Config& cfg, const std::string& section, double begin, double T);

EvolutionProblem<double> build_problem(const Config& cfg);
QuasilinearProblem<double> build_quasilinear(const Config& cfg);

// [run] exact = expression in (t, x), evaluated at the nodes.
std::optional<VectorFamily<double>> exact_solution(const Config& cfg);

}  // namespace mreg::io
