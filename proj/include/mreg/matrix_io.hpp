#pragma once

#include "mreg/errors.hpp"
#include "mreg/types.hpp"

#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace mreg {

// Dense square matrix text format: the dimension n, then n*n decimal numbers
// in row-major order, whitespace separated.
template <RealScalar Scalar>
void write_matrix(std::ostream& os, const Matrix<Scalar>& m) {
  if (m.rows() != m.cols()) throw DimensionError("only square matrices are serializable");
  os << m.rows() << '\n';
  os << std::setprecision(std::numeric_limits<Scalar>::max_digits10);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << m(i, j);
    }
    os << '\n';
  }
}

template <RealScalar Scalar = double>
Matrix<Scalar> read_matrix(std::istream& is) {
  long long n = 0;
  if (!(is >> n) || n <= 0) throw ConfigError("matrix file: expected a positive dimension header");
  Matrix<Scalar> m(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      Scalar value;
      if (!(is >> value)) {
        std::ostringstream os;
        os << "matrix file: expected " << n * n << " entries, got " << i * n + j;
        throw ConfigError(os.str());
      }
      m(i, j) = value;
    }
  }
  std::string extra;
  if (is >> extra) throw ConfigError("matrix file: trailing data after " + std::to_string(n * n) + " entries");
  return m;
}

}  // namespace mreg
