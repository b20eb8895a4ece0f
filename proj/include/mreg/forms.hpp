#pragma once

#include "mreg/errors.hpp"
#include "mreg/linalg.hpp"
#include "mreg/triple.hpp"
#include "mreg/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mreg {

// Constants of a decomposition a = a1 + a2 on an interval of length T:
//   |a1(t,u,v)| <= M1 |u|_V |v|_V,        a1(t,u,u) >= alpha |u|_V^2,
//   |a1(t,.,.) - a1(s,.,.)| <= Mdot1 |t-s|, |a2(t,u,v)| <= M2 |u|_V |v|_H.
// omega records the H-shift already absorbed into a1 (zero for coercive data).
template <RealScalar Scalar>
struct FormConstants {
  Scalar M1{};
  Scalar alpha{};
  Scalar Mdot1{};
  Scalar M2{};
  Scalar omega{};
  Scalar T{};

  void validate() const {
    std::ostringstream os;
    if (!(alpha > 0)) os << "alpha must be positive (got " << alpha << "); ";
    if (!(M1 >= alpha * (1 - Scalar(1e-12)))) os << "M1 must be >= alpha (M1=" << M1 << ", alpha=" << alpha << "); ";
    if (!(Mdot1 >= 0)) os << "Mdot1 must be >= 0; ";
    if (!(M2 >= 0)) os << "M2 must be >= 0; ";
    if (!(omega >= 0)) os << "omega must be >= 0; ";
    if (!(T > 0)) os << "horizon T must be positive; ";
    if (!os.str().empty()) throw ValidationError("invalid form constants: " + os.str());
  }
};

// Outcome of checking the decomposition invariants on a set of sample times.
template <RealScalar Scalar>
struct FormCheck {
  bool symmetric = true;
  bool coercive = true;
  bool bounded = true;
  bool lipschitz = true;
  bool a2_bounded = true;
  Scalar worst_asymmetry = 0;
  Scalar min_coercivity = std::numeric_limits<Scalar>::infinity();
  Scalar max_norm = 0;
  Scalar max_lipschitz = 0;
  Scalar max_a2_norm = 0;

  bool ok() const { return symmetric && coercive && bounded && lipschitz && a2_bounded; }

  std::string describe() const {
    std::ostringstream os;
    if (!symmetric) os << "a1 not symmetric (relative asymmetry " << worst_asymmetry << "); ";
    if (!coercive) os << "a1 not coercive with the declared alpha (measured " << min_coercivity << "); ";
    if (!bounded) os << "a1 exceeds M1 (measured " << max_norm << "); ";
    if (!lipschitz) os << "a1 exceeds Mdot1 (measured " << max_lipschitz << "); ";
    if (!a2_bounded) os << "a2 exceeds M2 (measured " << max_a2_norm << "); ";
    return os.str();
  }
};

template <RealScalar Scalar>
std::vector<Scalar> uniform_times(Scalar begin, Scalar end, Index n) {
  std::vector<Scalar> times(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    times[static_cast<std::size_t>(i)] = i + 1 == n ? end : begin + (end - begin) * Scalar(i) / Scalar(n - 1);
  return times;
}

template <RealScalar Scalar>
Scalar min_generalized_eigenvalue(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix<Scalar>> ges(symmetric_part(a), b,
                                                               Eigen::EigenvaluesOnly);
  return ges.eigenvalues()(0);
}

template <RealScalar Scalar>
Scalar max_generalized_eigenvalue(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix<Scalar>> ges(symmetric_part(a), b,
                                                               Eigen::EigenvaluesOnly);
  return ges.eigenvalues()(ges.eigenvalues().size() - 1);
}

namespace detail {

template <RealScalar Scalar>
Scalar time_slack(Scalar begin, Scalar end) {
  return Scalar(1e-12) * std::max({Scalar(1), std::abs(begin), std::abs(end)});
}

}  // namespace detail

// Time-dependent form a(t) = a1(t) + a2(t) on [begin, begin + T].
// a1(t) is a symmetric V -> V' coordinate matrix; a2(t) is a V -> H
// coordinate matrix, so a2(t,u,v) = (A2 u | v)_H and its V' incarnation is
// G_H A2. Construction validates all invariants on 33 sample times.
template <RealScalar Scalar>
class FormDecomposition {
 public:
  using MatrixType = Matrix<Scalar>;

  FormDecomposition(GelfandTriple<Scalar> triple, OperatorFamily<Scalar> a1,
                    OperatorFamily<Scalar> a2, FormConstants<Scalar> constants,
                    Scalar begin = 0)
      : triple_(std::move(triple)),
        a1_(std::move(a1)),
        a2_(std::move(a2)),
        constants_(constants),
        begin_(begin) {
    if (!a1_) throw ValidationError("form needs an a1 family");
    constants_.validate();
    const auto check = check_on(uniform_times(this->begin(), end(), 33));
    if (!check.ok()) throw ValidationError("form invariants violated: " + check.describe());
  }

  const GelfandTriple<Scalar>& triple() const { return triple_; }
  const FormConstants<Scalar>& constants() const { return constants_; }
  Index dim() const { return triple_.dim(); }
  Scalar begin() const { return begin_; }
  Scalar end() const { return begin_ + constants_.T; }
  Scalar horizon() const { return constants_.T; }
  bool has_a2() const { return static_cast<bool>(a2_); }
  const OperatorFamily<Scalar>& a1_family() const { return a1_; }
  const OperatorFamily<Scalar>& a2_family() const { return a2_; }

  bool contains(Scalar t) const {
    const Scalar slack = detail::time_slack(begin(), end());
    return t >= begin() - slack && t <= end() + slack;
  }

  MatrixType a1(Scalar t) const {
    MatrixType m = a1_(clamp(t));
    if (m.rows() != dim() || m.cols() != dim()) throw DimensionError("a1(t) has the wrong shape");
    return m;
  }

  MatrixType a2(Scalar t) const {
    if (!a2_) {
      (void)clamp(t);
      return MatrixType::Zero(dim(), dim());
    }
    MatrixType m = a2_(clamp(t));
    if (m.rows() != dim() || m.cols() != dim()) throw DimensionError("a2(t) has the wrong shape");
    return m;
  }

  // The full operator A(t) = A1(t) + G_H A2(t) in V' coordinates.
  MatrixType full(Scalar t) const {
    if (!a2_) return a1(t);
    return a1(t) + triple_.gram_h() * a2(t);
  }

  std::pair<MatrixType, MatrixType> assemble(Scalar t) const { return {a1(t), a2(t)}; }

  // Check the decomposition invariants against the declared constants.
  FormCheck<Scalar> check_on(std::vector<Scalar> times) const {
    std::sort(times.begin(), times.end());
    FormCheck<Scalar> out;
    const auto& c = constants_;
    MatrixType previous;
    Scalar previous_t = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const Scalar t = times[k];
      const MatrixType m1 = a1(t);
      const Scalar asym = asymmetry(m1);
      out.worst_asymmetry = std::max(out.worst_asymmetry, asym);
      if (asym > Scalar(1e-12)) out.symmetric = false;

      const Scalar coercivity = min_generalized_eigenvalue(m1, triple_.gram_v());
      out.min_coercivity = std::min(out.min_coercivity, coercivity);
      if (coercivity < c.alpha * (1 - Scalar(1e-10))) out.coercive = false;

      const Scalar norm1 = triple_.operator_norm(m1, Space::V, Space::Vdual);
      out.max_norm = std::max(out.max_norm, norm1);
      if (norm1 > c.M1 * (1 + Scalar(1e-10))) out.bounded = false;

      if (k > 0 && t > previous_t) {
        const Scalar dt = t - previous_t;
        const Scalar diff = triple_.operator_norm(MatrixType(m1 - previous), Space::V, Space::Vdual);
        out.max_lipschitz = std::max(out.max_lipschitz, diff / dt);
        if (diff > c.Mdot1 * dt * (1 + Scalar(1e-8)) + Scalar(1e-13) * c.M1) out.lipschitz = false;
      }
      if (a2_) {
        const Scalar norm2 = triple_.operator_norm(a2(t), Space::V, Space::H);
        out.max_a2_norm = std::max(out.max_a2_norm, norm2);
        if (norm2 > c.M2 * (1 + Scalar(1e-10)) + Scalar(1e-14)) out.a2_bounded = false;
      }
      previous = m1;
      previous_t = t;
    }
    return out;
  }

 private:
  Scalar clamp(Scalar t) const {
    if (!contains(t)) {
      std::ostringstream os;
      os << "time " << t << " outside the form interval [" << begin() << ", " << end() << "]";
      throw RangeError(os.str());
    }
    return std::clamp(t, begin(), end());
  }

  GelfandTriple<Scalar> triple_;
  OperatorFamily<Scalar> a1_;
  OperatorFamily<Scalar> a2_;
  FormConstants<Scalar> constants_;
  Scalar begin_;
};

template <RealScalar Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> assemble(const FormDecomposition<Scalar>& form, Scalar t) {
  return form.assemble(t);
}

// Measure constants of raw families on n uniform samples. Mdot1 is the
// largest difference quotient between consecutive samples.
template <RealScalar Scalar>
FormConstants<Scalar> measure_constants(const GelfandTriple<Scalar>& triple,
                                        const OperatorFamily<Scalar>& a1,
                                        const OperatorFamily<Scalar>& a2, Scalar begin,
                                        Scalar T, Index n_samples, Scalar omega = 0) {
  if (n_samples < 2) throw ValidationError("need at least two time samples");
  FormConstants<Scalar> c;
  c.alpha = std::numeric_limits<Scalar>::infinity();
  c.omega = omega;
  c.T = T;
  const auto times = uniform_times(begin, begin + T, n_samples);
  Matrix<Scalar> previous;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Matrix<Scalar> m1 = a1(times[k]);
    c.alpha = std::min(c.alpha, min_generalized_eigenvalue(m1, triple.gram_v()));
    c.M1 = std::max(c.M1, triple.operator_norm(m1, Space::V, Space::Vdual));
    if (k > 0) {
      const Scalar dt = times[k] - times[k - 1];
      c.Mdot1 = std::max(c.Mdot1,
                         triple.operator_norm(Matrix<Scalar>(m1 - previous), Space::V, Space::Vdual) / dt);
    }
    if (a2) c.M2 = std::max(c.M2, triple.operator_norm(a2(times[k]), Space::V, Space::H));
    previous = m1;
  }
  return c;
}

template <RealScalar Scalar>
FormConstants<Scalar> estimate_constants(const FormDecomposition<Scalar>& form, Index n_time_samples) {
  return measure_constants(form.triple(), form.a1_family(), form.a2_family(), form.begin(),
                           form.horizon(), n_time_samples, form.constants().omega);
}

// Form whose constants are measured on n_samples uniform times (257 by
// default, a superset of the 33-point validation grid).
template <RealScalar Scalar>
FormDecomposition<Scalar> measured_form(GelfandTriple<Scalar> triple, OperatorFamily<Scalar> a1,
                                        OperatorFamily<Scalar> a2, Scalar T, Scalar begin = 0,
                                        Index n_samples = 257, Scalar omega = 0) {
  auto c = measure_constants(triple, a1, a2, begin, T, n_samples, omega);
  return FormDecomposition<Scalar>(std::move(triple), std::move(a1), std::move(a2), c, begin);
}

template <RealScalar Scalar>
FormDecomposition<Scalar> constant_form(GelfandTriple<Scalar> triple, Matrix<Scalar> a1,
                                        Matrix<Scalar> a2, Scalar T, Scalar begin = 0) {
  FormConstants<Scalar> c;
  c.alpha = min_generalized_eigenvalue(a1, triple.gram_v());
  c.M1 = triple.operator_norm(a1, Space::V, Space::Vdual);
  c.Mdot1 = 0;
  c.M2 = a2.size() ? triple.operator_norm(a2, Space::V, Space::H) : Scalar(0);
  c.T = T;
  OperatorFamily<Scalar> f2;
  if (a2.size()) f2 = [a2](Scalar) { return a2; };
  return FormDecomposition<Scalar>(std::move(triple), [a1](Scalar) { return a1; }, std::move(f2),
                                   c, begin);
}

template <RealScalar Scalar>
FormDecomposition<Scalar> constant_form(GelfandTriple<Scalar> triple, Matrix<Scalar> a1, Scalar T,
                                        Scalar begin = 0) {
  return constant_form(std::move(triple), std::move(a1), Matrix<Scalar>(), T, begin);
}

// One-dimensional form a1(t,u,v) = k(t) u v (+ a2(t,u,v) = q(t) u v_H) on
// scalar Gram matrices.
template <RealScalar Scalar>
FormDecomposition<Scalar> scalar_form(std::function<Scalar(Scalar)> a1, Scalar T,
                                      Scalar gram_h = 1, Scalar gram_v = 1,
                                      std::function<Scalar(Scalar)> a2 = {}, Scalar begin = 0) {
  GelfandTriple<Scalar> triple(Matrix<Scalar>::Constant(1, 1, gram_h),
                               Matrix<Scalar>::Constant(1, 1, gram_v));
  OperatorFamily<Scalar> f1 = [a1](Scalar t) { return Matrix<Scalar>::Constant(1, 1, a1(t)); };
  OperatorFamily<Scalar> f2;
  if (a2) f2 = [a2](Scalar t) { return Matrix<Scalar>::Constant(1, 1, a2(t)); };
  return measured_form(std::move(triple), std::move(f1), std::move(f2), T, begin);
}

// Absorb an H-shift: a1 + omega (.|.)_H and a2 - omega (.|.)_H. The sum is
// unchanged; a quasi-coercive a1 becomes coercive for omega large enough.
template <RealScalar Scalar>
std::pair<OperatorFamily<Scalar>, OperatorFamily<Scalar>> shift_families(
    const GelfandTriple<Scalar>& triple, OperatorFamily<Scalar> a1, OperatorFamily<Scalar> a2,
    Scalar omega) {
  const Matrix<Scalar> gram_h = triple.gram_h();
  const Index n = triple.dim();
  OperatorFamily<Scalar> s1 = [a1, gram_h, omega](Scalar t) -> Matrix<Scalar> {
    return a1(t) + omega * gram_h;
  };
  OperatorFamily<Scalar> s2 = [a2, n, omega](Scalar t) -> Matrix<Scalar> {
    Matrix<Scalar> m = a2 ? a2(t) : Matrix<Scalar>::Zero(n, n);
    m.diagonal().array() -= omega;
    return m;
  };
  return {std::move(s1), std::move(s2)};
}

template <RealScalar Scalar>
FormDecomposition<Scalar> quasi_coercive_form(GelfandTriple<Scalar> triple, OperatorFamily<Scalar> a1,
                                              OperatorFamily<Scalar> a2, Scalar omega, Scalar T,
                                              Scalar begin = 0, Index n_samples = 257) {
  auto [s1, s2] = shift_families(triple, std::move(a1), std::move(a2), omega);
  return measured_form(std::move(triple), std::move(s1), std::move(s2), T, begin, n_samples, omega);
}

template <RealScalar Scalar>
FormDecomposition<Scalar> shift_form(const FormDecomposition<Scalar>& form, Scalar omega) {
  auto [s1, s2] = shift_families(form.triple(), form.a1_family(), form.a2_family(), omega);
  const Scalar ch = form.triple().c_h();
  auto c = measure_constants(form.triple(), s1, s2, form.begin(), form.horizon(), 257,
                             form.constants().omega + omega);
  // Declared bounds of the original carry over exactly.
  c.M1 = std::max(c.M1, form.constants().M1 + omega * ch * ch);
  c.Mdot1 = std::max(c.Mdot1, form.constants().Mdot1);
  c.M2 = std::max(c.M2, form.constants().M2 + omega * ch);
  return FormDecomposition<Scalar>(form.triple(), std::move(s1), std::move(s2), c, form.begin());
}

// ---------------------------------------------------------------------------
// P1 finite elements on a uniform 1D mesh.

template <RealScalar Scalar>
struct P1Mesh {
  Index n_elements;
  Scalar left;
  Scalar right;

  Index n_nodes() const { return n_elements + 1; }
  Scalar h() const { return (right - left) / Scalar(n_elements); }

  Vector<Scalar> nodes() const {
    Vector<Scalar> x(n_nodes());
    for (Index i = 0; i <= n_elements; ++i)
      x(i) = i == n_elements ? right : left + h() * Scalar(i);
    return x;
  }

  Matrix<Scalar> stiffness() const {
    Matrix<Scalar> k = Matrix<Scalar>::Zero(n_nodes(), n_nodes());
    const Scalar s = 1 / h();
    for (Index e = 0; e < n_elements; ++e) {
      k(e, e) += s;
      k(e + 1, e + 1) += s;
      k(e, e + 1) -= s;
      k(e + 1, e) -= s;
    }
    return k;
  }

  Matrix<Scalar> mass() const {
    Matrix<Scalar> m = Matrix<Scalar>::Zero(n_nodes(), n_nodes());
    const Scalar d = h() / 3, o = h() / 6;
    for (Index e = 0; e < n_elements; ++e) {
      m(e, e) += d;
      m(e + 1, e + 1) += d;
      m(e, e + 1) += o;
      m(e + 1, e) += o;
    }
    return m;
  }

  // Trapezoidal node weights.
  Vector<Scalar> weights() const {
    Vector<Scalar> w = Vector<Scalar>::Constant(n_nodes(), h());
    w(0) = w(n_elements) = h() / 2;
    return w;
  }

  Matrix<Scalar> lumped_mass() const { return weights().asDiagonal(); }

  // C(i,j) = \int b(x) phi_j'(x) phi_i(x) dx, two-point Gauss per element.
  Matrix<Scalar> advection(const std::function<Scalar(Scalar)>& b) const {
    Matrix<Scalar> c = Matrix<Scalar>::Zero(n_nodes(), n_nodes());
    const Scalar g = 1 / std::sqrt(Scalar(3));
    const Scalar xi[2] = {(1 - g) / 2, (1 + g) / 2};
    for (Index e = 0; e < n_elements; ++e) {
      const Scalar x0 = left + h() * Scalar(e);
      for (Scalar s : xi) {
        const Scalar bx = b(x0 + s * h()) * h() / 2;
        const Scalar phi[2] = {1 - s, s};
        const Scalar dphi[2] = {-1 / h(), 1 / h()};
        for (int a = 0; a < 2; ++a)
          for (int q = 0; q < 2; ++q) c(e + a, e + q) += bx * dphi[q] * phi[a];
      }
    }
    return c;
  }
};

// beta(t, endpoint) with endpoint 0 at x = 0 and 1 at x = 1.
template <typename Scalar>
using BoundaryCoefficient = std::function<Scalar(Scalar, int)>;

template <RealScalar Scalar>
struct RobinOptions {
  bool lumped_mass = false;
  Scalar begin = 0;
  Index beta_samples = 1025;
  // Optional V x H perturbation a2(u, v) += \int b(x) u' v.
  std::function<Scalar(Scalar)> advection;
};

// Laplacian on (0,1) with time-dependent Robin conditions,
//   a(t,u,v) = \int u'v' + beta(t,0) u(0)v(0) + beta(t,1) u(1)v(1),
// stored shifted: a1 = a + omega (.|.)_H, a2 = -omega (.|.)_H. With
// b = sup_t max(-beta, 0) the 1D trace bound
//   |u(x0)|^2 <= eps |u'|^2 + (1 + 1/eps) |u|^2,   eps = 1/(4b)
// gives a1(t,u,u) >= (|u'|^2 + |u|^2)/2 when omega = 1/2 + 2b + 8b^2.
template <RealScalar Scalar>
FormDecomposition<Scalar> robin_form_1d(Index n_elements, BoundaryCoefficient<Scalar> beta,
                                        Scalar beta_lipschitz, Scalar T,
                                        const RobinOptions<Scalar>& options = {}) {
  if (n_elements < 2) throw ValidationError("robin_form_1d needs at least two elements");
  if (!(T > 0)) throw ValidationError("horizon T must be positive");
  if (!(beta_lipschitz >= 0)) throw ValidationError("beta_lipschitz must be nonnegative");
  const P1Mesh<Scalar> mesh{n_elements, 0, 1};
  const Index n = mesh.n_nodes();
  const Scalar begin = options.begin;

  Scalar b_max = 0, b_neg = 0;
  for (Scalar t : uniform_times(begin, begin + T, std::max<Index>(options.beta_samples, 33))) {
    for (int side = 0; side < 2; ++side) {
      const Scalar b = beta(t, side);
      if (!std::isfinite(b)) {
        std::ostringstream os;
        os << "beta(" << t << ", " << side << ") is not finite";
        throw ValidationError(os.str());
      }
      b_max = std::max(b_max, std::abs(b));
      b_neg = std::max(b_neg, -b);
    }
  }
  const Scalar omega = Scalar(0.5) + 2 * b_neg + 8 * b_neg * b_neg;

  const Matrix<Scalar> gram_h = options.lumped_mass ? mesh.lumped_mass() : mesh.mass();
  const Matrix<Scalar> stiff = mesh.stiffness();
  GelfandTriple<Scalar> triple(gram_h, stiff + gram_h);

  const Matrix<Scalar> base = stiff + omega * gram_h;
  Matrix<Scalar> boundary = Matrix<Scalar>::Zero(n, n);
  boundary(0, 0) = 1;
  boundary(n - 1, n - 1) = 1;

  OperatorFamily<Scalar> a1 = [base, beta, n](Scalar t) -> Matrix<Scalar> {
    Matrix<Scalar> m = base;
    m(0, 0) += beta(t, 0);
    m(n - 1, n - 1) += beta(t, 1);
    return m;
  };

  Matrix<Scalar> fixed_a2 = -omega * Matrix<Scalar>::Identity(n, n);
  Scalar advection_norm = 0;
  if (options.advection) {
    const Matrix<Scalar> c = triple.solve_h(mesh.advection(options.advection));
    advection_norm = triple.operator_norm(c, Space::V, Space::H);
    fixed_a2 += c;
  }
  OperatorFamily<Scalar> a2 = [fixed_a2](Scalar) { return fixed_a2; };

  const Scalar boundary_norm = triple.operator_norm(boundary, Space::V, Space::Vdual);
  FormConstants<Scalar> c;
  c.alpha = Scalar(0.5);
  c.M1 = triple.operator_norm(base, Space::V, Space::Vdual) + b_max * boundary_norm;
  c.Mdot1 = beta_lipschitz * boundary_norm;
  c.M2 = omega * triple.c_h() + advection_norm;
  c.omega = omega;
  c.T = T;
  return FormDecomposition<Scalar>(std::move(triple), std::move(a1), std::move(a2), c, begin);
}

// Schroedinger operator -u'' + m(t,x) u on (-L, L) with natural boundary
// conditions and lumped potential quadrature. The V-norm is
// |u'|^2 + sum m0_i u_i^2 w_i, plus a 1e-6 mass floor when m0 vanishes.
template <RealScalar Scalar>
struct SchrodingerSpec {
  Index n_elements;
  Scalar half_width;
  Vector<Scalar> m0;  // nodal values, length n_elements + 1
  std::function<Scalar(Scalar, Scalar)> m;
  Scalar alpha1;
  Scalar alpha2;
  Scalar lipschitz;
  Scalar T;
  Scalar begin = 0;
};

template <RealScalar Scalar>
FormDecomposition<Scalar> schrodinger_form_1d(const SchrodingerSpec<Scalar>& spec) {
  if (spec.n_elements < 2) throw ValidationError("schrodinger_form_1d needs at least two elements");
  if (!(spec.alpha1 > 0 && spec.alpha1 <= spec.alpha2))
    throw ValidationError("need 0 < alpha1 <= alpha2");
  if (!(spec.lipschitz >= 0)) throw ValidationError("Lipschitz constant must be nonnegative");
  const P1Mesh<Scalar> mesh{spec.n_elements, -spec.half_width, spec.half_width};
  const Index n = mesh.n_nodes();
  if (spec.m0.size() != n) throw DimensionError("m0 must have one value per node");
  if ((spec.m0.array() < 0).any() || !spec.m0.allFinite())
    throw ValidationError("m0 must be finite and nonnegative");

  const Vector<Scalar> x = mesh.nodes();
  const Vector<Scalar> w = mesh.weights();

  // Scan the bounds on the node x time grid, report the worst violation.
  const auto times = uniform_times(spec.begin, spec.begin + spec.T, 33);
  Scalar worst = 0;
  std::string worst_what;
  auto record = [&](Scalar violation, const std::string& what) {
    if (violation > worst) {
      worst = violation;
      worst_what = what;
    }
  };
  std::vector<Vector<Scalar>> values;
  values.reserve(times.size());
  for (Scalar t : times) {
    Vector<Scalar> mt(n);
    for (Index i = 0; i < n; ++i) {
      mt(i) = spec.m(t, x(i));
      std::ostringstream where;
      where << " at t=" << t << ", x=" << x(i);
      if (!std::isfinite(mt(i))) throw ValidationError("m is not finite" + where.str());
      const Scalar scale = std::max(Scalar(1), std::abs(spec.m0(i)));
      record((spec.alpha1 * spec.m0(i) - mt(i)) / scale, "lower bound alpha1*m0 <= m" + where.str());
      record((mt(i) - spec.alpha2 * spec.m0(i)) / scale, "upper bound m <= alpha2*m0" + where.str());
    }
    values.push_back(std::move(mt));
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    const Scalar dt = times[k] - times[k - 1];
    for (Index i = 0; i < n; ++i) {
      const Scalar scale = std::max(Scalar(1), std::abs(spec.m0(i)));
      std::ostringstream where;
      where << " between t=" << times[k - 1] << " and t=" << times[k] << " at x=" << x(i);
      record((std::abs(values[k](i) - values[k - 1](i)) - spec.lipschitz * dt * spec.m0(i)) / scale,
             "Lipschitz bound |m(t)-m(s)| <= M|t-s| m0" + where.str());
    }
  }
  if (worst > Scalar(1e-12)) {
    std::ostringstream os;
    os << "potential violates its bounds: worst violation " << worst << " (" << worst_what << ")";
    throw ValidationError(os.str());
  }

  const Matrix<Scalar> stiff = mesh.stiffness();
  const Matrix<Scalar> gram_h = mesh.mass();
  Matrix<Scalar> gram_v = stiff;
  gram_v.diagonal() += (spec.m0.array() * w.array()).matrix();
  const bool floored = (spec.m0.array() == 0).any();
  if (floored) gram_v += Scalar(1e-6) * gram_h;
  GelfandTriple<Scalar> triple(gram_h, gram_v);

  FormConstants<Scalar> c;
  c.alpha = std::min(Scalar(1), spec.alpha1);
  if (floored) {
    // |u'|^2 + sum m0 u^2 w >= (1 - 1e-6 c_H^2) |u|_V^2
    const Scalar ch = triple.c_h();
    c.alpha *= 1 - Scalar(1e-6) * ch * ch;
  }
  c.M1 = std::max(Scalar(1), spec.alpha2);
  c.Mdot1 = spec.lipschitz;
  c.M2 = 0;
  c.T = spec.T;

  auto m = spec.m;
  OperatorFamily<Scalar> a1 = [stiff, m, x, w](Scalar t) -> Matrix<Scalar> {
    Matrix<Scalar> out = stiff;
    for (Index i = 0; i < x.size(); ++i) out(i, i) += m(t, x(i)) * w(i);
    return out;
  };
  return FormDecomposition<Scalar>(std::move(triple), std::move(a1), {}, c, spec.begin);
}

// ---------------------------------------------------------------------------

// Lipschitz on each [t_{i-1}, t_i], possibly jumping at the breakpoints.
template <RealScalar Scalar>
class PiecewiseForm {
 public:
  PiecewiseForm(std::vector<Scalar> breakpoints, std::vector<FormDecomposition<Scalar>> pieces)
      : breakpoints_(std::move(breakpoints)), pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw ValidationError("piecewise form needs at least one piece");
    if (breakpoints_.size() != pieces_.size() + 1)
      throw ValidationError("need exactly one more breakpoint than pieces");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
      if (!(breakpoints_[i] > breakpoints_[i - 1]))
        throw ValidationError("breakpoints must be strictly increasing");
    const auto& g = pieces_.front().triple();
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const auto& p = pieces_[i];
      const Scalar slack = detail::time_slack(breakpoints_.front(), breakpoints_.back());
      if (std::abs(p.begin() - breakpoints_[i]) > slack || std::abs(p.end() - breakpoints_[i + 1]) > slack) {
        std::ostringstream os;
        os << "piece " << i << " is defined on [" << p.begin() << ", " << p.end()
           << "] but the breakpoints give [" << breakpoints_[i] << ", " << breakpoints_[i + 1] << "]";
        throw ValidationError(os.str());
      }
      if (p.dim() != g.dim() || p.triple().gram_h() != g.gram_h() || p.triple().gram_v() != g.gram_v())
        throw ValidationError("all pieces must share one Gelfand triple");
    }
  }

  static PiecewiseForm single(FormDecomposition<Scalar> form) {
    std::vector<Scalar> bp{form.begin(), form.end()};
    std::vector<FormDecomposition<Scalar>> pieces{std::move(form)};
    return PiecewiseForm(std::move(bp), std::move(pieces));
  }

  const std::vector<Scalar>& breakpoints() const { return breakpoints_; }
  const std::vector<FormDecomposition<Scalar>>& pieces() const { return pieces_; }
  std::size_t size() const { return pieces_.size(); }
  bool is_single() const { return pieces_.size() == 1; }
  const GelfandTriple<Scalar>& triple() const { return pieces_.front().triple(); }
  Index dim() const { return triple().dim(); }
  Scalar begin() const { return breakpoints_.front(); }
  Scalar end() const { return breakpoints_.back(); }

  // Piece i owns [t_{i-1}, t_i); the final time belongs to the last piece.
  std::size_t piece_index(Scalar t) const {
    const auto it = std::upper_bound(breakpoints_.begin() + 1, breakpoints_.end() - 1, t);
    return static_cast<std::size_t>(it - (breakpoints_.begin() + 1));
  }
  const FormDecomposition<Scalar>& piece_at(Scalar t) const { return pieces_[piece_index(t)]; }

  // Worst-case constants over all pieces, horizon = full interval.
  FormConstants<Scalar> combined_constants() const {
    FormConstants<Scalar> c = pieces_.front().constants();
    for (const auto& p : pieces_) {
      const auto& q = p.constants();
      c.M1 = std::max(c.M1, q.M1);
      c.alpha = std::min(c.alpha, q.alpha);
      c.Mdot1 = std::max(c.Mdot1, q.Mdot1);
      c.M2 = std::max(c.M2, q.M2);
      c.omega = std::max(c.omega, q.omega);
    }
    c.T = end() - begin();
    return c;
  }

 private:
  std::vector<Scalar> breakpoints_;
  std::vector<FormDecomposition<Scalar>> pieces_;
};

}  // namespace mreg
