#include "doctest.h"
#include "support.hpp"

using namespace mreg;
using namespace support;

namespace {

double final_value(const EvolutionProblem<double>& p, Index n, double theta = 1) {
  return solve_theta(p, n, theta).final_state()(0);
}

double order(double e_coarse, double e_fine, double ratio = 2) { return std::log(e_coarse / e_fine) / std::log(ratio); }

}  // namespace

TEST_SUITE("evolve") {
  TEST_CASE("scalar decay, backward Euler") {
    const auto p = scalar_problem([](double) { return 1.0; }, 1.0);
    for (Index n : {10, 20, 40, 80}) CHECK(std::abs(final_value(p, n) - std::exp(-1.0)) <= 0.5 / double(n));
    const double e1 = std::abs(final_value(p, 40) - std::exp(-1.0)), e2 = std::abs(final_value(p, 80) - std::exp(-1.0));
    CHECK(order(e1, e2) == doctest::Approx(1).epsilon(0.05));
    const double c1 = std::abs(final_value(p, 40, 0.5) - std::exp(-1.0)),
                 c2 = std::abs(final_value(p, 80, 0.5) - std::exp(-1.0));
    CHECK(order(c1, c2) == doctest::Approx(2).epsilon(0.05));
  }

  TEST_CASE("constant perturbation and time-dependent coefficient") {
    const auto p = scalar_problem([](double) { return 1.0; }, 1.0, 2.0);
    const double e1 = std::abs(final_value(p, 40) - std::exp(-0.5)), e2 = std::abs(final_value(p, 80) - std::exp(-0.5));
    CHECK(e2 < 5e-3);
    CHECK(order(e1, e2) == doctest::Approx(1).epsilon(0.05));
    const auto q = scalar_problem([](double t) { return 1 + t; }, 1.0);
    CHECK(std::abs(final_value(q, 200) - std::exp(-1.5)) < 2e-3);
    CHECK(std::abs(final_value(q, 200, 0.5) - std::exp(-1.5)) < 1e-5);
  }

  TEST_CASE("perturbation validation") {
    GelfandTriple<double> tr(Mat::Identity(2, 2), Mat::Identity(2, 2));
    Mat b(2, 2);
    b << 1, 0.5, -0.5, 2;  // symmetric part diag(1, 2)
    const auto p = constant_perturbation<double>(tr, b);
    CHECK(p.beta0 == doctest::Approx(1));
    CHECK(p.beta1 == doctest::Approx(2));
    CHECK_THROWS_AS(make_perturbation<double>(tr, [b](double) { return b; }, 1.5, 2.0, 0.0, 1.0), ValidationError);
    std::mt19937_64 rng(20);
    for (int i = 0; i < 100; ++i) {
      const Vec g = random_vector<double>(rng, 2);
      const double q = g.dot(b * g);
      CHECK(q >= p.beta0 * g.squaredNorm() * (1 - 1e-12));
      CHECK(q <= p.beta1 * g.squaredNorm() * (1 + 1e-12));
    }
  }

  TEST_CASE("Robin problem against the oracle is first order") {
    const auto p = robin_problem(16, [](double t) { return 1 + t; }, 1.0);
    const auto ref = reference_solve(p, 1e-10);
    auto err = [&](Index n) {
      const auto u = solve_theta(p, n);
      std::vector<double> sq;
      for (std::size_t k = 0; k < u.times.size(); ++k)
        sq.push_back(std::pow(p.triple().norm_h(Vec(u.states.col(static_cast<Index>(k)) - ref(u.times[k]))), 2));
      return std::sqrt(detail::trapezoid(u.times, sq));
    };
    const double e1 = err(50), e2 = err(100), e3 = err(200);
    CHECK(e3 <= 1.0 / 200);
    CHECK(order(e1, e2) >= 0.8);
    CHECK(order(e2, e3) >= 0.8);
  }

  TEST_CASE("gluing") {
    std::vector<FormDecomposition<double>> pieces;
    pieces.push_back(scalar([](double) { return 1.0; }, 0.5, 0.0));
    pieces.push_back(scalar([](double) { return 2.0; }, 0.5, 0.5));
    EvolutionProblem<double> p(PiecewiseForm<double>({0.0, 0.5, 1.0}, std::move(pieces)),
                               identity_perturbation<double>(), zero_source<double>(), Vec::Ones(1));
    for (Index n : {10, 20, 40}) {
      const auto u = solve_glued(p, n);
      CHECK(std::abs(u.final_state()(0) - std::exp(-1.5)) <= 0.5 / double(2 * n));
      const auto first = solve_theta(p.piece(0, Vec::Ones(1)), n);
      CHECK(u.states(0, n) == first.final_state()(0));
      CHECK(u.times[static_cast<std::size_t>(n)] == 0.5);
    }
    // a glued solve over all 2n steps equals the single solve on the aligned grid
    const auto whole = solve_theta(p, 40);
    const auto glued = solve_glued(p, 20);
    CHECK((whole.states - glued.states).cwiseAbs().maxCoeff() < 1e-14);
    CHECK_THROWS_AS(solve_theta(p, 3), ConfigError);
  }

  TEST_CASE("single-piece gluing is bitwise the plain solve") {
    const auto p = robin_problem(8, [](double t) { return 1 + t; }, 1.0);
    const auto a = solve_theta(p, 30, 0.7), b = solve_glued(p, 30, 0.7);
    CHECK(a.times == b.times);
    CHECK((a.states.array() == b.states.array()).all());
  }

  TEST_CASE("Robin jump against the per-piece oracle") {
    std::vector<FormDecomposition<double>> pieces;
    pieces.push_back(robin(8, [](double) { return 0.0; }, 0.0, 0.5, 0.0));
    pieces.push_back(robin(8, [](double) { return 1.0; }, 0.0, 0.5, 0.5));
    const Vec x = P1Mesh<double>{8, 0.0, 1.0}.nodes();
    EvolutionProblem<double> p(PiecewiseForm<double>({0.0, 0.5, 1.0}, std::move(pieces)),
                               identity_perturbation<double>(), constant_source<double>(Vec::Ones(9)), x);
    const auto r0 = reference_solve(p.piece(0, x), 1e-11);
    const auto r1 = reference_solve(p.piece(1, r0(0.5)), 1e-11);
    auto err = [&](Index n) {
      const auto u = solve_glued(p, n);
      return p.triple().norm_h(Vec(u.final_state() - r1(1.0)));
    };
    const double e1 = err(20), e2 = err(40), e3 = err(80);
    CHECK(order(e1, e2) >= 0.8);
    CHECK(order(e2, e3) >= 0.8);
  }

  TEST_CASE("singular step matrix reports the step") {
    // B = 0 is not admissible, so build an indefinite scalar problem through the raw types
    FormConstants<double> c{1.0, 1.0, 0.0, 0.0, 0.0, 1.0};
    GelfandTriple<double> tr(Mat::Identity(1, 1), Mat::Identity(1, 1));
    FormDecomposition<double> f(tr, [](double) { return Mat::Constant(1, 1, 1.0); }, {}, c);
    Perturbation<double> b{[](double) { return Mat::Constant(1, 1, -0.1); }, 1.0, 1.0, false};
    EvolutionProblem<double> p(f, b, zero_source<double>(), Vec::Ones(1));
    try {
      solve_theta(p, 10);
      FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
      CHECK(e.step() == 0);
    }
  }
}

TEST_SUITE("spacetime") {
  TEST_CASE("coercivity constants by hand") {
    FormConstants<double> c{1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    auto k = coercivity_constants(c, 1.0);
    CHECK(k.epsilon == 0.5);
    CHECK(k.gamma == 1);
    CHECK(k.delta == 0.5);
    c.M2 = 2;
    c.T = 0.7;
    k = coercivity_constants(c, 1.0);
    CHECK(k.gamma == doctest::Approx(5));
    CHECK(k.delta == doctest::Approx(std::exp(-5 * 0.7) / 2));
  }

  TEST_CASE("a-priori constant against the quadratic inequality") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 1000; ++i) {
      const double delta = std::exp(-6 * u(rng)), M1 = 10 * u(rng) + 1e-3, f = u(rng), u0 = u(rng);
      // largest X with delta X^2 <= f X + M1/2 u0^2
      const double X = (f + std::sqrt(f * f + 2 * delta * M1 * u0 * u0)) / (2 * delta);
      CHECK(X <= apriori_constant(delta, M1) * (u0 + f) * (1 + 1e-12));
    }
  }

  TEST_CASE("zero data gives the zero solution") {
    auto p = scalar_problem([](double) { return 1.0; }, 0.0);
    const auto u = solve_spacetime(p, 16);
    CHECK(u.states.isZero(0));
  }

  TEST_CASE("scalar decay converges at first order and keeps u0") {
    const auto p = scalar_problem([](double) { return 1.0; }, 1.0);
    std::vector<double> e;
    for (Index n : {8, 16, 32, 64}) {
      const auto u = solve_spacetime(p, n);
      CHECK(u.state(0)(0) == doctest::Approx(1).epsilon(1e-13));
      e.push_back(std::abs(u.final_state()(0) - std::exp(-1.0)));
    }
    for (std::size_t i = 1; i < e.size(); ++i) CHECK(order(e[i - 1], e[i]) >= 1 - 0.05);
  }

  TEST_CASE("discrete coercivity") {
    const auto p = robin_problem(8, [](double t) { return 1 + t; }, 1.0);
    const auto sys = assemble_spacetime(p, 12);
    std::mt19937_64 rng(22);
    for (int i = 0; i < 100; ++i) {
      const Vec w = random_vector<double>(rng, sys.E.cols());
      const double e = w.dot(sys.E * w), n = w.dot(sys.norm * w);
      CHECK(e >= sys.constants.delta * n);
    }
  }

  TEST_CASE("space-time and stepping agree within their oracle errors") {
    const auto p = robin_problem(8, [](double t) { return 1 + t; }, 1.0);
    const auto ref = reference_solve(p, 1e-10);
    const auto a = solve_spacetime(p, 64), b = solve_theta(p, 64);
    auto l2 = [&](auto&& diff) {
      std::vector<double> sq;
      for (std::size_t k = 0; k < a.times.size(); ++k) sq.push_back(std::pow(p.triple().norm_h(Vec(diff(k))), 2));
      return std::sqrt(detail::trapezoid(a.times, sq));
    };
    auto col = [](const Trajectory<double>& u, std::size_t k) { return Vec(u.states.col(static_cast<Index>(k))); };
    const double ea = l2([&](std::size_t k) { return col(a, k) - ref(a.times[k]); });
    const double eb = l2([&](std::size_t k) { return col(b, k) - ref(b.times[k]); });
    const double ab = l2([&](std::size_t k) { return col(a, k) - col(b, k); });
    CHECK(ab <= ea + eb);
  }
}

TEST_SUITE("diagnostics") {
  TEST_CASE("norms of e^{-t}") {
    const auto p = scalar_problem([](double) { return 1.0; }, 1.0);
    const auto u = sample_trajectory<double>([](double t) { return Vec::Constant(1, std::exp(-t)); },
                                             uniform_times(0.0, 1.0, 4001));
    const auto d = mr_diagnostics(p, u);
    const double half = (1 - std::exp(-2.0)) / 2;
    CHECK(d.norm_L2V * d.norm_L2V == doctest::Approx(half).epsilon(1e-6));
    CHECK(d.norm_H1H * d.norm_H1H == doctest::Approx(half).epsilon(1e-6));
    CHECK(d.norm_MR * d.norm_MR == doctest::Approx(2 * half).epsilon(1e-6));
    CHECK(d.sup_V_norm == 1);
    CHECK(d.apriori_satisfied);
  }

  TEST_CASE("energy residual vanishes for an autonomous form") {
    std::mt19937_64 rng(23);
    const auto r = random_symmetric_form<double>(rng, 5, 0.5, 5.0);
    EvolutionProblem<double> p(constant_form<double>(r.triple, r.a1, 1.0), identity_perturbation<double>(),
                               zero_source<double>(), random_vector<double>(rng, 5));
    double prev = std::numeric_limits<double>::infinity();
    for (Index n : {20, 40, 80}) {
      const auto d = mr_diagnostics(p, solve_theta(p, n));
      CHECK(d.energy_residual <= std::max(prev / 2 * 1.05, 1e-10 * d.norm_MR * d.norm_MR));
      prev = d.energy_residual;
    }
  }

  TEST_CASE("energy residual of the Robin problem decays") {
    const auto p = robin_problem(16, [](double t) { return 1 + t; }, 1.0);
    std::vector<double> r;
    for (Index n : {50, 100, 200, 400}) r.push_back(mr_diagnostics(p, solve_theta(p, n)).energy_residual);
    CHECK(order(r[2], r[3]) >= 1);
  }

  TEST_CASE("a-priori estimate on random problems") {
    std::mt19937_64 rng(24);
    for (int i = 0; i < 5; ++i) {
      const auto p = random_mr_problem<double>(rng, 6);
      const auto sol = reference_solve(p, 1e-10);
      const auto d = mr_diagnostics(p, sample_oracle(sol, uniform_times(p.begin(), p.end(), 2001)));
      CHECK(d.apriori_satisfied);
      CHECK(d.norm_MR * d.norm_MR == doctest::Approx(d.norm_L2V * d.norm_L2V + d.norm_H1H * d.norm_H1H));
    }
  }
}

TEST_SUITE("calculus") {
  TEST_CASE("integration by parts") {
    const auto grid = uniform_times(0.0, 1.0, 17);
    const auto c = sample_trajectory<double>([](double) { return Vec::Constant(2, 3.0); }, grid);
    CHECK(ibp_check(c, c).absolute == 0);
    const auto t = sample_trajectory<double>([](double s) { return Vec::Constant(1, s); }, grid);
    CHECK(ibp_check(t, t).absolute < 1e-15);
    std::mt19937_64 rng(25);
    for (int i = 0; i < 20; ++i) {
      const auto u = make_trajectory(grid, random_matrix<double>(rng, 5, 17));
      const auto v = make_trajectory(grid, random_matrix<double>(rng, 5, 17));
      CHECK(ibp_check(u, v).relative() <= 1e-12);
    }
  }

  TEST_CASE("product rule") {
    GelfandTriple<double> one(Mat::Identity(1, 1), Mat::Identity(1, 1));
    const auto grid = uniform_times(0.0, 1.0, 9);
    std::mt19937_64 rng(26);
    const auto u = make_trajectory(grid, random_matrix<double>(rng, 1, 9));
    OperatorFamily<double> constant = [](double) { return Mat::Constant(1, 1, 3.0); };
    CHECK(product_rule_check(one, constant, u, 1e-4).absolute <= 1e-12);
    OperatorFamily<double> ident = [](double t) { return Mat::Constant(1, 1, t); };
    const auto ones = sample_trajectory<double>([](double) { return Vec::Ones(1); }, grid);
    CHECK(product_rule_check(one, ident, ones, 1e-4).absolute <= 1e-12);

    auto form = robin(8, [](double t) { return t * t; }, 2.0);
    OperatorFamily<double> a1 = [&form](double t) { return form.a1(t); };
    const Vec c0 = random_vector<double>(rng, 9), c1 = random_vector<double>(rng, 9);
    auto smooth = [&](double t) { return Vec(c0 * std::cos(2 * t) + c1 * t * t); };
    std::vector<double> r;
    for (Index n : {8, 16, 32, 64})
      r.push_back(product_rule_check(form.triple(), a1, sample_trajectory<double>(smooth, uniform_times(0.0, 1.0, n + 1)), 1e-6)
                      .absolute);
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(order(r[i - 1], r[i]) >= 1);
  }

  TEST_CASE("chain rule for the square root") {
    std::mt19937_64 rng(27);
    const auto r = random_symmetric_form<double>(rng, 4, 0.5, 5.0);
    const auto grid = uniform_times(0.0, 1.0, 9);
    const auto u = make_trajectory(grid, random_matrix<double>(rng, 4, 9));
    CHECK(chain_rule_sqrt_check(constant_form<double>(r.triple, r.a1, 1.0), u).absolute <= 1e-10);

    // scalar (1+t): (sqrt(1+t) u)' with u = 1 is 1/(2 sqrt(1+t))
    auto s = scalar([](double t) { return 1 + t; });
    OperatorFamily<double> root = [&s](double t) { return sqrt_operator(spectral_decompose(s, t)); };
    CHECK(root(0.44)(0, 0) == doctest::Approx(1.2));
    CHECK(finite_difference(root, 0.44, 1e-5, 0.0, 1.0)(0, 0) == doctest::Approx(1 / 2.4).epsilon(1e-8));

    auto form = robin(8, [](double t) { return t; }, 1.0);
    const Vec c0 = random_vector<double>(rng, 9), c1 = random_vector<double>(rng, 9);
    auto smooth = [&](double t) { return Vec(c0 * std::sin(3 * t) + c1); };
    std::vector<double> res;
    for (Index n : {8, 16, 32, 64})
      res.push_back(chain_rule_sqrt_check(form, sample_trajectory<double>(smooth, uniform_times(0.0, 1.0, n + 1))).absolute);
    for (std::size_t i = 1; i < res.size(); ++i) CHECK(order(res[i - 1], res[i]) >= 1);
  }
}
