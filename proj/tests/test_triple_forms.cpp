#include "doctest.h"
#include "support.hpp"

#include <sstream>

using namespace mreg;
using namespace support;

TEST_SUITE("triple") {
  TEST_CASE("c_H for trivial triples") {
    CHECK(GelfandTriple<double>(Mat::Identity(1, 1), Mat::Identity(1, 1)).c_h() == doctest::Approx(1));
    CHECK(GelfandTriple<double>(Mat::Identity(2, 2), 2 * Mat::Identity(2, 2)).c_h() ==
          doctest::Approx(1 / std::sqrt(2.0)));
  }

  TEST_CASE("c_H of the P1 mass/stiffness pair") {
    const P1Mesh<double> mesh{4, 0.0, 1.0};
    const Mat m = mesh.mass(), k = mesh.stiffness() + mesh.mass();
    GelfandTriple<double> tr(m, k);
    // independent: eigenvalues of K^{-1} M by plain (non-symmetric) solver
    Eigen::EigenSolver<Mat> es(Mat(k.inverse() * m));
    const double top = es.eigenvalues().real().maxCoeff();
    CHECK(tr.c_h() == doctest::Approx(std::sqrt(top)).epsilon(1e-12));
    const Vec e = tr.extremal_vector();
    CHECK(tr.norm_h(e) / tr.norm_v(e) == doctest::Approx(tr.c_h()).epsilon(1e-12));
  }

  TEST_CASE("dual norm") {
    GelfandTriple<double> a(Mat::Identity(3, 3), Mat::Identity(3, 3));
    CHECK(a.dual_norm(Vec::Unit(3, 0)) == doctest::Approx(1));
    GelfandTriple<double> b(Mat::Identity(1, 1), 4 * Mat::Identity(1, 1));
    CHECK(b.dual_norm(Vec::Constant(1, 2)) == doctest::Approx(1));
  }

  TEST_CASE("dual norm against random maximization") {
    std::mt19937_64 rng(3);
    const Mat gh = random_spd<double>(rng, 10, 0.5, 2.0);
    GelfandTriple<double> tr(gh, gh + random_spd<double>(rng, 10, 0.1, 5.0));
    const Vec f = random_vector<double>(rng, 10);
    double best = 0;
    for (int i = 0; i < 10000; ++i) {
      // bias samples toward the maximizer so 1e4 draws reach 1%
      const Vec v = tr.riesz_v(f) + 0.05 * random_vector<double>(rng, 10) * tr.norm_v(tr.riesz_v(f));
      best = std::max(best, std::abs(f.dot(v)) / tr.norm_v(v));
    }
    CHECK(best <= tr.dual_norm(f) * (1 + 1e-12));
    CHECK(best >= 0.99 * tr.dual_norm(f));
  }

  TEST_CASE("H embedding") {
    GelfandTriple<double> id(Mat::Identity(2, 2), 3 * Mat::Identity(2, 2));
    const Vec g = Vec::Ones(2);
    CHECK(id.embed_h_to_vprime(g) == g);
    Mat d = Mat::Zero(2, 2);
    d.diagonal() << 1, 2;
    GelfandTriple<double> tr(d, 3 * d);
    CHECK(tr.embed_h_to_vprime(g) == Vec((Vec(2) << 1, 2).finished()));
    std::mt19937_64 rng(1);
    const Mat gh = random_spd<double>(rng, 6, 0.5, 2.0);
    GelfandTriple<double> r(gh, 2 * gh);
    for (int i = 0; i < 100; ++i) {
      const Vec x = random_vector<double>(rng, 6);
      CHECK(r.pairing(r.embed_h_to_vprime(x), x) == doctest::Approx(std::pow(r.norm_h(x), 2)).epsilon(1e-12));
    }
  }

  TEST_CASE("embedding inequality holds") {
    std::mt19937_64 rng(2);
    const auto f = random_symmetric_form<double>(rng, 8);
    for (int i = 0; i < 100; ++i) {
      const Vec x = random_vector<double>(rng, 8);
      CHECK(f.triple.norm_h(x) <= f.triple.c_h() * f.triple.norm_v(x) * (1 + 1e-12));
    }
  }

  TEST_CASE("rejects bad Gram matrices") {
    Mat bad(2, 2);
    bad << 1, 2, 2, 1;
    CHECK_THROWS_AS(GelfandTriple<double>(bad, Mat::Identity(2, 2)), ValidationError);
    CHECK_THROWS_AS(GelfandTriple<double>(Mat::Identity(2, 2), Mat::Identity(3, 3)), DimensionError);
  }

  TEST_CASE("matrix text format round trip") {
    std::mt19937_64 rng(4);
    const Mat m = random_matrix<double>(rng, 5, 5);
    std::stringstream ss;
    write_matrix(ss, m);
    CHECK(read_matrix(ss) == m);
    std::stringstream short_input("2\n1 2 3");
    CHECK_THROWS_AS(read_matrix(short_input), ConfigError);
  }

  TEST_CASE("Gauss-Legendre integrates polynomials") {
    const auto rule = gauss_legendre<double>(4, 0.0, 2.0);
    double s = 0;
    for (Index i = 0; i < 4; ++i) s += rule.weights(i) * std::pow(rule.nodes(i), 7);
    CHECK(s == doctest::Approx(256.0 / 8).epsilon(1e-13));
  }
}

TEST_SUITE("forms") {
  TEST_CASE("scalar and constant forms") {
    auto f = scalar([](double t) { return 1 + t; });
    CHECK(f.a1(1.0)(0, 0) == 2);
    CHECK(f.a2(1.0)(0, 0) == 0);
    CHECK(f.constants().alpha == doctest::Approx(1));
    CHECK(f.constants().M1 == doctest::Approx(2));
    CHECK(f.constants().Mdot1 == doctest::Approx(1));
    auto c = scalar([](double) { return 4.0; });
    CHECK(c.constants().alpha == doctest::Approx(4));
    CHECK(c.constants().M1 == doctest::Approx(4));
    CHECK(c.constants().Mdot1 == 0);
    std::mt19937_64 rng(5);
    const auto r = random_symmetric_form<double>(rng, 4);
    auto k = constant_form<double>(r.triple, r.a1, 1.0);
    CHECK(k.a1(0.1) == k.a1(0.9));
  }

  TEST_CASE("Robin assembly on two elements") {
    auto f = robin(2, [](double t) { return t; }, 1.0);
    // hand assembly: h = 1/2, stiffness 2[1 -1 0; -1 2 -1; 0 -1 1], mass h/6[2 1 0; 1 4 1; 0 1 2]
    Mat k(3, 3), m(3, 3);
    k << 2, -2, 0, -2, 4, -2, 0, -2, 2;
    m << 2, 1, 0, 1, 4, 1, 0, 1, 2;
    m /= 12;
    const double omega = f.constants().omega;
    CHECK(omega == doctest::Approx(0.5));
    Mat expect = k + omega * m;
    expect(0, 0) += 0.5;
    expect(2, 2) += 0.5;
    CHECK((f.a1(0.5) - expect).norm() < 1e-14);
    // full form: stiffness + boundary
    Mat full = k;
    full(0, 0) += 0.5;
    full(2, 2) += 0.5;
    CHECK((f.full(0.5) - full).norm() < 1e-14);
  }

  TEST_CASE("Robin full form on constants") {
    const Vec one = Vec::Ones(9);
    auto neumann = robin(8, [](double) { return 0.0; }, 0.0);
    CHECK(std::abs(one.dot(neumann.full(0.3) * one)) < 1e-13);
    auto unit = robin(8, [](double) { return 1.0; }, 0.0);
    CHECK(one.dot(unit.full(0.3) * one) == doctest::Approx(2));
  }

  TEST_CASE("negative beta needs a larger shift") {
    auto f = robin(8, [](double t) { return -0.5 * t; }, 0.5);
    CHECK(f.constants().omega == doctest::Approx(0.5 + 1 + 2));
    CHECK(f.check_on(uniform_times(0.0, 1.0, 33)).ok());
  }

  TEST_CASE("Robin Lipschitz constant equals the boundary matrix norm") {
    auto f = robin(8, [](double t) { return t; }, 1.0);
    const auto& tr = f.triple();
    Mat boundary = Mat::Zero(9, 9);
    boundary(0, 0) = boundary(8, 8) = 1;
    const double expected = tr.operator_norm(boundary, Space::V, Space::Vdual);
    CHECK(f.constants().Mdot1 == doctest::Approx(expected).epsilon(1e-12));
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    double measured = 0;
    for (int i = 0; i < 100; ++i) {
      const double s = u(rng), t = u(rng);
      if (s == t) continue;
      measured = std::max(measured, tr.operator_norm(Mat(f.a1(t) - f.a1(s)), Space::V, Space::Vdual) / std::abs(t - s));
    }
    CHECK(measured == doctest::Approx(expected).epsilon(1e-8));
  }

  TEST_CASE("Robin constants against dense measurements") {
    auto f = robin(16, [](double t) { return t; }, 1.0);
    const auto m = measure_constants<double>(f.triple(), f.a1_family(), f.a2_family(), 0.0, 1.0, 64, 0.0);
    const auto& c = f.constants();
    CHECK(m.alpha >= c.alpha * (1 - 1e-12));
    CHECK(m.M1 <= c.M1 * (1 + 1e-12));
    CHECK(m.Mdot1 <= c.Mdot1 * (1 + 1e-8));
    CHECK(m.M2 <= c.M2 * (1 + 1e-12));
  }

  TEST_CASE("shipped forms pass the checks on 33 times") {
    std::vector<FormDecomposition<double>> forms;
    forms.push_back(scalar([](double t) { return 1 + t; }));
    forms.push_back(robin(16, [](double t) { return 1 + t; }, 1.0));
    forms.push_back(robin(16, [](double t) { return t * t; }, 2.0, 1.0, 0.0, true));
    RobinOptions<double> opt;
    opt.advection = [](double x) { return 0.25 * (1 + x); };
    forms.push_back(robin_form_1d<double>(16, [](double, int) { return 1.0; }, 0.0, 1.0, opt));
    for (const auto& f : forms) {
      const auto chk = f.check_on(uniform_times(f.begin(), f.end(), 33));
      CHECK_MESSAGE(chk.ok(), chk.describe());
    }
  }

  TEST_CASE("declared constants that are too optimistic are rejected") {
    FormConstants<double> c{1.0, 1.0, 0.0, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(FormDecomposition<double>(GelfandTriple<double>(Mat::Identity(1, 1), Mat::Identity(1, 1)),
                                              [](double t) { return Mat::Constant(1, 1, 1 + t); }, {}, c),
                    ValidationError);
  }

  TEST_CASE("out-of-range time") {
    auto f = scalar([](double t) { return 1 + t; });
    CHECK_THROWS_AS(f.a1(1.5), RangeError);
  }

  TEST_CASE("Schroedinger form") {
    SchrodingerSpec<double> s;
    s.n_elements = 16;
    s.half_width = 1;
    s.m0 = Vec::Ones(17);
    s.m = [](double, double) { return 1.0; };
    s.alpha1 = s.alpha2 = 1;
    s.lipschitz = 0;
    s.T = 1;
    auto f = schrodinger_form_1d(s);
    const P1Mesh<double> mesh{16, -1.0, 1.0};
    CHECK((f.full(0.5) - (mesh.stiffness() + mesh.lumped_mass())).norm() < 1e-13);
    CHECK(f.constants().alpha == doctest::Approx(1));

    s.m = [](double t, double) { return 1 + t; };
    s.alpha2 = 2;
    s.lipschitz = 1;
    CHECK(schrodinger_form_1d(s).check_on(uniform_times(0.0, 1.0, 33)).ok());

    // m = (1 + sin t) x^2 against alpha1 = 1: violated wherever sin t < 0 is impossible
    // on [0,1], so only the upper bound can fail. Scan the grid independently.
    const Vec x = mesh.nodes();
    s.m0 = x.array().square();
    s.m = [](double t, double xx) { return (1 + std::sin(t)) * xx * xx; };
    s.alpha1 = 1;
    s.alpha2 = 1.5;
    s.lipschitz = 1;
    bool violated = false;
    for (double t : uniform_times(0.0, 1.0, 33))
      for (Index i = 0; i < x.size(); ++i) {
        const double m = s.m(t, x(i)), m0 = s.m0(i);
        if (m < s.alpha1 * m0 - 1e-12 || m > s.alpha2 * m0 + 1e-12) violated = true;
      }
    CHECK(violated);
    CHECK_THROWS_AS(schrodinger_form_1d(s), ValidationError);
    s.alpha2 = 1 + std::sin(1.0) + 1e-9;
    CHECK_NOTHROW(schrodinger_form_1d(s));
  }

  TEST_CASE("piecewise form") {
    std::vector<FormDecomposition<double>> pieces;
    pieces.push_back(scalar([](double) { return 1.0; }, 0.5, 0.0));
    pieces.push_back(scalar([](double) { return 2.0; }, 0.5, 0.5));
    PiecewiseForm<double> pw({0.0, 0.5, 1.0}, std::move(pieces));
    CHECK(pw.piece_index(0.25) == 0);
    CHECK(pw.piece_index(0.5) == 1);
    CHECK(pw.piece_index(1.0) == 1);
    CHECK(pw.combined_constants().M1 == doctest::Approx(2));
    CHECK(pw.combined_constants().alpha == doctest::Approx(1));
    std::vector<FormDecomposition<double>> bad;
    bad.push_back(scalar([](double) { return 1.0; }, 0.5, 0.0));
    bad.push_back(scalar([](double) { return 2.0; }, 0.5, 0.5));
    CHECK_THROWS(PiecewiseForm<double>({0.0, 0.6, 1.0}, std::move(bad)));
  }
}
