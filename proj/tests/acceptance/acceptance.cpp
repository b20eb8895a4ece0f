// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include "mreg/mreg.hpp"
#include "mreg/random_problems.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace mreg;
using Mat = Matrix<double>;
using Vec = Vector<double>;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void run(const char* name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o{false, ""};
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= budget_seconds;
  const bool pass = o.pass && in_time;
  failures += !pass;
  std::printf("%s  %-28s %s; %.2fs of %.0fs%s\n", pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs,
              budget_seconds, in_time ? "" : " (over budget)");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rate(double coarse, double fine, double ratio = 2) { return std::log(coarse / fine) / std::log(ratio); }

FormDecomposition<double> scalar(std::function<double(double)> a, double T = 1, double begin = 0) {
  return scalar_form<double>(std::move(a), T, 1.0, 1.0, {}, begin);
}

EvolutionProblem<double> decay_problem() {
  return {scalar([](double) { return 1.0; }), identity_perturbation<double>(), zero_source<double>(), Vec::Ones(1)};
}

FormDecomposition<double> robin(Index n, std::function<double(double)> beta, double lip, double T = 1,
                                double begin = 0, bool lumped = false) {
  RobinOptions<double> opt;
  opt.begin = begin;
  opt.lumped_mass = lumped;
  return robin_form_1d<double>(n, [beta](double t, int) { return beta(t); }, lip, T, opt);
}

EvolutionProblem<double> robin_problem(Index n) {
  const Vec x = P1Mesh<double>{n, 0.0, 1.0}.nodes();
  return {robin(n, [](double t) { return 1 + t; }, 1.0), identity_perturbation<double>(),
          constant_source<double>(Vec::Ones(n + 1)), x};
}

double l2h(const EvolutionProblem<double>& p, const Trajectory<double>& u, const std::function<Vec(double)>& ref) {
  std::vector<double> sq;
  for (std::size_t k = 0; k < u.times.size(); ++k)
    sq.push_back(std::pow(p.triple().norm_h(Vec(u.states.col(static_cast<Index>(k)) - ref(u.times[k]))), 2));
  return std::sqrt(detail::trapezoid(u.times, sq));
}

Outcome analytic_convergence() {
  const auto p = decay_problem();
  bool bounded = true;
  std::vector<double> e1, e2;
  for (Index n : {10, 20, 40, 80}) {
    const double err = std::abs(solve_theta(p, n, 1.0).final_state()(0) - std::exp(-1.0));
    bounded = bounded && err <= 0.5 / double(n);
    e1.push_back(err);
    e2.push_back(std::abs(solve_theta(p, n, 0.5).final_state()(0) - std::exp(-1.0)));
  }
  const double o1 = rate(e1[2], e1[3]), o2 = rate(e2[2], e2[3]);
  const bool pass = bounded && o1 >= 0.8 && o1 <= 1.2 && o2 >= 1.8 && o2 <= 2.2;
  return {pass, "error<=dt/2 " + std::string(bounded ? "yes" : "no") + fmt(", order(theta=1)=%.3f", o1) +
                    fmt(", order(theta=1/2)=%.3f", o2)};
}

Outcome resolvent_suite() {
  std::mt19937_64 rng(2022);
  std::vector<double> grid{0.0};
  for (int k = 0; k < 11; ++k) grid.push_back(std::pow(10.0, -1 + 4.0 * k / 10));
  std::size_t rows = 0, failed = 0;
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const Index n = 1 + static_cast<Index>(rng() % 20);
    const auto r = random_symmetric_form<double>(rng, n);
    const auto rep = verify_resolvent_bounds<double>(r.triple, r.a1, grid, 0.0, 1e-10);
    rows += rep.rows.size();
    failed += rep.failures();
    for (const auto& row : rep.rows) worst = std::max(worst, row.measured / row.ceiling);
  }
  return {failed == 0, std::to_string(failed) + "/" + std::to_string(rows) + " rows fail" +
                           fmt(", max measured/ceiling=%.12f", worst)};
}

Outcome two_route() {
  std::vector<std::pair<std::string, FormDecomposition<double>>> forms;
  forms.emplace_back("scalar 1+t", scalar([](double t) { return 1 + t; }));
  forms.emplace_back("robin16 1+t", robin(16, [](double t) { return 1 + t; }, 1.0));
  forms.emplace_back("robin16 t^2 lumped", robin(16, [](double t) { return t * t; }, 2.0, 1.0, 0.0, true));
  {
    RobinOptions<double> opt;
    opt.advection = [](double x) { return 0.25 * (1 + x); };
    forms.emplace_back("robin16 advection", robin_form_1d<double>(16, [](double, int) { return 1.0; }, 0.0, 1.0, opt));
  }
  {
    SchrodingerSpec<double> s{16, 1.0, Vec::Ones(17), [](double t, double) { return 1 + t; }, 1.0, 2.0, 1.0, 1.0};
    forms.emplace_back("schrodinger16", schrodinger_form_1d(s));
  }
  std::mt19937_64 rng(99);
  for (int i = 0; i < 5; ++i) {
    const auto r = random_symmetric_form<double>(rng, 20, 0.1, 1e4);
    forms.emplace_back("random20", constant_form<double>(r.triple, r.a1, 1.0));
  }
  double worst = 0;
  int used = 0;
  for (const auto& [name, form] : forms) {
    for (double t : {form.begin(), form.end()}) {
      const auto fact = spectral_decompose(form, t);
      if (fact.eigvals.minCoeff() < 0.1 || fact.eigvals.maxCoeff() > 1e4) continue;
      ++used;
      for (int k = 0; k < 20; ++k) {
        const Vec x = random_vector<double>(rng, form.dim());
        const Vec a = power_apply(fact, -0.5, x), b = invsqrt_quadrature(form, t, x, 200);
        worst = std::max(worst, form.triple().norm_h(Vec(a - b)) / form.triple().norm_h(a));
      }
    }
  }
  return {worst <= 1e-8 && used == 2 * static_cast<int>(forms.size()),
          std::to_string(used) + " form/time pairs" + fmt(", max relative difference=%.2e", worst)};
}

Outcome apriori_suite() {
  std::mt19937_64 rng(7);
  int satisfied = 0;
  double worst_ratio = 0, worst_slack = 0;
  for (int i = 0; i < 100; ++i) {
    const auto p = random_mr_problem<double>(rng);
    const auto sol = reference_solve(p, 1e-10);
    long n = 500;
    auto sample = [&](long steps) {
      return mr_diagnostics(p, sample_oracle(sol, uniform_times(p.begin(), p.end(), steps + 1)));
    };
    auto coarse = sample(n), fine = sample(2 * n);
    double slack = std::abs(fine.norm_MR - coarse.norm_MR) / fine.norm_MR;
    while (slack > 0.05 && n < 32000) {
      n *= 2;
      coarse = fine;
      fine = sample(2 * n);
      slack = std::abs(fine.norm_MR - coarse.norm_MR) / fine.norm_MR;
    }
    satisfied += fine.apriori_satisfied && slack <= 0.05;
    worst_ratio = std::max(worst_ratio, fine.apriori_lhs / fine.apriori_rhs);
    worst_slack = std::max(worst_slack, slack);
  }
  return {satisfied == 100, std::to_string(satisfied) + "/100 satisfied" + fmt(", max lhs/rhs=%.3e", worst_ratio) +
                                fmt(", max discretization slack=%.2e", worst_slack)};
}

Outcome energy_identity() {
  const auto p = robin_problem(16);
  std::vector<double> r;
  for (Index n : {50, 100, 200, 400}) r.push_back(mr_diagnostics(p, solve_theta(p, n)).energy_residual);
  double lo = 1e300;
  for (std::size_t i = 1; i < r.size(); ++i) lo = std::min(lo, rate(r[i - 1], r[i]));
  return {lo >= 1, fmt("residual %.3e", r.front()) + fmt(" -> %.3e", r.back()) + fmt(", min observed order=%.3f", lo)};
}

Outcome gluing() {
  std::vector<FormDecomposition<double>> pieces;
  pieces.push_back(scalar([](double) { return 1.0; }, 0.5, 0.0));
  pieces.push_back(scalar([](double) { return 2.0; }, 0.5, 0.5));
  EvolutionProblem<double> p(PiecewiseForm<double>({0.0, 0.5, 1.0}, std::move(pieces)),
                             identity_perturbation<double>(), zero_source<double>(), Vec::Ones(1));
  bool within = true, continuous = true;
  for (Index n : {10, 20, 40, 80}) {
    const auto u = solve_glued(p, n);
    within = within && std::abs(u.final_state()(0) - std::exp(-1.5)) <= 0.5 / double(2 * n);
    const auto first = solve_theta(p.piece(0, Vec::Ones(1)), n);
    continuous = continuous && u.states(0, n) == first.final_state()(0);
  }

  std::vector<FormDecomposition<double>> rp;
  rp.push_back(robin(16, [](double) { return 0.0; }, 0.0, 0.5, 0.0));
  rp.push_back(robin(16, [](double) { return 1.0; }, 0.0, 0.5, 0.5));
  const Vec x = P1Mesh<double>{16, 0.0, 1.0}.nodes();
  EvolutionProblem<double> jump(PiecewiseForm<double>({0.0, 0.5, 1.0}, std::move(rp)),
                                identity_perturbation<double>(), constant_source<double>(Vec::Ones(17)), x);
  const auto r0 = reference_solve(jump.piece(0, x), 1e-11);
  const auto r1 = reference_solve(jump.piece(1, r0(0.5)), 1e-11);
  auto ref = [&](double t) { return t <= 0.5 ? r0(t) : r1(t); };
  std::vector<double> e;
  for (Index n : {25, 50, 100, 200}) {
    const auto u = solve_glued(jump, n);
    e.push_back(l2h(jump, u, ref));
    const auto first = solve_theta(jump.piece(0, x), n);
    continuous = continuous && (u.states.col(n).array() == first.final_state().array()).all();
  }
  const double o = rate(e[2], e[3]);
  return {within && continuous && o >= 0.8 && o <= 1.2,
          std::string("scalar within dt/2 ") + (within ? "yes" : "no") + ", bitwise continuous " +
              (continuous ? "yes" : "no") + fmt(", Robin jump order=%.3f", o)};
}

Outcome spacetime() {
  const auto rp = robin_problem(8);
  const auto sys = assemble_spacetime(rp, 16);
  std::mt19937_64 rng(31);
  int coercive = 0;
  double worst = 1e300;
  for (int i = 0; i < 100; ++i) {
    const Vec w = random_vector<double>(rng, sys.E.cols());
    const double q = w.dot(sys.E * w) / w.dot(sys.norm * w);
    coercive += q >= sys.constants.delta;
    worst = std::min(worst, q / sys.constants.delta);
  }
  const auto p = decay_problem();
  std::vector<double> e;
  for (Index n : {8, 16, 32, 64}) e.push_back(std::abs(solve_spacetime(p, n).final_state()(0) - std::exp(-1.0)));
  double lo = 1e300;
  for (std::size_t i = 1; i < e.size(); ++i) lo = std::min(lo, rate(e[i - 1], e[i]));

  const auto ref = reference_solve(rp, 1e-10);
  auto oracle = [&](double t) { return ref(t); };
  const auto a = solve_spacetime(rp, 64), b = solve_theta(rp, 64);
  const double ea = l2h(rp, a, oracle), eb = l2h(rp, b, oracle);
  const double ab = l2h(rp, a, [&](double t) { return b.at(t); });
  const bool agree = ab <= ea + eb;
  return {coercive == 100 && lo >= 1 && agree,
          std::to_string(coercive) + "/100 coercive" + fmt(" (min ratio/delta=%.2f)", worst) +
              fmt(", scalar order>=%.3f", lo) + fmt(", |st-theta|=%.2e", ab) + fmt(" vs %.2e", ea + eb)};
}

Outcome calculus() {
  std::mt19937_64 rng(41);
  const auto grid = uniform_times(0.0, 1.0, 17);
  double ibp = 0;
  for (int i = 0; i < 50; ++i) {
    const auto u = make_trajectory(grid, random_matrix<double>(rng, 5, 17));
    const auto v = make_trajectory(grid, random_matrix<double>(rng, 5, 17));
    ibp = std::max(ibp, ibp_check(u, v).relative());
  }
  auto form_sq = robin(8, [](double t) { return t * t; }, 2.0);
  auto form_lin = robin(8, [](double t) { return t; }, 1.0);
  OperatorFamily<double> a1 = [&form_sq](double t) { return form_sq.a1(t); };
  const Vec c0 = random_vector<double>(rng, 9), c1 = random_vector<double>(rng, 9);
  auto smooth = [&](double t) { return Vec(c0 * std::cos(2 * t) + c1 * t * t); };
  std::vector<double> pr, cr;
  for (Index n : {8, 16, 32, 64}) {
    const auto u = sample_trajectory<double>(smooth, uniform_times(0.0, 1.0, n + 1));
    pr.push_back(product_rule_check(form_sq.triple(), a1, u, 1e-6).absolute);
    cr.push_back(chain_rule_sqrt_check(form_lin, u).absolute);
  }
  double po = 1e300, co = 1e300;
  for (std::size_t i = 1; i < pr.size(); ++i) {
    po = std::min(po, rate(pr[i - 1], pr[i]));
    co = std::min(co, rate(cr[i - 1], cr[i]));
  }
  return {ibp <= 1e-12 && po >= 1 && co >= 1,
          fmt("ibp max relative=%.2e", ibp) + fmt(", product rule order>=%.3f", po) + fmt(", chain rule order>=%.3f", co)};
}

Outcome quasilinear() {
  QuasilinearProblem<double> s{scalar([](double) { return 1.0; }),
                               [](double, double xi) { return std::clamp(1 + xi * xi, 0.1, 10.0); }, 0.1,
                               zero_source<double>(), Vec::Ones(1)};
  FixedPointOptions<double> opt;
  opt.n_steps = 1000;
  opt.theta = 0.5;
  opt.tol = 1e-9;
  const auto r = solve_fixed_point(s, opt);
  const auto ref = reference_solve(quasilinear_ode(s), 1e-10);
  double sup = 0;
  for (std::size_t k = 0; k < r.trajectory.times.size(); ++k)
    sup = std::max(sup, std::abs(r.trajectory.states(0, static_cast<Index>(k)) - ref(r.trajectory.times[k])(0)));
  const bool scalar_ok = r.converged && r.history.size() <= 50 && r.history.back().residual <= 1e-8 && sup <= 1e-4;

  const Vec x = P1Mesh<double>{32, 0.0, 1.0}.nodes();
  QuasilinearProblem<double> nl{robin(32, [](double t) { return 1 + t; }, 1.0, 1.0, 0.0, true),
                                [](double, double xi) { return std::clamp(1 + xi * xi, 0.1, 10.0); }, 0.1,
                                constant_source<double>(Vec::Ones(33)),
                                Vec((M_PI * x.array()).sin())};
  FixedPointOptions<double> o2;
  o2.n_steps = 100;
  const auto q = solve_fixed_point(nl, o2);
  bool all_mr = true;
  for (const auto& h : q.history) all_mr = all_mr && h.apriori_satisfied;
  return {scalar_ok && q.converged && all_mr,
          "scalar: " + std::to_string(r.history.size()) + " iterations" +
              fmt(", residual=%.2e", r.history.back().residual) + fmt(", sup error=%.2e", sup) + "; Robin: " +
              std::to_string(q.history.size()) + " iterations, converged " + (q.converged ? "yes" : "no") +
              ", all sub-solves within estimate " + (all_mr ? "yes" : "no")};
}

Outcome sqrt_property() {
  std::vector<FormDecomposition<double>> family;
  for (Index n : {8, 16, 32, 64, 128, 256}) {
    RobinOptions<double> opt;
    opt.advection = [](double x) { return 0.25 + 0.5 * x * (1 - x); };
    family.push_back(robin_form_1d<double>(n, [](double, int) { return 1.0; }, 0.0, 1.0, opt));
  }
  const auto rep = sqrt_property_probe(family, 0.0);
  std::ostringstream os;
  os << "spread=" << fmt("%.3f", rep.spread) << " (r_upper, r_lower:";
  for (const auto& row : rep.rows) os << fmt(" %.3f", row.r_upper) << "/" << fmt("%.3f", row.r_lower);
  os << ", " << rep.rows.front().method << ")";
  return {rep.pass, os.str()};
}

}  // namespace

int main() {
  run("analytic_convergence", 1, analytic_convergence);
  run("resolvent_bounds", 30, resolvent_suite);
  run("sqrt_two_routes", 10, two_route);
  run("mr_apriori_estimate", 120, apriori_suite);
  run("energy_identity", 30, energy_identity);
  run("gluing", 10, gluing);
  run("spacetime_galerkin", 30, spacetime);
  run("calculus", 30, calculus);
  run("quasilinear", 120, quasilinear);
  run("sqrt_property", 60, sqrt_property);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
