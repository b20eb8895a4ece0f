#include "mreg/io/experiments.hpp"

#include "mreg/calculus.hpp"
#include "mreg/diagnostics.hpp"
#include "mreg/errors.hpp"
#include "mreg/evolve.hpp"
#include "mreg/io/config.hpp"
#include "mreg/io/csv.hpp"
#include "mreg/io/problem_builder.hpp"
#include "mreg/oracle.hpp"
#include "mreg/quasilinear.hpp"
#include "mreg/random_problems.hpp"
#include "mreg/spacetime.hpp"
#include "mreg/sqrtop.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace mreg::io {

namespace fs = std::filesystem;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

std::string OutputPaths::extra(const std::string& name) const {
  return directory ? (fs::path(stem) / name).string() : stem + "." + name;
}

OutputPaths resolve_output(const std::string& out, const std::string& default_csv) {
  OutputPaths p;
  const std::string target = out.empty() ? "mreg_out" : out;
  if (target.size() > 4 && target.compare(target.size() - 4, 4, ".csv") == 0) {
    p.directory = false;
    p.csv = target;
    p.stem = target.substr(0, target.size() - 4);
    p.summary = p.stem + ".summary.txt";
    const fs::path parent = fs::path(target).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
  } else {
    fs::create_directories(target);
    p.stem = target;
    p.csv = (fs::path(target) / default_csv).string();
    p.summary = (fs::path(target) / "summary.txt").string();
  }
  return p;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.rfind("log:", 0) == 0) {
      std::stringstream parts(item.substr(4));
      std::string a, b, c;
      if (!std::getline(parts, a, ':') || !std::getline(parts, b, ':') || !std::getline(parts, c))
        throw ConfigError("log grid must read log:lo:hi:n, got '" + item + "'");
      const double lo = parse_number_list(a).at(0), hi = parse_number_list(b).at(0);
      const long n = std::lround(parse_number_list(c).at(0));
      if (!(lo > 0 && hi > lo && n >= 2)) throw ConfigError("log grid needs 0 < lo < hi and n >= 2");
      for (long i = 0; i < n; ++i)
        out.push_back(i + 1 == n ? hi : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * double(i) / double(n - 1)));
    } else {
      out.push_back(parse_number_list(item).at(0));
    }
  }
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

namespace {

// Run fn(i) for i < n on at most `jobs` threads; results stay in index order.
template <typename R, typename F>
std::vector<R> parallel_map(std::size_t n, unsigned jobs, F fn) {
  std::vector<R> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned k = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < k; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

Config load_config(const RunOptions& opt) {
  if (opt.config.empty()) throw ConfigError("this command needs --config");
  return Config::load(opt.config);
}

long steps_of(const RunOptions& opt, const Config& cfg, long fallback) {
  const long n = opt.steps ? *opt.steps : cfg.get_int("run", "steps", fallback);
  if (n < 1) throw ConfigError("steps must be positive");
  return n;
}

double theta_of(const RunOptions& opt, const Config& cfg) {
  return opt.theta ? *opt.theta : cfg.get_double("run", "theta", 1.0);
}

std::optional<double> oracle_tol_of(const RunOptions& opt, const Config& cfg) {
  if (opt.oracle_tol) return opt.oracle_tol;
  if (cfg.has("run", "oracle_tol")) return cfg.get_double("run", "oracle_tol");
  return std::nullopt;
}

// --refinements with one entry is a level count: base, 2 base, 4 base, ...
std::vector<long> refinement_levels(const RunOptions& opt, const Config& cfg, long base, std::vector<double> fallback) {
  std::vector<long> levels = opt.refinements;
  if (levels.empty() && cfg.has("run", "refinements")) {
    for (double x : cfg.get_list("run", "refinements")) levels.push_back(std::lround(x));
  }
  if (levels.size() == 1) {
    const long count = levels.front();
    const long start = opt.steps ? *opt.steps : cfg.get_int("run", "steps", base);
    levels.clear();
    for (long i = 0; i < count; ++i) levels.push_back(start << i);
  }
  if (levels.empty())
    for (double x : fallback) levels.push_back(std::lround(x));
  if (levels.size() < 1 || *std::min_element(levels.begin(), levels.end()) < 1)
    throw ConfigError("refinement levels must be positive");
  return levels;
}

std::ofstream open(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

void write_trajectory(const std::string& path, const Trajectory<double>& u) {
  auto file = open(path);
  std::vector<std::string> cols{"t"};
  for (Index i = 0; i < u.dim(); ++i) cols.push_back("u" + std::to_string(i));
  for (Index i = 0; i < u.dim(); ++i) cols.push_back("du" + std::to_string(i));
  CsvWriter csv(file, "mreg.trajectory/1", cols);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index k = 0; k <= u.n_steps(); ++k) {
    csv << u.times[static_cast<std::size_t>(k)];
    for (Index i = 0; i < u.dim(); ++i) csv << u.states(i, k);
    for (Index i = 0; i < u.dim(); ++i) csv << (k == 0 ? nan : u.derivative(i, k - 1));
    csv.end_row();
  }
}

void write_summary(const std::string& path, const Summary& s) {
  auto file = open(path);
  s.write(file);
}

void add_diagnostics(Summary& s, const MRDiagnostics<double>& d) {
  s.add("norm_L2V", d.norm_L2V);
  s.add("norm_H1H", d.norm_H1H);
  s.add("norm_MR", d.norm_MR);
  s.add("norm_Au_L2H", d.norm_Au_L2H);
  s.add("sup_V_norm", d.sup_V_norm);
  s.add("energy_residual", d.energy_residual);
  s.add("apriori_C", d.apriori_C);
  s.add("apriori_rhs", d.apriori_rhs);
  s.add("apriori_satisfied", d.apriori_satisfied);
}

// |u - ref|_{L^2(0,T;H)} on the trajectory grid and the largest nodal H error.
std::pair<double, double> compare(const EvolutionProblem<double>& p, const Trajectory<double>& u,
                                  const OracleSolution<double>& ref) {
  std::vector<double> sq(u.times.size());
  double worst = 0;
  for (std::size_t k = 0; k < sq.size(); ++k) {
    const double e = p.triple().norm_h(Vec(u.states.col(static_cast<Index>(k)) - ref(u.times[k])));
    sq[k] = e * e;
    worst = std::max(worst, e);
  }
  return {std::sqrt(detail::trapezoid(u.times, sq)), worst};
}

void oracle_summary(Summary& s, const EvolutionProblem<double>& p, const Trajectory<double>& u, double tol) {
  const auto ref = reference_solve(p, tol);
  const auto [l2, worst] = compare(p, u, ref);
  s.add("oracle_tol", tol);
  s.add("oracle_accuracy", ref.accuracy_estimate);
  s.add("oracle_implicit", ref.implicit);
  s.add("error_L2H", l2);
  s.add("error_max_H", worst);
}

int report(const Summary& s, const OutputPaths& out, bool ok, const std::string& failure) {
  write_summary(out.summary, s);
  std::cout << "wrote " << out.csv << " and " << out.summary << "\n";
  if (!ok) std::cerr << "check failed: " << failure << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int run_solve(const RunOptions& opt) {
  const Config cfg = load_config(opt);
  const auto problem = build_problem(cfg);
  const long n = steps_of(opt, cfg, 100);
  const double theta = theta_of(opt, cfg);
  const auto u = solve_theta(problem, n, theta);
  const auto out = resolve_output(opt.out, "trajectory.csv");
  write_trajectory(out.csv, u);
  Summary s;
  s.add("command", "solve");
  s.add("dim", static_cast<long>(problem.dim()));
  s.add("steps", n);
  s.add("theta", theta);
  s.add("final_norm_H", problem.triple().norm_h(Vec(u.final_state())));
  const auto d = mr_diagnostics(problem, u);
  add_diagnostics(s, d);
  if (const auto tol = oracle_tol_of(opt, cfg)) oracle_summary(s, problem, u, *tol);
  return report(s, out, d.apriori_satisfied, "a-priori estimate violated");
}

int run_spacetime(const RunOptions& opt) {
  const Config cfg = load_config(opt);
  const auto problem = build_problem(cfg);
  const long cells = opt.cells ? *opt.cells : cfg.get_int("run", "cells", 64);
  const auto u = solve_spacetime(problem, cells);
  const auto out = resolve_output(opt.out, "spacetime.csv");
  write_trajectory(out.csv, u);
  const auto cc = coercivity_constants(problem.form().pieces().front().constants(), problem.perturbation().beta0);
  Summary s;
  s.add("command", "spacetime");
  s.add("dim", static_cast<long>(problem.dim()));
  s.add("cells", cells);
  s.add("epsilon", cc.epsilon);
  s.add("gamma", cc.gamma);
  s.add("delta", cc.delta);
  const double mismatch = problem.triple().norm_v(Vec(u.state(0) - problem.u0()));
  const bool initial_ok = mismatch <= 1e-10 * (1 + problem.triple().norm_v(problem.u0()));
  s.add("initial_mismatch_V", mismatch);
  s.add("initial_condition_ok", initial_ok);
  add_diagnostics(s, mr_diagnostics(problem, u));
  if (const auto tol = oracle_tol_of(opt, cfg)) oracle_summary(s, problem, u, *tol);
  return report(s, out, initial_ok, "space-time solution misses the initial value");
}

int run_glue(const RunOptions& opt) {
  const Config cfg = load_config(opt);
  const auto problem = build_problem(cfg);
  const long n = steps_of(opt, cfg, 50);
  const double theta = theta_of(opt, cfg);
  const auto u = solve_glued(problem, n, theta);
  const auto out = resolve_output(opt.out, "glued.csv");
  write_trajectory(out.csv, u);
  // Re-solve piece by piece and compare the breakpoint states bitwise.
  bool continuous = true;
  Vec start = problem.u0();
  for (std::size_t i = 0; i < problem.form().size(); ++i) {
    const auto piece = solve_theta(problem.piece(i, start), n, theta);
    start = piece.final_state();
    const Index k = static_cast<Index>((i + 1) * static_cast<std::size_t>(n));
    if (!(u.states.col(k).array() == start.array()).all()) continuous = false;
  }
  Summary s;
  s.add("command", "glue");
  s.add("pieces", static_cast<long>(problem.form().size()));
  s.add("steps_per_piece", n);
  s.add("theta", theta);
  s.add("breakpoint_continuity", continuous);
  s.add("final_norm_H", problem.triple().norm_h(Vec(u.final_state())));
  add_diagnostics(s, mr_diagnostics(problem, u));
  if (const auto tol = oracle_tol_of(opt, cfg)) oracle_summary(s, problem, u, *tol);
  return report(s, out, continuous, "glued trajectory is not continuous at a breakpoint");
}

int run_convergence(const RunOptions& opt) {
  const Config cfg = load_config(opt);
  const auto problem = build_problem(cfg);
  const auto levels = refinement_levels(opt, cfg, 10, {10, 20, 40, 80});
  const double theta = theta_of(opt, cfg);
  const auto exact = exact_solution(cfg);
  Vec target;
  std::string reference;
  if (exact) {
    target = (*exact)(problem.end());
    reference = "exact";
  } else {
    const double tol = oracle_tol_of(opt, cfg).value_or(1e-10);
    target = reference_solve(problem, tol)(problem.end());
    reference = "oracle";
  }
  const auto errors = parallel_map<double>(levels.size(), opt.jobs, [&](std::size_t i) {
    const auto u = solve_theta(problem, levels[i], theta);
    return problem.triple().norm_h(Vec(u.final_state() - target));
  });
  const auto out = resolve_output(opt.out, "convergence.csv");
  auto file = open(out.csv);
  CsvWriter csv(file, "mreg.convergence/1", {"n", "dt", "error", "observed_order"});
  double last_order = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    double order = std::numeric_limits<double>::quiet_NaN();
    if (i > 0) order = std::log(errors[i - 1] / errors[i]) / std::log(double(levels[i]) / double(levels[i - 1]));
    last_order = order;
    csv << levels[i] << problem.horizon() / double(levels[i]) << errors[i] << order;
    csv.end_row();
  }
  Summary s;
  s.add("command", "convergence");
  s.add("theta", theta);
  s.add("reference", reference);
  s.add("levels", static_cast<long>(levels.size()));
  s.add("final_error", errors.back());
  s.add("observed_order", last_order);
  bool ok = true;
  if (cfg.has("run", "expected_order")) {
    const double expected = cfg.get_double("run", "expected_order");
    ok = std::abs(last_order - expected) <= 0.2;
    s.add("expected_order", expected);
    s.add("order_ok", ok);
  }
  return report(s, out, ok, "observed order outside expected +-0.2");
}

int run_verify_bounds(const RunOptions& opt) {
  const Config cfg = load_config(opt);
  const BuiltForm bf = build_form(cfg);
  const auto& form = bf.form;
  std::vector<double> times = opt.times;
  if (times.empty())
    times = cfg.has("run", "times") ? cfg.get_list("run", "times")
                                    : std::vector<double>{form.begin(), (form.begin() + form.end()) / 2, form.end()};
  const std::string grid_spec =
      !opt.lambda_grid.empty() ? opt.lambda_grid : cfg.get("run", "lambda_grid", "0, log:1e-1:1e3:11");
  const auto lambdas = parse_grid(grid_spec);
  const auto out = resolve_output(opt.out, "bounds.csv");
  auto file = open(out.csv);
  CsvWriter csv(file, "mreg.bounds/1", {"t", "lambda", "bound_name", "measured", "ceiling", "pass"});
  std::size_t failures = 0, rows = 0;
  double two_route = 0;
  std::mt19937_64 rng(opt.seed.value_or(7));
  for (double t : times) {
    const auto& piece = form.piece_at(t);
    const auto rep = verify_resolvent_bounds(piece, t, lambdas);
    for (const auto& r : rep.rows) {
      csv << r.t << r.lambda << r.name << r.measured << r.ceiling << r.pass;
      csv.end_row();
    }
    failures += rep.failures();
    rows += rep.rows.size();
    const auto fact = spectral_decompose(piece, t);
    for (int k = 0; k < 20; ++k) {
      const Vec x = random_vector<double>(rng, piece.dim());
      const Vec a = power_apply(fact, -0.5, x);
      const Vec b = invsqrt_quadrature(piece, t, x, 200);
      two_route = std::max(two_route, piece.triple().norm_h(Vec(a - b)) / piece.triple().norm_h(a));
    }
  }
  Summary s;
  s.add("command", "verify-bounds");
  s.add("rows", static_cast<long>(rows));
  s.add("failures", static_cast<long>(failures));
  s.add("all_pass", failures == 0);
  s.add("two_route_max_relative_error", two_route);
  return report(s, out, failures == 0, std::to_string(failures) + " bound(s) violated");
}

namespace {

struct RandomCase {
  Index dim;
  double T;
  MRDiagnostics<double> diag;
  double accuracy;
  double slack;
};

// Diagnostics of the oracle trajectory sampled on n uniform steps, refined
// until two successive MR norms differ by at most 5%.
RandomCase random_case(const EvolutionProblem<double>& p, double tol) {
  const auto sol = reference_solve(p, tol);
  long n = 500;
  auto sample = [&](long steps) {
    return mr_diagnostics(p, sample_oracle(sol, uniform_times(p.begin(), p.end(), steps + 1)));
  };
  auto coarse = sample(n);
  while (true) {
    n *= 2;
    auto fine = sample(n);
    const double slack = std::abs(fine.norm_MR - coarse.norm_MR) / fine.norm_MR;
    if (slack <= 0.05 || n >= 64000) return {p.dim(), p.horizon(), fine, sol.accuracy_estimate, slack};
    coarse = fine;
  }
}

}  // namespace

int run_verify_mr(const RunOptions& opt) {
  if (opt.config.empty()) {
    const unsigned long seed = opt.seed.value_or(7);
    const long count = opt.problems.value_or(100);
    const double tol = opt.oracle_tol.value_or(1e-10);
    std::mt19937_64 rng(seed);
    std::vector<EvolutionProblem<double>> problems;
    for (long i = 0; i < count; ++i) problems.push_back(random_mr_problem<double>(rng));
    const auto cases = parallel_map<RandomCase>(problems.size(), opt.jobs,
                                                [&](std::size_t i) { return random_case(problems[i], tol); });
    const auto out = resolve_output(opt.out, "mr_random.csv");
    auto file = open(out.csv);
    CsvWriter csv(file, "mreg.mr_random/1",
                  {"problem", "dim", "T", "norm_MR", "apriori_C", "rhs", "satisfied", "energy_residual",
                   "sup_V_norm", "oracle_accuracy", "discretization_slack"});
    long satisfied = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& c = cases[i];
      csv << static_cast<long>(i) << static_cast<long>(c.dim) << c.T << c.diag.norm_MR << c.diag.apriori_C
          << c.diag.apriori_rhs << c.diag.apriori_satisfied << c.diag.energy_residual << c.diag.sup_V_norm
          << c.accuracy << c.slack;
      csv.end_row();
      satisfied += c.diag.apriori_satisfied;
    }
    Summary s;
    s.add("command", "verify-mr");
    s.add("seed", static_cast<long>(seed));
    s.add("problems", count);
    s.add("satisfied", satisfied);
    s.add("satisfied_fraction", std::to_string(satisfied) + "/" + std::to_string(count));
    return report(s, out, satisfied == count, "a-priori estimate violated on some problem");
  }
  const Config cfg = load_config(opt);
  const auto problem = build_problem(cfg);
  const auto levels = refinement_levels(opt, cfg, 25, {25, 50, 100, 200});
  const double theta = theta_of(opt, cfg);
  const auto diags = parallel_map<MRDiagnostics<double>>(levels.size(), opt.jobs, [&](std::size_t i) {
    return mr_diagnostics(problem, solve_theta(problem, levels[i], theta));
  });
  const auto out = resolve_output(opt.out, "mr.csv");
  auto file = open(out.csv);
  CsvWriter csv(file, "mreg.mr/1",
                {"n_steps", "norm_MR", "apriori_C", "rhs", "satisfied", "energy_residual", "sup_V_norm"});
  bool all = true;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& d = diags[i];
    csv << levels[i] << d.norm_MR << d.apriori_C << d.apriori_rhs << d.apriori_satisfied << d.energy_residual
        << d.sup_V_norm;
    csv.end_row();
    all = all && d.apriori_satisfied;
  }
  Summary s;
  s.add("command", "verify-mr");
  s.add("levels", static_cast<long>(levels.size()));
  s.add("all_satisfied", all);
  if (levels.size() >= 2) {
    const auto& a = diags[diags.size() - 2];
    const auto& b = diags.back();
    s.add("energy_order", std::log(a.energy_residual / b.energy_residual) /
                              std::log(double(levels.back()) / double(levels[levels.size() - 2])));
  }
  add_diagnostics(s, diags.back());
  return report(s, out, all, "a-priori estimate violated");
}

int run_quasilinear(const RunOptions& opt) {
  const Config cfg = load_config(opt);
  const auto problem = build_quasilinear(cfg);
  FixedPointOptions<double> fp;
  fp.n_steps = steps_of(opt, cfg, 100);
  fp.theta = theta_of(opt, cfg);
  fp.tol = opt.tol ? *opt.tol : cfg.get_double("run", "tol", 1e-8);
  fp.max_iter = static_cast<int>(opt.max_iter ? *opt.max_iter : cfg.get_int("run", "max_iter", 50));
  fp.damping = opt.damping ? *opt.damping : cfg.get_double("run", "damping", 1.0);
  const auto res = solve_fixed_point(problem, fp);
  const auto out = resolve_output(opt.out, "picard.csv");
  auto file = open(out.csv);
  CsvWriter csv(file, "mreg.picard/1", {"iter", "distance", "residual", "norm_MR", "apriori_satisfied"});
  bool all_mr = true;
  for (const auto& h : res.history) {
    csv << h.iteration << h.distance << h.residual << h.norm_MR << h.apriori_satisfied;
    csv.end_row();
    all_mr = all_mr && h.apriori_satisfied;
  }
  write_trajectory(out.extra("trajectory.csv"), res.trajectory);
  Summary s;
  s.add("command", "quasilinear");
  s.add("converged", res.converged);
  s.add("iterations", static_cast<long>(res.history.size()));
  s.add("final_distance", res.history.back().distance);
  s.add("final_residual", res.history.back().residual);
  s.add("all_subsolves_satisfy_apriori", all_mr);
  s.add("damping", fp.damping);
  std::string why;
  if (!res.converged) {
    std::ostringstream os;
    os << "no convergence in " << fp.max_iter << " iterations; distances:";
    for (const auto& h : res.history) os << " " << format_number(h.distance);
    why = os.str();
  } else if (!all_mr) {
    why = "a linear sub-solve violated its a-priori estimate";
  }
  return report(s, out, res.converged && all_mr, why);
}

int run_sweep(const RunOptions& opt) {
  const Config cfg = load_config(opt);
  const auto problem = build_problem(cfg);
  const auto thetas = cfg.has("sweep", "thetas") ? cfg.get_list("sweep", "thetas") : std::vector<double>{0.5, 1.0};
  const auto steps = cfg.has("sweep", "steps") ? cfg.get_list("sweep", "steps") : std::vector<double>{20, 40, 80};
  const double tol = oracle_tol_of(opt, cfg).value_or(1e-10);
  const auto ref = reference_solve(problem, tol);
  struct Case {
    double theta;
    long n;
  };
  std::vector<Case> cases;
  for (double th : thetas)
    for (double n : steps) cases.push_back({th, std::lround(n)});
  struct Row {
    double l2 = 0, worst = 0, final_error = 0;
    MRDiagnostics<double> d;
  };
  const auto rows = parallel_map<Row>(cases.size(), opt.jobs, [&](std::size_t i) {
    const auto u = solve_theta(problem, cases[i].n, cases[i].theta);
    Row r;
    std::tie(r.l2, r.worst) = compare(problem, u, ref);
    r.final_error = problem.triple().norm_h(Vec(u.final_state() - ref(problem.end())));
    r.d = mr_diagnostics(problem, u);
    return r;
  });
  const auto out = resolve_output(opt.out, "sweep.csv");
  auto file = open(out.csv);
  CsvWriter csv(file, "mreg.sweep/1", {"theta", "n_steps", "error_L2H", "error_final", "norm_MR", "satisfied"});
  bool all = true;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    csv << cases[i].theta << cases[i].n << rows[i].l2 << rows[i].final_error << rows[i].d.norm_MR
        << rows[i].d.apriori_satisfied;
    csv.end_row();
    all = all && rows[i].d.apriori_satisfied;
  }
  Summary s;
  s.add("command", "sweep");
  s.add("cases", static_cast<long>(cases.size()));
  s.add("oracle_accuracy", ref.accuracy_estimate);
  s.add("all_satisfied", all);
  return report(s, out, all, "a-priori estimate violated");
}

}  // namespace mreg::io
