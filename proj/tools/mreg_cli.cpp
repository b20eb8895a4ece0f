#include "mreg/errors.hpp"
#include "mreg/io/experiments.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

using mreg::io::RunOptions;

template <typename T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-autonomous evolution equations on finite-dimensional Gelfand triples"};
  app.require_subcommand(1);
  RunOptions opt;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunOptions&);
  };
  const Command commands[] = {
      {"solve", "theta-scheme solve of one problem", mreg::io::run_solve},
      {"spacetime", "space-time Galerkin solve", mreg::io::run_spacetime},
      {"glue", "piece-by-piece solve of a piecewise problem", mreg::io::run_glue},
      {"convergence", "time-step refinement study", mreg::io::run_convergence},
      {"verify-bounds", "resolvent and square-root bounds of a form", mreg::io::run_verify_bounds},
      {"verify-mr", "maximal-regularity diagnostics (config) or the random suite (no config)",
       mreg::io::run_verify_mr},
      {"quasilinear", "Picard iteration for the quasilinear problem", mreg::io::run_quasilinear},
      {"sweep", "theta x steps sweep against the reference solution", mreg::io::run_sweep},
  };

  int (*selected)(const RunOptions&) = nullptr;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config,--form", opt.config, "problem configuration file");
    optional_flag(sub, "--steps", opt.steps, "number of time steps (per piece for glue)");
    optional_flag(sub, "--theta", opt.theta, "theta in [1/2, 1]");
    optional_flag(sub, "--cells", opt.cells, "space-time cells");
    sub->add_option("--refinements", opt.refinements, "step counts of a refinement study")->delimiter(',');
    sub->add_option("--out", opt.out, "output directory, or a path ending in .csv");
    optional_flag(sub, "--seed", opt.seed, "seed of randomized suites");
    sub->add_option("--jobs", opt.jobs, "worker threads for independent cases");
    optional_flag(sub, "--oracle-tol", opt.oracle_tol, "tolerance of the reference solver");
    sub->add_option("--times", opt.times, "evaluation times")->delimiter(',');
    sub->add_option("--lambda-grid", opt.lambda_grid, "resolvent grid, e.g. 0,log:1e-1:1e3:11");
    optional_flag(sub, "--tol", opt.tol, "fixed-point tolerance");
    optional_flag(sub, "--max-iter", opt.max_iter, "fixed-point iteration limit");
    optional_flag(sub, "--damping", opt.damping, "fixed-point damping in (0, 1]");
    optional_flag(sub, "--problems", opt.problems, "number of random problems");
    sub->callback([&selected, run = c.run] { selected = run; });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return selected(opt);
  } catch (const mreg::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const mreg::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
