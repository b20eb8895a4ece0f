#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mreg::io {

// Command-line overrides; unset values fall back to the [run] section of
// the config and then to built-in defaults.
struct RunOptions {
  std::string config;
  std::optional<long> steps;
  std::optional<double> theta;
  std::optional<long> cells;
  std::vector<long> refinements;
  std::string out;
  std::optional<unsigned long> seed;
  unsigned jobs = 1;
  std::optional<double> oracle_tol;
  std::vector<double> times;
  std::string lambda_grid;
  std::optional<double> tol;
  std::optional<long> max_iter;
  std::optional<double> damping;
  std::optional<long> problems;
};

// Where a command writes. An --out ending in ".csv" names the main CSV and
// the other files sit next to it with the same stem; anything else is a
// directory holding <default>.csv, summary.txt and the extras.
struct OutputPaths {
  std::string csv;
  std::string summary;
  std::string extra(const std::string& name) const;
  std::string stem;
  bool directory = true;
};

OutputPaths resolve_output(const std::string& out, const std::string& default_csv);

// "0, 1, log:1e-1:1e3:11" -> numbers, log-spaced blocks expanded.
std::vector<double> parse_grid(const std::string& spec);

int run_solve(const RunOptions& opt);
int run_spacetime(const RunOptions& opt);
int run_glue(const RunOptions& opt);
int run_convergence(const RunOptions& opt);
int run_verify_bounds(const RunOptions& opt);
int run_verify_mr(const RunOptions& opt);
int run_quasilinear(const RunOptions& opt);
int run_sweep(const RunOptions& opt);

}  // namespace mreg::io
