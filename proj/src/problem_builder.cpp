#include "mreg/io/problem_builder.hpp"

#include "mreg/errors.hpp"
#include "mreg/matrix_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mreg::io {

namespace {

Expression expr(const Config& cfg, const std::string& section, const std::string& key) {
  try {
    return Expression::parse(cfg.get(section, key));
  } catch (const ConfigError& e) {
    throw ConfigError(cfg.where(section, key) + e.what());
  }
}

Eigen::MatrixXd matrix_value(const Config& cfg, const std::string& section, const std::string& key) {
  const std::string file_key = key + "_file";
  if (cfg.has(section, file_key)) {
    std::ifstream in(cfg.get(section, file_key));
    if (!in) throw ConfigError(cfg.where(section, file_key) + "cannot open matrix file");
    return read_matrix<double>(in);
  }
  try {
    return parse_matrix(cfg.get(section, key));
  } catch (const ConfigError& e) {
    throw ConfigError(cfg.where(section, key) + e.what());
  }
}

double horizon(const Config& cfg) {
  const double T = cfg.get_double("problem", "T", 1.0);
  if (!(T > 0)) throw ConfigError(cfg.where("problem", "T") + "T must be positive");
  return T;
}

// beta as expression in (t, x) or as a table "t0:v0, t1:v1, ..." shared by both ends.
BoundaryCoefficient<double> beta_function(const Config& cfg, const std::string& section) {
  if (cfg.has(section, "beta_table")) {
    std::vector<std::pair<double, double>> table;
    std::stringstream ss(cfg.get(section, "beta_table"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos)
        throw ConfigError(cfg.where(section, "beta_table") + "expected t:value pairs");
      const auto t = parse_number_list(item.substr(0, colon));
      const auto v = parse_number_list(item.substr(colon + 1));
      table.emplace_back(t.at(0), v.at(0));
    }
    for (std::size_t i = 1; i < table.size(); ++i)
      if (!(table[i].first > table[i - 1].first))
        throw ConfigError(cfg.where(section, "beta_table") + "table times must increase");
    return [table](double t, int) {
      if (t <= table.front().first) return table.front().second;
      if (t >= table.back().first) return table.back().second;
      std::size_t i = 1;
      while (table[i].first < t) ++i;
      const double s = (t - table[i - 1].first) / (table[i].first - table[i - 1].first);
      return (1 - s) * table[i - 1].second + s * table[i].second;
    };
  }
  const Expression e = expr(cfg, section, "beta");
  return [e](double t, int side) { return e(t, side == 0 ? 0.0 : 1.0); };
}

// Largest difference quotient of beta on a fine grid, with 5% headroom.
double beta_lipschitz_estimate(const BoundaryCoefficient<double>& beta, double begin, double T) {
  const auto times = uniform_times(begin, begin + T, 4097);
  double lip = 0;
  for (std::size_t k = 1; k < times.size(); ++k)
    for (int side = 0; side < 2; ++side)
      lip = std::max(lip, std::abs(beta(times[k], side) - beta(times[k - 1], side)) / (times[k] - times[k - 1]));
  return lip * 1.05;
}

}  // namespace

Eigen::MatrixXd parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) rows.push_back(parse_number_list(row));
  if (rows.empty()) throw ConfigError("empty matrix");
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw ConfigError("matrix rows have different lengths");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

FormDecomposition<double> build_form_piece(const Config& cfg, const std::string& section, double begin, double T) {
  const std::string kind = cfg.get(section, "kind");
  try {
    if (kind == "robin1d") {
      const long n = cfg.get_int(section, "n_elements");
      const auto beta = beta_function(cfg, section);
      const double lip = cfg.has(section, "beta_lipschitz") ? cfg.get_double(section, "beta_lipschitz")
                                                            : beta_lipschitz_estimate(beta, begin, T);
      RobinOptions<double> opt;
      opt.begin = begin;
      opt.lumped_mass = cfg.get_bool(section, "lumped", false);
      if (cfg.has(section, "advection")) {
        const Expression b = expr(cfg, section, "advection");
        opt.advection = [b](double x) { return b(0.0, x); };
      }
      return robin_form_1d<double>(n, beta, lip, T, opt);
    }
    if (kind == "schrodinger1d") {
      SchrodingerSpec<double> spec;
      spec.n_elements = cfg.get_int(section, "n_elements");
      spec.half_width = cfg.get_double(section, "half_width", 1.0);
      const P1Mesh<double> mesh{spec.n_elements, -spec.half_width, spec.half_width};
      const Eigen::VectorXd x = mesh.nodes();
      const Expression m0 = expr(cfg, section, "m0");
      spec.m0.resize(x.size());
      for (Index i = 0; i < x.size(); ++i) spec.m0(i) = m0(0.0, x(i));
      const Expression m = expr(cfg, section, "m");
      spec.m = [m](double t, double xx) { return m(t, xx); };
      spec.alpha1 = cfg.get_double(section, "alpha1");
      spec.alpha2 = cfg.get_double(section, "alpha2");
      spec.lipschitz = cfg.get_double(section, "lipschitz");
      spec.T = T;
      spec.begin = begin;
      return schrodinger_form_1d(spec);
    }
    if (kind == "constant") {
      const Eigen::MatrixXd a1 = matrix_value(cfg, section, "a1");
      const Index n = a1.rows();
      const Eigen::MatrixXd gh =
          cfg.has(section, "gram_h") || cfg.has(section, "gram_h_file") ? matrix_value(cfg, section, "gram_h")
                                                                        : Eigen::MatrixXd::Identity(n, n);
      const Eigen::MatrixXd gv =
          cfg.has(section, "gram_v") || cfg.has(section, "gram_v_file") ? matrix_value(cfg, section, "gram_v")
                                                                        : Eigen::MatrixXd::Identity(n, n);
      const Eigen::MatrixXd a2 = cfg.has(section, "a2") || cfg.has(section, "a2_file")
                                     ? matrix_value(cfg, section, "a2")
                                     : Eigen::MatrixXd();
      return constant_form<double>(GelfandTriple<double>(gh, gv), a1, a2, T, begin);
    }
    if (kind == "scalar") {
      const Expression a1 = expr(cfg, section, "a1");
      std::function<double(double)> a2;
      if (cfg.has(section, "a2")) {
        const Expression e = expr(cfg, section, "a2");
        a2 = [e](double t) { return e(t); };
      }
      return scalar_form<double>([a1](double t) { return a1(t); }, T, cfg.get_double(section, "gram_h", 1.0),
                                 cfg.get_double(section, "gram_v", 1.0), a2, begin);
    }
  } catch (const ValidationError& e) {
    throw ConfigError(cfg.source() + ": [" + section + "] " + e.what());
  }
  throw ConfigError(cfg.where(section, "kind") + "unknown form kind '" + kind + "'");
}

namespace {

Eigen::VectorXd form_nodes(const Config& cfg, const std::string& section, Index dim) {
  const std::string kind = cfg.get(section, "kind");
  if (kind == "robin1d") return P1Mesh<double>{cfg.get_int(section, "n_elements"), 0.0, 1.0}.nodes();
  if (kind == "schrodinger1d") {
    const double L = cfg.get_double(section, "half_width", 1.0);
    return P1Mesh<double>{cfg.get_int(section, "n_elements"), -L, L}.nodes();
  }
  return Eigen::VectorXd::LinSpaced(dim, 0.0, double(dim - 1));
}

Eigen::VectorXd nodal(const Expression& e, double t, const Eigen::VectorXd& x) {
  Eigen::VectorXd v(x.size());
  for (Index i = 0; i < x.size(); ++i) v(i) = e(t, x(i));
  return v;
}

}  // namespace

BuiltForm build_form(const Config& cfg, const std::string& section) {
  const double T = horizon(cfg);
  const std::string kind = cfg.get(section, "kind");
  if (kind != "piecewise") {
    auto piece = build_form_piece(cfg, section, 0.0, T);
    const Index dim = piece.dim();
    return {PiecewiseForm<double>::single(std::move(piece)), form_nodes(cfg, section, dim)};
  }
  std::vector<double> bp = cfg.get_list(section, "breakpoints");
  if (bp.front() != 0.0) bp.insert(bp.begin(), 0.0);
  if (bp.back() != T) bp.push_back(T);
  std::vector<FormDecomposition<double>> pieces;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    const std::string sub = section + ".piece" + std::to_string(i);
    if (!cfg.has_section(sub))
      throw ConfigError(cfg.where(section, "breakpoints") + "missing section [" + sub + "]");
    pieces.push_back(build_form_piece(cfg, sub, bp[i], bp[i + 1] - bp[i]));
  }
  const Index dim = pieces.front().dim();
  const auto nodes = form_nodes(cfg, section + ".piece0", dim);
  try {
    return {PiecewiseForm<double>(bp, std::move(pieces)), nodes};
  } catch (const ValidationError& e) {
    throw ConfigError(cfg.where(section, "breakpoints") + e.what());
  }
}

namespace {

Perturbation<double> build_perturbation(const Config& cfg, const BuiltForm& bf) {
  const std::string s = "perturbation";
  const std::string kind = cfg.get(s, "kind", "identity");
  const auto& tr = bf.form.triple();
  try {
    if (kind == "identity") return identity_perturbation<double>();
    if (kind == "constant") return constant_perturbation<double>(tr, matrix_value(cfg, s, "b"));
    if (kind == "expression") {
      const Expression b = expr(cfg, s, "b");
      const Eigen::VectorXd x = bf.nodes;
      return measured_perturbation<double>(
          tr, [b, x](double t) -> Eigen::MatrixXd { return nodal(b, t, x).asDiagonal(); }, bf.form.begin(),
          bf.form.end());
    }
  } catch (const ValidationError& e) {
    throw ConfigError(cfg.source() + ": [perturbation] " + e.what());
  }
  throw ConfigError(cfg.where(s, "kind") + "unknown perturbation kind '" + kind + "'");
}

Source<double> build_source(const Config& cfg, const BuiltForm& bf) {
  const std::string s = "source";
  if (cfg.has(s, "f_vector")) {
    const auto v = cfg.get_list(s, "f_vector");
    if (static_cast<Index>(v.size()) != bf.form.dim()) throw ConfigError(cfg.where(s, "f_vector") + "wrong length");
    return constant_source<double>(Eigen::Map<const Eigen::VectorXd>(v.data(), bf.form.dim()));
  }
  if (!cfg.has(s, "f")) return zero_source<double>();
  const Expression f = expr(cfg, s, "f");
  if (f.is_constant() && f(0.0) == 0.0) return zero_source<double>();
  const Eigen::VectorXd x = bf.nodes;
  return Source<double>{[f, x](double t) { return nodal(f, t, x); }, false};
}

Eigen::VectorXd build_initial(const Config& cfg, const BuiltForm& bf) {
  const std::string s = "initial";
  if (cfg.has(s, "u0_vector")) {
    const auto v = cfg.get_list(s, "u0_vector");
    if (static_cast<Index>(v.size()) != bf.form.dim()) throw ConfigError(cfg.where(s, "u0_vector") + "wrong length");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), bf.form.dim());
  }
  if (!cfg.has(s, "u0")) return Eigen::VectorXd::Zero(bf.form.dim());
  return nodal(expr(cfg, s, "u0"), bf.form.begin(), bf.nodes);
}

}  // namespace

EvolutionProblem<double> build_problem(const Config& cfg) {
  const BuiltForm bf = build_form(cfg);
  try {
    return EvolutionProblem<double>(bf.form, build_perturbation(cfg, bf), build_source(cfg, bf),
                                    build_initial(cfg, bf));
  } catch (const ValidationError& e) {
    throw ConfigError(cfg.source() + ": " + e.what());
  }
}

QuasilinearProblem<double> build_quasilinear(const Config& cfg) {
  const BuiltForm bf = build_form(cfg);
  if (!bf.form.is_single()) throw ConfigError(cfg.source() + ": quasilinear problems need a single form");
  const Expression m = expr(cfg, "quasilinear", "m");
  QuasilinearProblem<double> p{bf.form.pieces().front(), [m](double t, double xi) { return m(t, 0.0, xi); },
                               cfg.get_double("quasilinear", "delta_m"), build_source(cfg, bf),
                               build_initial(cfg, bf)};
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(cfg.source() + ": [quasilinear] " + e.what());
  }
  return p;
}

std::optional<VectorFamily<double>> exact_solution(const Config& cfg) {
  if (!cfg.has("run", "exact")) return std::nullopt;
  const Expression e = expr(cfg, "run", "exact");
  const BuiltForm bf = build_form(cfg);
  const Eigen::VectorXd x = bf.nodes;
  return VectorFamily<double>([e, x](double t) { return nodal(e, t, x); });
}

}  // namespace mreg::io
