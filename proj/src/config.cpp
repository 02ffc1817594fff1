#include "mkv/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mkv::config {
namespace {

using Issues = std::vector<std::pair<std::string, std::string>>;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

/// Raw INI structure: ordered (section, key, value) triples.
struct IniEntry {
  std::string section, key, value;
  int line = 0;
};

std::vector<IniEntry> parse_ini(const std::string& text, Issues& issues) {
  std::vector<IniEntry> entries;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.emplace_back("line " + std::to_string(lineno), "malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.emplace_back("line " + std::to_string(lineno), "expected key = value");
      continue;
    }
    IniEntry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (section.empty()) {
      issues.emplace_back(e.key, "key appears before any [section]");
      continue;
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_int(const std::string& s, int& out) {
  try {
    std::size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no") {
    out = false;
    return true;
  }
  return false;
}

/// Vector syntax: comma list; a single value broadcasts to all components.
bool parse_vector(const std::string& s, int d, VectorX<double>& out) {
  const auto parts = split(s, ',');
  if (parts.size() != 1 && static_cast<int>(parts.size()) != d) return false;
  out.resize(d);
  if (parts.size() == 1) {
    double v;
    if (!parse_double(parts[0], v)) return false;
    out.setConstant(v);
    return true;
  }
  for (int i = 0; i < d; ++i)
    if (!parse_double(parts[static_cast<std::size_t>(i)], out(i))) return false;
  return true;
}

/// Matrix syntax: rows split by '|', entries by ','. A single value means
/// that multiple of the identity.
bool parse_matrix(const std::string& s, int d, MatrixX<double>& out) {
  const auto rows = split(s, '|');
  out.resize(d, d);
  if (rows.size() == 1 && split(rows[0], ',').size() == 1) {
    double v;
    if (!parse_double(rows[0], v)) return false;
    out = v * MatrixX<double>::Identity(d, d);
    return true;
  }
  if (static_cast<int>(rows.size()) != d) return false;
  for (int i = 0; i < d; ++i) {
    const auto cols = split(rows[static_cast<std::size_t>(i)], ',');
    if (static_cast<int>(cols.size()) != d) return false;
    for (int j = 0; j < d; ++j)
      if (!parse_double(cols[static_cast<std::size_t>(j)], out(i, j))) return false;
  }
  return true;
}

std::string fmt_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string vector_to_string(const VectorX<double>& v) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_num(v(i));
  }
  return out;
}

std::string matrix_to_string(const MatrixX<double>& m) {
  std::string out;
  for (int i = 0; i < m.rows(); ++i) {
    if (i) out += '|';
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += fmt_num(m(i, j));
    }
  }
  return out;
}

const std::set<std::string> kProblemKeys = {"dimension", "horizon",  "drift",     "A",
                                            "w",         "v",        "jumps",     "jump_intensity",
                                            "jump_lambda1", "jump_lambda2", "jump_p", "initial_law",
                                            "law_mean",  "law_cov",  "law_point", "sigma"};
const std::set<std::string> kPicardKeys = {"n",          "m_rule",    "m_fixed",  "lambda", "psi_path",
                                           "quad_radius", "quad_nodes", "quad_rule", "stop_tol"};
const std::set<std::string> kOutputKeys = {"csv", "verbosity", "trajectory", "trajectory_n", "timings"};

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  Issues issues;
  const auto entries = parse_ini(text, issues);

  // reject unknown sections/keys and duplicates up front
  std::set<std::string> seen;
  for (const auto& e : entries) {
    const std::string field = e.section + "." + e.key;
    if (e.section == "problem") {
      if (!kProblemKeys.count(e.key)) issues.emplace_back(field, "unknown key");
    } else if (e.section == "picard") {
      if (!kPicardKeys.count(e.key)) issues.emplace_back(field, "unknown key");
    } else if (e.section == "output") {
      if (!kOutputKeys.count(e.key)) issues.emplace_back(field, "unknown key");
    } else {
      issues.emplace_back(e.section, "unknown section");
      continue;
    }
    if (!seen.insert(field).second) issues.emplace_back(field, "duplicate key");
  }

  std::map<std::string, std::string> kv;
  for (const auto& e : entries) kv[e.section + "." + e.key] = e.value;
  const auto get = [&kv](const std::string& field) -> const std::string* {
    const auto it = kv.find(field);
    return it == kv.end() ? nullptr : &it->second;
  };

  RunConfig config;
  auto& p = config.problem;

  if (const auto* s = get("problem.dimension"))
    if (!parse_int(*s, p.dimension)) issues.emplace_back("problem.dimension", "not an integer");
  if (p.dimension < 1) issues.emplace_back("problem.dimension", "must be >= 1");
  const int d = std::max(p.dimension, 1);
  if (const auto* s = get("problem.horizon"))
    if (!parse_double(*s, p.horizon)) issues.emplace_back("problem.horizon", "not a number");
  if (!(p.horizon > 0)) issues.emplace_back("problem.horizon", "must be positive");

  if (const auto* s = get("problem.drift")) p.drift = *s;
  if (p.drift != "const_a_trig_b")
    issues.emplace_back("problem.drift", "config files support the const_a_trig_b drift; "
                                         "spectral drifts are programmatic-API only");
  p.A = MatrixX<double>::Zero(d, d);
  p.w = VectorX<double>::Ones(d);
  p.v = VectorX<double>::Ones(d);
  p.sigma = MatrixX<double>::Identity(d, d);
  if (const auto* s = get("problem.A"))
    if (!parse_matrix(*s, d, p.A)) issues.emplace_back("problem.A", "expected scalar or d x d matrix (rows separated by |)");
  if (const auto* s = get("problem.w"))
    if (!parse_vector(*s, d, p.w)) issues.emplace_back("problem.w", "expected scalar or d-vector");
  if (const auto* s = get("problem.v"))
    if (!parse_vector(*s, d, p.v)) issues.emplace_back("problem.v", "expected scalar or d-vector");
  if (const auto* s = get("problem.sigma"))
    if (!parse_matrix(*s, d, p.sigma)) issues.emplace_back("problem.sigma", "expected scalar or d x d matrix (rows separated by |)");

  if (const auto* s = get("problem.jumps")) p.jumps = *s;
  if (p.jumps != "none" && p.jumps != "double_exp")
    issues.emplace_back("problem.jumps", "expected none or double_exp");
  if (p.jumps == "double_exp") {
    if (d != 1) issues.emplace_back("problem.jumps", "double_exp jumps need dimension = 1");
    if (const auto* s = get("problem.jump_intensity"))
      if (!parse_double(*s, p.jump_intensity)) issues.emplace_back("problem.jump_intensity", "not a number");
    if (const auto* s = get("problem.jump_lambda1"))
      if (!parse_double(*s, p.jump_lambda1)) issues.emplace_back("problem.jump_lambda1", "not a number");
    if (const auto* s = get("problem.jump_lambda2"))
      if (!parse_double(*s, p.jump_lambda2)) issues.emplace_back("problem.jump_lambda2", "not a number");
    if (const auto* s = get("problem.jump_p"))
      if (!parse_double(*s, p.jump_p)) issues.emplace_back("problem.jump_p", "not a number");
    if (!(p.jump_intensity > 0)) issues.emplace_back("problem.jump_intensity", "must be positive");
    if (!(p.jump_lambda1 > 0)) issues.emplace_back("problem.jump_lambda1", "must be positive");
    if (!(p.jump_lambda2 > 0)) issues.emplace_back("problem.jump_lambda2", "must be positive");
    if (p.jump_p < 0 || p.jump_p > 1) issues.emplace_back("problem.jump_p", "must lie in [0,1]");
  }

  if (const auto* s = get("problem.initial_law")) p.initial_law = *s;
  const std::set<std::string> laws = {"laplace", "product_laplace", "gaussian", "stable", "point_mass"};
  if (!laws.count(p.initial_law))
    issues.emplace_back("problem.initial_law", "expected laplace, product_laplace, gaussian, stable or point_mass");
  if (p.initial_law == "laplace" && d != 1)
    issues.emplace_back("problem.initial_law", "laplace is one-dimensional; use product_laplace");
  p.law_mean = VectorX<double>::Zero(d);
  p.law_cov = MatrixX<double>::Identity(d, d);
  p.law_point = VectorX<double>::Zero(d);
  if (const auto* s = get("problem.law_mean"))
    if (!parse_vector(*s, d, p.law_mean)) issues.emplace_back("problem.law_mean", "expected scalar or d-vector");
  if (const auto* s = get("problem.law_cov"))
    if (!parse_matrix(*s, d, p.law_cov)) issues.emplace_back("problem.law_cov", "expected scalar or d x d matrix (rows separated by |)");
  if (const auto* s = get("problem.law_point"))
    if (!parse_vector(*s, d, p.law_point)) issues.emplace_back("problem.law_point", "expected scalar or d-vector");

  auto& pic = config.picard;
  if (const auto* s = get("picard.n")) {
    pic.n_list.clear();
    for (const auto& part : split(*s, ',')) {
      int n = 0;
      if (!parse_int(part, n) || n < 1) {
        issues.emplace_back("picard.n", "expected a comma list of positive integers");
        break;
      }
      pic.n_list.push_back(n);
    }
  }
  if (pic.n_list.empty()) issues.emplace_back("picard.n", "need at least one step count");
  if (const auto* s = get("picard.m_rule")) pic.m_rule = *s;
  if (pic.m_rule != "log2" && pic.m_rule != "fixed") issues.emplace_back("picard.m_rule", "expected log2 or fixed");
  if (const auto* s = get("picard.m_fixed"))
    if (!parse_int(*s, pic.m_fixed)) issues.emplace_back("picard.m_fixed", "not an integer");
  if (pic.m_rule == "fixed" && pic.m_fixed < 1)
    issues.emplace_back("picard.m_fixed", "fixed rule needs m_fixed >= 1");
  if (const auto* s = get("picard.lambda"))
    if (!parse_double(*s, pic.lambda)) issues.emplace_back("picard.lambda", "not a number");
  if (pic.lambda < 0) issues.emplace_back("picard.lambda", "must be >= 0");
  if (const auto* s = get("picard.psi_path")) pic.psi_path = *s;
  if (pic.psi_path != "trig" && pic.psi_path != "fourier" && pic.psi_path != "damped")
    issues.emplace_back("picard.psi_path", "expected trig, fourier or damped");
  else if (pic.psi_path != "trig")
    issues.emplace_back("picard.psi_path",
                        "config-built problems have no spectral callables; only trig is runnable");
  if (const auto* s = get("picard.quad_radius"))
    if (!parse_double(*s, pic.quad_radius)) issues.emplace_back("picard.quad_radius", "not a number");
  if (pic.quad_radius < 0) issues.emplace_back("picard.quad_radius", "must be >= 0 (0 = automatic)");
  if (const auto* s = get("picard.quad_nodes"))
    if (!parse_int(*s, pic.quad_nodes)) issues.emplace_back("picard.quad_nodes", "not an integer");
  if (pic.quad_nodes < 2) issues.emplace_back("picard.quad_nodes", "must be >= 2");
  if (const auto* s = get("picard.quad_rule")) pic.quad_rule = *s;
  if (pic.quad_rule != "gauss_legendre" && pic.quad_rule != "trapezoid")
    issues.emplace_back("picard.quad_rule", "expected gauss_legendre or trapezoid");
  if (const auto* s = get("picard.stop_tol"))
    if (!parse_double(*s, pic.stop_tol)) issues.emplace_back("picard.stop_tol", "not a number");
  if (pic.stop_tol < 0) issues.emplace_back("picard.stop_tol", "must be >= 0");

  auto& out = config.output;
  if (const auto* s = get("output.csv")) out.csv = *s;
  if (out.csv.empty()) issues.emplace_back("output.csv", "must not be empty");
  if (const auto* s = get("output.verbosity"))
    if (!parse_int(*s, out.verbosity)) issues.emplace_back("output.verbosity", "not an integer");
  if (out.verbosity < 0 || out.verbosity > 2) issues.emplace_back("output.verbosity", "expected 0, 1 or 2");
  if (const auto* s = get("output.trajectory")) out.trajectory = *s;
  if (const auto* s = get("output.trajectory_n"))
    if (!parse_int(*s, out.trajectory_n)) issues.emplace_back("output.trajectory_n", "not an integer");
  if (out.trajectory_n < 1) issues.emplace_back("output.trajectory_n", "must be >= 1");
  if (const auto* s = get("output.timings"))
    if (!parse_bool(*s, out.timings)) issues.emplace_back("output.timings", "expected true or false");

  if (!issues.empty()) throw ConfigError(std::move(issues));
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{"config", "cannot open " + path}});
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string serialize(const RunConfig& config) {
  const auto& p = config.problem;
  const auto& pic = config.picard;
  const auto& out = config.output;
  std::string text;
  text += "[problem]\n";
  text += "dimension = " + std::to_string(p.dimension) + "\n";
  text += "horizon = " + fmt_num(p.horizon) + "\n";
  text += "drift = " + p.drift + "\n";
  text += "A = " + matrix_to_string(p.A) + "\n";
  text += "w = " + vector_to_string(p.w) + "\n";
  text += "v = " + vector_to_string(p.v) + "\n";
  text += "sigma = " + matrix_to_string(p.sigma) + "\n";
  text += "jumps = " + p.jumps + "\n";
  if (p.jumps == "double_exp") {
    text += "jump_intensity = " + fmt_num(p.jump_intensity) + "\n";
    text += "jump_lambda1 = " + fmt_num(p.jump_lambda1) + "\n";
    text += "jump_lambda2 = " + fmt_num(p.jump_lambda2) + "\n";
    text += "jump_p = " + fmt_num(p.jump_p) + "\n";
  }
  text += "initial_law = " + p.initial_law + "\n";
  if (p.initial_law == "gaussian") {
    text += "law_mean = " + vector_to_string(p.law_mean) + "\n";
    text += "law_cov = " + matrix_to_string(p.law_cov) + "\n";
  }
  if (p.initial_law == "point_mass") text += "law_point = " + vector_to_string(p.law_point) + "\n";
  text += "\n[picard]\n";
  text += "n = ";
  for (std::size_t i = 0; i < pic.n_list.size(); ++i)
    text += (i ? "," : "") + std::to_string(pic.n_list[i]);
  text += "\n";
  text += "m_rule = " + pic.m_rule + "\n";
  if (pic.m_rule == "fixed") text += "m_fixed = " + std::to_string(pic.m_fixed) + "\n";
  text += "lambda = " + fmt_num(pic.lambda) + "\n";
  text += "psi_path = " + pic.psi_path + "\n";
  text += "quad_radius = " + fmt_num(pic.quad_radius) + "\n";
  text += "quad_nodes = " + std::to_string(pic.quad_nodes) + "\n";
  text += "quad_rule = " + pic.quad_rule + "\n";
  text += "stop_tol = " + fmt_num(pic.stop_tol) + "\n";
  text += "\n[output]\n";
  text += "csv = " + out.csv + "\n";
  text += "verbosity = " + std::to_string(out.verbosity) + "\n";
  if (!out.trajectory.empty()) text += "trajectory = " + out.trajectory + "\n";
  text += "trajectory_n = " + std::to_string(out.trajectory_n) + "\n";
  text += std::string("timings = ") + (out.timings ? "true" : "false") + "\n";
  return text;
}

Problem<double> build_problem(const RunConfig& config) {
  const auto& p = config.problem;
  Problem<double> problem;
  problem.horizon = p.horizon;
  problem.levy.sigma = p.sigma;
  if (p.jumps == "double_exp")
    problem.levy.jump =
        CompoundPoissonDoubleExp<double>{p.jump_intensity, p.jump_lambda1, p.jump_lambda2, p.jump_p};
  if (p.initial_law == "laplace")
    problem.law = laplace_initial_law<double>();
  else if (p.initial_law == "product_laplace")
    problem.law = product_laplace_initial_law<double>(p.dimension);
  else if (p.initial_law == "gaussian")
    problem.law = gaussian_initial_law<double>(p.law_mean, p.law_cov);
  else if (p.initial_law == "stable")
    problem.law = stable_one_initial_law<double>(p.dimension);
  else
    problem.law = point_mass_initial_law<double>(p.law_point);
  ConstantATrigB<double> drift{p.A, p.w, p.v};
  problem.drift = drift;
  return problem;
}

PicardConfig<double> build_picard_config(const RunConfig& config, int n_steps, int workers) {
  const auto& pic = config.picard;
  PicardConfig<double> out;
  out.n_steps = n_steps;
  out.max_iters = pic.m_rule == "fixed" ? pic.m_fixed : 0;
  out.lambda = pic.lambda;
  out.path = PicardConfig<double>::Path::trig;
  out.quad.radius = pic.quad_radius;
  out.quad.nodes_per_axis = pic.quad_nodes;
  out.quad.rule = pic.quad_rule == "trapezoid" ? QuadratureSpec<double>::Rule::trapezoid
                                               : QuadratureSpec<double>::Rule::gauss_legendre;
  out.stop_tol = pic.stop_tol;
  out.workers = workers;
  return out;
}

}  // namespace mkv::config
