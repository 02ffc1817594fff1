#pragma once

#include "mkv/model.hpp"
#include "mkv/picard.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mkv::config {

/// Validation failure with a machine-readable field/message listing.
struct ConfigError : std::runtime_error {
  std::vector<std::pair<std::string, std::string>> issues;  // (field, message)

  explicit ConfigError(std::vector<std::pair<std::string, std::string>> list)
      : std::runtime_error(format(list)), issues(std::move(list)) {}

  static std::string format(const std::vector<std::pair<std::string, std::string>>& list) {
    std::string out = "invalid configuration:";
    for (const auto& [field, message] : list) out += "\n  " + field + ": " + message;
    return out;
  }
};

struct ProblemSection {
  int dimension = 1;
  double horizon = 1.0;
  std::string drift = "const_a_trig_b";
  MatrixX<double> A;
  VectorX<double> w;
  VectorX<double> v;
  std::string jumps = "none";  // none | double_exp
  double jump_intensity = 0, jump_lambda1 = 1, jump_lambda2 = 1, jump_p = 0.5;
  std::string initial_law = "laplace";  // laplace | product_laplace | gaussian | stable | point_mass
  VectorX<double> law_mean;
  MatrixX<double> law_cov;
  VectorX<double> law_point;
  MatrixX<double> sigma;
};

struct PicardSection {
  std::vector<int> n_list{16, 32, 64, 128, 256};
  std::string m_rule = "log2";  // log2 | fixed
  int m_fixed = 0;
  double lambda = 0.0;
  std::string psi_path = "trig";
  double quad_radius = 0.0;  // 0 -> automatic
  int quad_nodes = 65;
  std::string quad_rule = "gauss_legendre";
  double stop_tol = 0.0;
};

struct OutputSection {
  std::string csv = "report.csv";
  int verbosity = 1;
  std::string trajectory;
  int trajectory_n = 16;
  bool timings = true;
};

struct RunConfig {
  ProblemSection problem;
  PicardSection picard;
  OutputSection output;
};

/// Parses and validates the sectioned config text; throws ConfigError listing
/// every offending field (unknown keys and sections included).
RunConfig parse_run_config(const std::string& text);

/// Reads the file then parses it.
RunConfig load_run_config(const std::string& path);

/// Canonical text form: fixed section and key order, normalized numbers.
/// parse(serialize(c)) reproduces c.
std::string serialize(const RunConfig& config);

Problem<double> build_problem(const RunConfig& config);
PicardConfig<double> build_picard_config(const RunConfig& config, int n_steps, int workers);

}  // namespace mkv::config
