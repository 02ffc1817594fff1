#pragma once

#include <string>
#include <vector>

namespace mkv::diag {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Individual invariant checks. Each is deterministic (fixed internal seeds)
// and returns a one-line summary of the worst case it saw.
CheckResult check_cf_properties();
CheckResult check_laplace_cf_quadrature();
CheckResult check_levy_exponent_oracle();
CheckResult check_flow_composition();
CheckResult check_flow_inverse_bound();
CheckResult check_apriori_bounds();
CheckResult check_increment_bounds();
CheckResult check_char_fn_properties();
CheckResult check_ball_preservation();
CheckResult check_contraction_ratio();
CheckResult check_time_lipschitz();
CheckResult check_rk4_order();
CheckResult check_ode_richardson();
CheckResult check_kou_benchmark_consistency();
CheckResult check_beta_envelope();
CheckResult check_cross_path_atoms();

/// Runs every check above in a fixed order.
std::vector<CheckResult> run_invariant_suite();

}  // namespace mkv::diag
