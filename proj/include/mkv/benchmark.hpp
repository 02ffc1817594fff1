#pragma once

#include "mkv/picard.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace mkv {

enum class CaseId { gaussian_1d, kou_1d, multidim, stable_init };

/// One reference experiment: a structured mean-field problem whose solution
/// is semi-explicit up to a scalar ODE for the common component mean.
template <typename Scalar = double>
struct BenchmarkCase {
  CaseId id = CaseId::gaussian_1d;
  int dim = 1;
  Scalar a = Scalar(1.5);
  MatrixX<Scalar> sigma;
  Scalar horizon = 1;
  // Kou jump parameters (kou_1d only)
  Scalar jump_intensity = 0, jump_lambda1 = 1, jump_lambda2 = 1, jump_p = Scalar(0.5);
  long ode_steps = 1L << 16;

  std::string name() const {
    switch (id) {
      case CaseId::gaussian_1d: return "gaussian_1d";
      case CaseId::kou_1d: return "kou_1d";
      case CaseId::multidim: return "multidim_d" + std::to_string(dim);
      case CaseId::stable_init: return "stable_init_d" + std::to_string(dim);
    }
    return "unknown";
  }

  /// <1, theta 1>, the quadratic-form coefficient entering the benchmark.
  Scalar ones_quad_form() const {
    const VectorX<Scalar> ones = VectorX<Scalar>::Ones(dim);
    return ones.dot(sigma * sigma.transpose() * ones);
  }

  /// C-form coefficient integral of e^{2 a s} theta-form over [0, t].
  Scalar quad_form_at(Scalar t) const {
    return ones_quad_form() * Scalar(std::expm1(2.0 * static_cast<double>(a * t))) / (Scalar(2) * a);
  }

  /// The target expectation E[b-component] expressed through the component
  /// mean m: the closed attenuation/phase display of each experiment.
  Scalar beta_display(Scalar t, Scalar m) const {
    const Scalar e2at = std::exp(Scalar(2) * a * t);
    switch (id) {
      case CaseId::gaussian_1d:
        return std::exp(-quad_form_at(t) / Scalar(2)) / (Scalar(1) + e2at) * std::cos(m);
      case CaseId::kou_1d: {
        const Scalar l1 = jump_lambda1, l2 = jump_lambda2;
        const Scalar eat = std::exp(a * t);
        const Scalar k1 = (Scalar(1) + l1 * l1) / (e2at + l1 * l1);
        const Scalar k2 = (Scalar(1) + l2 * l2) / (e2at + l2 * l2);
        const Scalar cu = jump_p * jump_intensity / a;
        const Scalar cd = (Scalar(1) - jump_p) * jump_intensity / a;
        const Scalar phase = cu * (std::atan(-Scalar(1) / l1) - std::atan(-eat / l1)) +
                             cd * (std::atan(Scalar(1) / l2) - std::atan(eat / l2));
        return std::exp(-quad_form_at(t) / Scalar(2)) / (Scalar(1) + e2at) *
               std::pow(k1, cu / Scalar(2)) * std::pow(k2, cd / Scalar(2)) * std::cos(m + phase);
      }
      case CaseId::multidim:
        return std::exp(-quad_form_at(t) / Scalar(2)) / std::pow(Scalar(1) + e2at, Scalar(dim)) *
               std::cos(Scalar(dim) * m);
      case CaseId::stable_init: {
        const Scalar eat = std::exp(a * t);
        return std::exp(-quad_form_at(t) / Scalar(2) - Scalar(dim) * eat) *
               std::cos(Scalar(dim) * (eat + m));
      }
    }
    return 0;
  }

  /// Right-hand side of the component-mean ODE m' = a m + beta_display(t, m).
  Scalar mean_rhs(Scalar t, Scalar m) const { return a * m + beta_display(t, m); }

  Problem<Scalar> problem() const {
    Problem<Scalar> p;
    p.horizon = horizon;
    p.levy.sigma = sigma;
    if (id == CaseId::kou_1d)
      p.levy.jump = CompoundPoissonDoubleExp<Scalar>{jump_intensity, jump_lambda1, jump_lambda2, jump_p};
    switch (id) {
      case CaseId::gaussian_1d:
      case CaseId::kou_1d: p.law = laplace_initial_law<Scalar>(); break;
      case CaseId::multidim: p.law = product_laplace_initial_law<Scalar>(dim); break;
      case CaseId::stable_init: p.law = stable_one_initial_law<Scalar>(dim); break;
    }
    ConstantATrigB<Scalar> drift;
    drift.A = a * MatrixX<Scalar>::Identity(dim, dim);
    drift.w = VectorX<Scalar>::Ones(dim);
    drift.v = VectorX<Scalar>::Ones(dim);
    p.drift = drift;
    return p;
  }
};

template <typename Scalar = double>
BenchmarkCase<Scalar> make_gaussian_case() {
  BenchmarkCase<Scalar> c;
  c.id = CaseId::gaussian_1d;
  c.dim = 1;
  c.a = Scalar(1.5);
  c.sigma = Scalar(0.8) * MatrixX<Scalar>::Identity(1, 1);
  c.horizon = 1;
  return c;
}

template <typename Scalar = double>
BenchmarkCase<Scalar> make_kou_case() {
  BenchmarkCase<Scalar> c;
  c.id = CaseId::kou_1d;
  c.dim = 1;
  c.a = Scalar(0.25);
  c.sigma = MatrixX<Scalar>::Identity(1, 1);
  c.horizon = 1;
  c.jump_intensity = Scalar(0.8);
  c.jump_lambda1 = Scalar(0.5);
  c.jump_lambda2 = Scalar(0.6);
  c.jump_p = Scalar(0.35);
  return c;
}

namespace detail {

/// Reproducible diffusion factor I + 0.2 G with seeded standard-normal G.
template <typename Scalar>
MatrixX<Scalar> seeded_sigma(int d, std::uint64_t seed) {
  DeterministicRng rng(seed);
  MatrixX<Scalar> g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = static_cast<Scalar>(rng.normal());
  return MatrixX<Scalar>::Identity(d, d) + Scalar(0.2) * g;
}

}  // namespace detail

template <typename Scalar = double>
BenchmarkCase<Scalar> make_multidim_case(int d) {
  BenchmarkCase<Scalar> c;
  c.id = CaseId::multidim;
  c.dim = d;
  c.a = Scalar(0.25);
  c.sigma = detail::seeded_sigma<Scalar>(d, 20250800ULL + static_cast<std::uint64_t>(d));
  c.horizon = 1;
  return c;
}

template <typename Scalar = double>
BenchmarkCase<Scalar> make_stable_case(int d) {
  BenchmarkCase<Scalar> c;
  c.id = CaseId::stable_init;
  c.dim = d;
  c.a = Scalar(0.25);
  c.sigma = detail::seeded_sigma<Scalar>(d, 30250800ULL + static_cast<std::uint64_t>(d));
  c.horizon = 1;
  return c;
}

template <typename Scalar = double>
BenchmarkCase<Scalar> make_case(CaseId id, int d = 2) {
  switch (id) {
    case CaseId::gaussian_1d: return make_gaussian_case<Scalar>();
    case CaseId::kou_1d: return make_kou_case<Scalar>();
    case CaseId::multidim: return make_multidim_case<Scalar>(d);
    case CaseId::stable_init: return make_stable_case<Scalar>(d);
  }
  throw ContractViolation("make_case: unknown case id");
}

/// Fine-grid classical RK4 solution of the component-mean ODE, used as the
/// proxy truth. Off-grid values come from local cubic Hermite interpolation,
/// whose error is far below the RK4 error itself.
template <typename Scalar = double>
class OdeBenchmark {
 public:
  explicit OdeBenchmark(BenchmarkCase<Scalar> bc, long steps = 0) : case_(std::move(bc)) {
    const long n = steps > 0 ? steps : case_.ode_steps;
    h_ = case_.horizon / Scalar(n);
    values_.reserve(static_cast<std::size_t>(n) + 1);
    Scalar m = 0;  // symmetric initial laws have zero component mean
    values_.push_back(m);
    for (long i = 0; i < n; ++i) {
      const Scalar t = h_ * Scalar(i);
      const Scalar k1 = case_.mean_rhs(t, m);
      const Scalar k2 = case_.mean_rhs(t + h_ / 2, m + h_ * k1 / 2);
      const Scalar k3 = case_.mean_rhs(t + h_ / 2, m + h_ * k2 / 2);
      const Scalar k4 = case_.mean_rhs(t + h_, m + h_ * k3);
      m += h_ / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      values_.push_back(m);
    }
  }

  const BenchmarkCase<Scalar>& bench_case() const { return case_; }

  Scalar mean_at(Scalar t) const {
    const long n = static_cast<long>(values_.size()) - 1;
    long k = static_cast<long>(std::floor(static_cast<double>(t / h_) + 1e-9));
    if (k >= n) k = n - 1;
    if (k < 0) k = 0;
    const Scalar t0 = h_ * Scalar(k);
    const Scalar s = (t - t0) / h_;
    if (std::abs(s) < Scalar(1e-12)) return values_[static_cast<std::size_t>(k)];
    const Scalar y0 = values_[static_cast<std::size_t>(k)];
    const Scalar y1 = values_[static_cast<std::size_t>(k + 1)];
    const Scalar d0 = case_.mean_rhs(t0, y0) * h_;
    const Scalar d1 = case_.mean_rhs(t0 + h_, y1) * h_;
    const Scalar s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * d1;
  }

  Scalar beta_at(Scalar t) const { return case_.beta_display(t, mean_at(t)); }

 private:
  BenchmarkCase<Scalar> case_;
  Scalar h_ = 0;
  std::vector<Scalar> values_;
};

/// Component mean on a requested time grid.
template <typename Scalar = double>
std::vector<Scalar> ode_mean(const BenchmarkCase<Scalar>& bc, const std::vector<Scalar>& grid) {
  OdeBenchmark<Scalar> bench(bc);
  std::vector<Scalar> out;
  out.reserve(grid.size());
  for (const Scalar t : grid) out.push_back(bench.mean_at(t));
  return out;
}

/// Reference value of the expectation E[b-component] at time t.
template <typename Scalar = double>
Scalar benchmark_beta(const BenchmarkCase<Scalar>& bc, Scalar t) {
  return OdeBenchmark<Scalar>(bc).beta_at(t);
}

struct ExperimentRow {
  int n = 0;
  int m_iters = 0;
  double max_error = 0;
  double wall_ms = 0;
};

/// Per-n errors against the ODE benchmark with the fitted log-log slope.
struct ExperimentReport {
  std::string case_id;
  std::vector<ExperimentRow> rows;
  double slope = 0;
  double intercept = 0;
  bool failed = false;
  std::string error;
};

namespace detail {

/// Least-squares slope/intercept of log2(error) against log2(n) over the
/// first `count` rows.
inline std::pair<double, double> fit_loglog(const std::vector<ExperimentRow>& rows, std::size_t count) {
  if (count < 2) return {std::nan(""), std::nan("")};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = std::log2(static_cast<double>(rows[i].n));
    const double y = std::log2(rows[i].max_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(count);
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  return {slope, (sy - slope * sx) / k};
}

}  // namespace detail

/// Max-over-grid error of the final Picard iterate against the benchmark:
/// max_k |beta^{m,n}(t_k) - beta_ref(t_k) 1|, Euclidean norm, k = 0..n.
template <typename Scalar = double>
double benchmark_max_error(const PiecewisePair<Scalar>& pair, const OdeBenchmark<Scalar>& bench) {
  const int n = pair.steps();
  const int d = pair.dim();
  double err = 0;
  for (int k = 0; k <= n; ++k) {
    const Scalar tk = pair.horizon * Scalar(k) / Scalar(n);
    const VectorX<Scalar> ref = bench.beta_at(tk) * VectorX<Scalar>::Ones(d);
    err = std::max(err, static_cast<double>((pair.beta_at(tk) - ref).norm()));
  }
  return err;
}

/// Runs the m = ceil(log2 n) protocol over the n-list on the trigonometric
/// fast path and reports per-n max errors, timings, and the fitted slope.
/// Picard failures propagate as a failed report carrying the partial rows.
template <typename Scalar = double>
ExperimentReport error_report(const BenchmarkCase<Scalar>& bc, const std::vector<int>& n_list, int workers = 1) {
  ExperimentReport report;
  report.case_id = bc.name();
  const Problem<Scalar> problem = bc.problem();
  const OdeBenchmark<Scalar> bench(bc);
  for (const int n : n_list) {
    PicardConfig<Scalar> config;
    config.n_steps = n;
    config.workers = workers;
    const auto t0 = std::chrono::steady_clock::now();
    const PicardResult<Scalar> result = iterate(problem, config);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (result.failed) {
      report.failed = true;
      report.error = result.error;
      break;
    }
    ExperimentRow row;
    row.n = n;
    row.m_iters = picard_iterations_for(n);
    row.max_error = benchmark_max_error(result.final_pair(), bench);
    row.wall_ms = ms;
    report.rows.push_back(row);
  }
  const auto [slope, intercept] = detail::fit_loglog(report.rows, report.rows.size());
  report.slope = slope;
  report.intercept = intercept;
  return report;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double x, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, x);
  return buf;
}

}  // namespace detail

/// Error-report schema: case_id,n,m,max_error,slope_running,wall_ms with the
/// running slope fitted over the rows up to and including the current one.
/// Pass with_timings = false to zero the timing column (it is the one
/// inherently non-reproducible field).
inline void write_report_csv(const ExperimentReport& report, std::ostream& out, bool with_timings = true) {
  out << "case_id,n,m,max_error,slope_running,wall_ms\n";
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    const auto [slope, intercept] = detail::fit_loglog(report.rows, i + 1);
    (void)intercept;
    out << report.case_id << ',' << row.n << ',' << row.m_iters << ',' << detail::fmt_double(row.max_error)
        << ',' << detail::fmt_double(slope, "%.6f") << ','
        << detail::fmt_double(with_timings ? row.wall_ms : 0.0, "%.3f") << '\n';
  }
}

/// Trajectory schema: case_id,t,beta_approx,beta_benchmark,abs_err over the
/// grid nodes of the final iterate (first component; the structured cases
/// have identical components).
template <typename Scalar = double>
void write_trajectory_csv(const BenchmarkCase<Scalar>& bc, const PiecewisePair<Scalar>& pair, std::ostream& out) {
  const OdeBenchmark<Scalar> bench(bc);
  out << "case_id,t,beta_approx,beta_benchmark,abs_err\n";
  const int n = pair.steps();
  for (int k = 0; k <= n; ++k) {
    const Scalar tk = pair.horizon * Scalar(k) / Scalar(n);
    const double approx = static_cast<double>(pair.beta_at(tk)(0));
    const double ref = static_cast<double>(bench.beta_at(tk));
    out << bc.name() << ',' << detail::fmt_double(static_cast<double>(tk)) << ',' << detail::fmt_double(approx)
        << ',' << detail::fmt_double(ref) << ',' << detail::fmt_double(std::abs(approx - ref)) << '\n';
  }
}

}  // namespace mkv
