#pragma once

#include "mkv/psi_map.hpp"

#include <chrono>
#include <cmath>
#include <mutex>
#include <string>
#include <vector>

namespace mkv {

/// Settings for the discretized Picard iteration. max_iters = 0 selects the
/// default rule m = ceil(log2 n). The initial pair must lie in the invariant
/// ball, max(|alpha0|, |beta0|) <= |a| + |b|.
template <typename Scalar>
struct PicardConfig {
  int n_steps = 16;
  int max_iters = 0;
  MatrixX<Scalar> alpha0;  // empty -> zero
  VectorX<Scalar> beta0;   // empty -> zero
  Scalar lambda = 0;       // weight of the discrete norm used for increments
  enum class Path { trig, fourier, damped } path = Path::trig;
  QuadratureSpec<Scalar> quad{};
  DampingSpec<Scalar> damp{};
  Scalar stop_tol = 0;  // 0 -> run the full iteration count
  int workers = 1;      // 0 -> hardware concurrency
};

/// Iterates and diagnostics of one Picard run. iterates[0] is the constant
/// initializer; increments[m-1] is the weighted distance between sweep m and
/// its predecessor. A failed sweep leaves the partial history in place.
template <typename Scalar>
struct PicardResult {
  std::vector<PiecewisePair<Scalar>> iterates;
  std::vector<Scalar> increments;
  std::vector<double> wall_ms;
  bool stopped_early = false;
  bool failed = false;
  std::string error;

  const PiecewisePair<Scalar>& final_pair() const { return iterates.back(); }
};

/// Number of Picard sweeps prescribed for n time steps: ceil(log2 n).
inline int picard_iterations_for(int n) {
  int m = static_cast<int>(std::ceil(std::log2(static_cast<double>(n)) - 1e-12));
  return std::max(m, 1);
}

/// Right-endpoint sampling of (alpha_t, beta_t) onto the uniform n-grid.
template <typename Scalar, typename AlphaFn, typename BetaFn>
PiecewisePair<Scalar> discretize(AlphaFn&& alpha_fn, BetaFn&& beta_fn, Scalar T, int n) {
  if (n < 1) throw ContractViolation("discretize: need at least one step");
  PiecewisePair<Scalar> out;
  out.horizon = T;
  out.alpha.reserve(static_cast<std::size_t>(n));
  out.beta.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const Scalar ti = T * Scalar(i) / Scalar(n);
    out.alpha.push_back(alpha_fn(ti));
    out.beta.push_back(beta_fn(ti));
  }
  return out;
}

/// Wraps already-sampled right-endpoint values.
template <typename Scalar>
PiecewisePair<Scalar> discretize(std::vector<MatrixX<Scalar>> alpha_vals, std::vector<VectorX<Scalar>> beta_vals,
                                 Scalar T) {
  if (alpha_vals.empty() || alpha_vals.size() != beta_vals.size())
    throw ContractViolation("discretize: value arrays empty or mismatched");
  PiecewisePair<Scalar> out;
  out.horizon = T;
  out.alpha = std::move(alpha_vals);
  out.beta = std::move(beta_vals);
  return out;
}

/// Discrete weighted distance max_i e^{-lambda t_i} max(|dA_i|, |db_i|).
/// lambda = 0 is the plain sup norm over the grid.
template <typename Scalar>
Scalar weighted_norm(const PiecewisePair<Scalar>& a, const PiecewisePair<Scalar>& b, Scalar lambda) {
  if (a.steps() != b.steps() || std::abs(a.horizon - b.horizon) > Scalar(1e-12) * std::max<Scalar>(1, a.horizon))
    throw ContractViolation("weighted_norm: pairs live on different grids");
  Scalar out = 0;
  const Scalar h = a.dt();
  for (int i = 1; i <= a.steps(); ++i) {
    const Scalar w = std::exp(-lambda * h * Scalar(i));
    const Scalar da = spectral_norm<Scalar>(
        MatrixX<Scalar>(a.alpha[static_cast<std::size_t>(i - 1)] - b.alpha[static_cast<std::size_t>(i - 1)]));
    const Scalar db = (a.beta[static_cast<std::size_t>(i - 1)] - b.beta[static_cast<std::size_t>(i - 1)]).norm();
    out = std::max(out, w * std::max(da, db));
  }
  return out;
}

namespace detail {

template <typename Scalar>
PsiValue<Scalar> eval_psi(const Problem<Scalar>& problem, const CharComponents<Scalar>& comps, Scalar t,
                          const PicardConfig<Scalar>& config) {
  switch (config.path) {
    case PicardConfig<Scalar>::Path::trig:
      return psi_trig(problem, comps, t);
    case PicardConfig<Scalar>::Path::fourier:
      return psi_fourier(problem, comps, t, config.quad);
    case PicardConfig<Scalar>::Path::damped:
      return psi_damped(problem, comps, t, config.quad, config.damp);
  }
  throw ContractViolation("eval_psi: unknown path");
}

}  // namespace detail

/// Runs the discretized Picard iteration gamma^m = (Psi(gamma^{m-1}))^{(n)}:
/// each sweep evaluates the map at the n grid nodes against the previous
/// step function and holds the samples piecewise constant. Node evaluations
/// within a sweep are independent and run on config.workers threads; sweeps
/// are strictly sequential. A map failure stops the run and returns the
/// partial history with failed = true.
template <typename Scalar>
PicardResult<Scalar> iterate(const Problem<Scalar>& problem, const PicardConfig<Scalar>& config) {
  const int d = problem.dim();
  const int n = config.n_steps;
  if (n < 1) throw ContractViolation("iterate: need at least one time step");
  MatrixX<Scalar> a0 = config.alpha0.size() ? config.alpha0 : MatrixX<Scalar>::Zero(d, d);
  VectorX<Scalar> b0 = config.beta0.size() ? config.beta0 : VectorX<Scalar>::Zero(d);
  const Scalar ball = problem.ball_radius();
  if (std::max(spectral_norm<Scalar>(a0), b0.norm()) > ball * (Scalar(1) + Scalar(1e-12)))
    throw ContractViolation("iterate: initializer outside the invariant ball");

  const int iters = config.max_iters > 0 ? config.max_iters : picard_iterations_for(n);
  PicardResult<Scalar> result;
  result.iterates.push_back(PiecewisePair<Scalar>::constant(a0, b0, problem.horizon, n));

  for (int m = 1; m <= iters; ++m) {
    const auto t0 = std::chrono::steady_clock::now();
    const PiecewisePair<Scalar>& prev = result.iterates.back();
    PiecewisePair<Scalar> next;
    next.horizon = problem.horizon;
    next.alpha.assign(static_cast<std::size_t>(n), MatrixX<Scalar>());
    next.beta.assign(static_cast<std::size_t>(n), VectorX<Scalar>());
    std::string sweep_error;
    std::mutex error_mutex;
    try {
      const CharComponents<Scalar> comps(prev, problem.levy, problem.law);
      parallel_for_index(static_cast<std::size_t>(n), config.workers, [&](std::size_t i) {
        try {
          const Scalar ti = problem.horizon * Scalar(i + 1) / Scalar(n);
          const PsiValue<Scalar> value = detail::eval_psi(problem, comps, ti, config);
          next.alpha[i] = value.alpha;
          next.beta[i] = value.beta;
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (sweep_error.empty()) sweep_error = e.what();
        }
      });
    } catch (const std::exception& e) {
      sweep_error = e.what();
    }
    if (!sweep_error.empty()) {
      result.failed = true;
      result.error = sweep_error;
      return result;
    }
    const Scalar inc = weighted_norm(next, prev, config.lambda);
    result.iterates.push_back(std::move(next));
    result.increments.push_back(inc);
    result.wall_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    if (config.stop_tol > 0 && inc < config.stop_tol) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace mkv
