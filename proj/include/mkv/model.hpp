#pragma once

#include "mkv/quadrature.hpp"
#include "mkv/types.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mkv {

// ---------------------------------------------------------------------------
// Jump specifications
// ---------------------------------------------------------------------------

template <typename Scalar>
struct NoJumps {};

/// Compound Poisson jumps with asymmetric double-exponential (Kou) sizes.
/// Density of a single jump: p*lambda1*exp(-lambda1*y) on y>0 and
/// (1-p)*lambda2*exp(lambda2*y) on y<0; the Levy measure is intensity times
/// that density. One-dimensional by construction.
template <typename Scalar>
struct CompoundPoissonDoubleExp {
  Scalar intensity;  // jump arrival rate
  Scalar lambda1;    // decay rate of upward jumps
  Scalar lambda2;    // decay rate of downward jumps
  Scalar p;          // probability of an upward jump
};

/// User-supplied Levy exponent with declared moment bounds. The callable must
/// be pure; moment bounds stand in for measure quadrature, which is only done
/// internally for the double-exponential family.
template <typename Scalar>
struct CustomExponent {
  std::function<std::complex<Scalar>(const VectorX<Scalar>&)> exponent;
  Scalar moment_small = std::numeric_limits<Scalar>::infinity();  // integral of |y|(1 ^ |y|)
  Scalar moment_tail_q = std::numeric_limits<Scalar>::infinity(); // integral of |y|^{q+1} over |y|>=1
};

template <typename Scalar>
using JumpSpec = std::variant<NoJumps<Scalar>, CompoundPoissonDoubleExp<Scalar>, CustomExponent<Scalar>>;

/// Diffusion matrix plus jump specification of the driving Levy process.
template <typename Scalar>
struct LevyTriplet {
  MatrixX<Scalar> sigma;          // d x q' diffusion factor
  JumpSpec<Scalar> jump = NoJumps<Scalar>{};

  int dim() const { return static_cast<int>(sigma.rows()); }
  MatrixX<Scalar> theta() const { return sigma * sigma.transpose(); }

  bool has_jumps() const { return !std::holds_alternative<NoJumps<Scalar>>(jump); }
};

/// Characteristic exponent of a single Kou jump measure: the closed form of
/// intensity * integral of (exp(i xi y) - 1) against the double-exponential
/// density. No small-jump compensation is used for this finite-activity family.
template <typename Scalar>
std::complex<Scalar> double_exp_exponent(const CompoundPoissonDoubleExp<Scalar>& j, Scalar xi) {
  const std::complex<Scalar> i(0, 1);
  return i * j.intensity * xi *
         (j.p / (j.lambda1 - i * xi) - (Scalar(1) - j.p) / (j.lambda2 + i * xi));
}

/// m-th derivative of the exponent above, m >= 1. Equals i^m times the m-th
/// moment transform of the jump measure.
template <typename Scalar>
std::complex<Scalar> double_exp_exponent_derivative(const CompoundPoissonDoubleExp<Scalar>& j, int m, Scalar xi) {
  if (m == 0) return double_exp_exponent(j, xi);
  const std::complex<Scalar> i(0, 1);
  Scalar fact = 1;
  for (int k = 2; k <= m; ++k) fact *= Scalar(k);
  const std::complex<Scalar> up = j.p * j.lambda1 * std::pow(i, m) *
                                  std::pow(j.lambda1 - i * xi, Scalar(-(m + 1)));
  const std::complex<Scalar> down = (Scalar(1) - j.p) * j.lambda2 * std::pow(-i, m) *
                                    std::pow(j.lambda2 + i * xi, Scalar(-(m + 1)));
  return j.intensity * fact * (up + down);
}

/// Levy exponent f(x) of the jump part. Zero measure gives 0; the Kou family
/// uses its closed form; custom specs delegate to the user callable.
template <typename Scalar>
std::complex<Scalar> levy_exponent(const LevyTriplet<Scalar>& triplet, const VectorX<Scalar>& x) {
  return std::visit(
      [&](const auto& j) -> std::complex<Scalar> {
        using J = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<J, NoJumps<Scalar>>) {
          return {0, 0};
        } else if constexpr (std::is_same_v<J, CompoundPoissonDoubleExp<Scalar>>) {
          return double_exp_exponent(j, x(0));
        } else {
          return j.exponent(x);
        }
      },
      triplet.jump);
}

namespace detail {

/// integral of |y|(1 ^ |y|) against the Kou Levy measure.
template <typename Scalar>
Scalar double_exp_moment_small(const CompoundPoissonDoubleExp<Scalar>& j) {
  const auto one_side = [](double rate) {
    const double cut = 80.0 / rate;
    return adaptive_simpson([rate](double y) { return y * std::min(1.0, y) * rate * std::exp(-rate * y); }, 0.0,
                            std::max(1.0, cut), 1e-13);
  };
  return static_cast<Scalar>(j.intensity *
                             (j.p * one_side(static_cast<double>(j.lambda1)) +
                              (1.0 - static_cast<double>(j.p)) * one_side(static_cast<double>(j.lambda2))));
}

/// integral of |y|^{q+1} over |y| >= 1 against the Kou Levy measure.
template <typename Scalar>
Scalar double_exp_moment_tail(const CompoundPoissonDoubleExp<Scalar>& j, int q) {
  const auto one_side = [q](double rate) {
    const double cut = 1.0 + (q + 80.0) / rate;
    return adaptive_simpson(
        [rate, q](double y) { return std::pow(y, q + 1) * rate * std::exp(-rate * y); }, 1.0, cut, 1e-13);
  };
  return static_cast<Scalar>(j.intensity *
                             (j.p * one_side(static_cast<double>(j.lambda1)) +
                              (1.0 - static_cast<double>(j.p)) * one_side(static_cast<double>(j.lambda2))));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Initial law
// ---------------------------------------------------------------------------

/// Initial datum described through its characteristic function. Optional
/// axis-partial derivatives feed the damped Fourier path; absolute moments
/// are declared values used by assumption checks (infinity is allowed).
template <typename Scalar>
struct InitialLaw {
  int dim = 1;
  std::function<std::complex<Scalar>(const VectorX<Scalar>&)> cf;
  // (axis j, order m, eta) -> d^m/d eta_j^m of cf at eta; empty when unavailable
  std::function<std::complex<Scalar>(int, int, const VectorX<Scalar>&)> cf_derivs;
  std::vector<Scalar> abs_moments;  // declared E|Y|^k for k = 1..size
  std::string family = "custom";

  Scalar abs_moment(int k) const {
    if (k <= 0) return Scalar(1);
    if (static_cast<std::size_t>(k) <= abs_moments.size()) return abs_moments[static_cast<std::size_t>(k - 1)];
    return std::numeric_limits<Scalar>::infinity();
  }
  bool has_derivatives() const { return static_cast<bool>(cf_derivs); }
};

namespace detail {

/// m-th derivative of x -> 1/(1+x^2), via the partial-fraction split
/// 1/(1+x^2) = (1/2i) [ (x-i)^{-1} - (x+i)^{-1} ].
template <typename Scalar>
std::complex<Scalar> laplace_cf_derivative(int m, Scalar x) {
  const std::complex<Scalar> i(0, 1);
  Scalar fact = 1;
  for (int k = 2; k <= m; ++k) fact *= Scalar(k);
  const Scalar sign = (m % 2 == 0) ? Scalar(1) : Scalar(-1);
  const std::complex<Scalar> a = std::pow(std::complex<Scalar>(x, -1), Scalar(-(m + 1)));
  const std::complex<Scalar> b = std::pow(std::complex<Scalar>(x, 1), Scalar(-(m + 1)));
  return sign * fact / (Scalar(2) * i) * (a - b);
}

}  // namespace detail

/// Standard Laplace law on R (density exp(-|y|)/2); cf(eta) = 1/(1+eta^2),
/// absolute moments E|Y|^k = k!.
template <typename Scalar = double>
InitialLaw<Scalar> laplace_initial_law() {
  InitialLaw<Scalar> law;
  law.dim = 1;
  law.family = "laplace";
  law.cf = [](const VectorX<Scalar>& eta) {
    return std::complex<Scalar>(Scalar(1) / (Scalar(1) + eta(0) * eta(0)), 0);
  };
  law.cf_derivs = [](int, int m, const VectorX<Scalar>& eta) {
    return detail::laplace_cf_derivative<Scalar>(m, eta(0));
  };
  Scalar fact = 1;
  for (int k = 1; k <= 9; ++k) {
    fact *= Scalar(k);
    law.abs_moments.push_back(fact);
  }
  return law;
}

/// Product of d independent standard Laplace coordinates. Declared absolute
/// moments are the L1-norm bounds E[(sum |Y_i|)^k] = (d+k-1)!/(d-1)!.
template <typename Scalar = double>
InitialLaw<Scalar> product_laplace_initial_law(int d) {
  InitialLaw<Scalar> law;
  law.dim = d;
  law.family = "product_laplace";
  law.cf = [](const VectorX<Scalar>& eta) {
    Scalar re = 1;
    for (Eigen::Index i = 0; i < eta.size(); ++i) re /= (Scalar(1) + eta(i) * eta(i));
    return std::complex<Scalar>(re, 0);
  };
  law.cf_derivs = [](int j, int m, const VectorX<Scalar>& eta) {
    Scalar rest = 1;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      if (i != j) rest /= (Scalar(1) + eta(i) * eta(i));
    return rest * detail::laplace_cf_derivative<Scalar>(m, eta(j));
  };
  // E[(|Y_1|+...+|Y_d|)^k]: the L1 norm is Gamma(d,1)-distributed.
  Scalar mom = 1;
  for (int k = 1; k <= 9; ++k) {
    mom *= Scalar(d + k - 1);
    law.abs_moments.push_back(mom);
  }
  return law;
}

/// Multivariate 1-stable law with independent symmetric components, unit
/// scale, and unit-vector shift: cf(eta) = exp(i <eta,1> - sum |eta_k|).
/// Has no finite absolute moments and no derivatives on the axes.
template <typename Scalar = double>
InitialLaw<Scalar> stable_one_initial_law(int d) {
  InitialLaw<Scalar> law;
  law.dim = d;
  law.family = "stable_one";
  law.cf = [](const VectorX<Scalar>& eta) {
    Scalar re = 0, ab = 0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      re += eta(i);
      ab += std::abs(eta(i));
    }
    return std::exp(std::complex<Scalar>(-ab, re));
  };
  law.abs_moments.assign(9, std::numeric_limits<Scalar>::infinity());
  return law;
}

/// Gaussian law N(mean, cov). Axis derivatives come from the generating
/// identity d^m/ds^m exp(B s + C s^2)|_0 = m! sum_k B^{m-2k} C^k / ((m-2k)! k!).
template <typename Scalar = double>
InitialLaw<Scalar> gaussian_initial_law(const VectorX<Scalar>& mean, const MatrixX<Scalar>& cov) {
  InitialLaw<Scalar> law;
  const int d = static_cast<int>(mean.size());
  law.dim = d;
  law.family = "gaussian";
  law.cf = [mean, cov](const VectorX<Scalar>& eta) {
    return std::exp(std::complex<Scalar>(-Scalar(0.5) * eta.dot(cov * eta), mean.dot(eta)));
  };
  law.cf_derivs = [mean, cov](int j, int m, const VectorX<Scalar>& eta) {
    const std::complex<Scalar> base =
        std::exp(std::complex<Scalar>(-Scalar(0.5) * eta.dot(cov * eta), mean.dot(eta)));
    if (m == 0) return base;
    const std::complex<Scalar> b(-(cov.row(j) * eta).value(), mean(j));
    const std::complex<Scalar> c(-Scalar(0.5) * cov(j, j), 0);
    std::complex<Scalar> sum = 0;
    Scalar mfact = 1;
    for (int k = 2; k <= m; ++k) mfact *= Scalar(k);
    for (int k = 0; 2 * k <= m; ++k) {
      Scalar denom = 1;
      for (int t = 2; t <= m - 2 * k; ++t) denom *= Scalar(t);
      for (int t = 2; t <= k; ++t) denom *= Scalar(t);
      sum += std::pow(b, Scalar(m - 2 * k)) * std::pow(c, Scalar(k)) / denom;
    }
    return base * mfact * sum;
  };
  // E|Y|^k <= 2^{k-1} (|mean|^k + E|Z|^k), chi-moment bound with lmax(cov)
  const Scalar mu = mean.norm();
  const Scalar lmax = (d > 0) ? Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>>(cov).eigenvalues().maxCoeff()
                              : Scalar(0);
  for (int k = 1; k <= 9; ++k) {
    const Scalar chi = std::pow(Scalar(2) * lmax, Scalar(k) / Scalar(2)) *
                       static_cast<Scalar>(std::tgamma((d + k) / 2.0) / std::tgamma(d / 2.0));
    law.abs_moments.push_back(std::pow(Scalar(2), Scalar(k - 1)) * (std::pow(mu, Scalar(k)) + chi));
  }
  return law;
}

/// Deterministic initial point x0.
template <typename Scalar = double>
InitialLaw<Scalar> point_mass_initial_law(const VectorX<Scalar>& x0) {
  InitialLaw<Scalar> law;
  law.dim = static_cast<int>(x0.size());
  law.family = "point_mass";
  law.cf = [x0](const VectorX<Scalar>& eta) { return std::exp(std::complex<Scalar>(0, x0.dot(eta))); };
  law.cf_derivs = [x0](int j, int m, const VectorX<Scalar>& eta) {
    return std::pow(std::complex<Scalar>(0, x0(j)), Scalar(m)) * std::exp(std::complex<Scalar>(0, x0.dot(eta)));
  };
  for (int k = 1; k <= 9; ++k) law.abs_moments.push_back(std::pow(x0.norm(), Scalar(k)));
  return law;
}

// ---------------------------------------------------------------------------
// Drift coefficients
// ---------------------------------------------------------------------------

/// Structured fast-path drift: a(x) = A constant, b(x) = cos(<w,x>) * v.
/// The map evaluation then only needs the characteristic function at +-w.
template <typename Scalar>
struct ConstantATrigB {
  MatrixX<Scalar> A;
  VectorX<Scalar> w;
  VectorX<Scalar> v;
};

/// A Dirac mass in the spectral representation of a coefficient; contributes
/// weight * kernel(location) to the inversion integral, no quadrature needed.
template <typename Scalar>
struct MatrixAtom {
  VectorX<Scalar> location;
  MatrixX<Scalar> weight;
};
template <typename Scalar>
struct VectorAtom {
  VectorX<Scalar> location;
  VectorX<Scalar> weight;
};

/// Drift given through spectral data: callables for the Fourier transforms of
/// a and b (either may be empty), optional atomic parts, and, when damped
/// evaluation is wanted, transforms of the damped coefficients. Declared sup
/// norms bound |a| and |b|; they drive the invariant ball and radius choice.
template <typename Scalar>
struct SpectralPair {
  std::function<MatrixXc<Scalar>(const VectorX<Scalar>&)> a_hat;
  std::function<VectorXc<Scalar>(const VectorX<Scalar>&)> b_hat;
  std::vector<MatrixAtom<Scalar>> a_atoms;
  std::vector<VectorAtom<Scalar>> b_atoms;
  bool damped = false;
  std::function<MatrixXc<Scalar>(const VectorX<Scalar>&)> a_hat_damped;
  std::function<VectorXc<Scalar>(const VectorX<Scalar>&)> b_hat_damped;
  Scalar sup_norm_a = 0;
  Scalar sup_norm_b = 0;
};

template <typename Scalar>
using DriftSpec = std::variant<ConstantATrigB<Scalar>, SpectralPair<Scalar>>;

template <typename Scalar>
Scalar drift_sup_norm_a(const DriftSpec<Scalar>& drift) {
  return std::visit(
      [](const auto& d) -> Scalar {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, ConstantATrigB<Scalar>>)
          return spectral_norm<Scalar>(d.A);
        else
          return d.sup_norm_a;
      },
      drift);
}

template <typename Scalar>
Scalar drift_sup_norm_b(const DriftSpec<Scalar>& drift) {
  return std::visit(
      [](const auto& d) -> Scalar {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, ConstantATrigB<Scalar>>)
          return d.v.norm();
        else
          return d.sup_norm_b;
      },
      drift);
}

// ---------------------------------------------------------------------------
// Problem bundle and assumption checks
// ---------------------------------------------------------------------------

template <typename Scalar>
struct Problem {
  LevyTriplet<Scalar> levy;
  InitialLaw<Scalar> law;
  DriftSpec<Scalar> drift;
  Scalar horizon = 1;

  int dim() const { return levy.dim(); }
  Scalar ball_radius() const { return drift_sup_norm_a(drift) + drift_sup_norm_b(drift); }
};

/// Smallest positive even integer >= d+1; the order of the damping operator.
inline int damping_order(int d) { return 2 * ((d + 2) / 2); }

enum class CheckStatus { pass, fail, not_checkable };

struct AssumptionCheck {
  std::string name;
  CheckStatus status;
  bool hard;  // hard failures stop a run; soft ones only warn
  std::string detail;
};

struct ValidationReport {
  int q = 0;
  std::vector<AssumptionCheck> checks;

  bool ok() const {
    for (const auto& c : checks)
      if (c.hard && c.status == CheckStatus::fail) return false;
    return true;
  }
  bool clean() const {
    for (const auto& c : checks)
      if (c.status == CheckStatus::fail) return false;
    return true;
  }
  std::vector<AssumptionCheck> failures() const {
    std::vector<AssumptionCheck> out;
    for (const auto& c : checks)
      if (c.status == CheckStatus::fail) out.push_back(c);
    return out;
  }
};

/// Checks the standing assumptions on (triplet, law, drift, horizon) and
/// returns a structured report; never throws on bad input. Moment failures
/// are soft: the stable-law experiments run through them deliberately.
template <typename Scalar>
ValidationReport validate_problem(const Problem<Scalar>& problem) {
  ValidationReport report;
  const int d = problem.dim();
  report.q = damping_order(d);
  auto add = [&report](std::string name, CheckStatus st, bool hard, std::string detail) {
    report.checks.push_back({std::move(name), st, hard, std::move(detail)});
  };

  add("horizon_positive", problem.horizon > Scalar(0) ? CheckStatus::pass : CheckStatus::fail, true,
      "T = " + std::to_string(static_cast<double>(problem.horizon)));

  // dimensions consistent across triplet, law, drift
  bool dims_ok = problem.law.dim == d;
  std::visit(
      [&](const auto& dr) {
        using D = std::decay_t<decltype(dr)>;
        if constexpr (std::is_same_v<D, ConstantATrigB<Scalar>>)
          dims_ok = dims_ok && dr.A.rows() == d && dr.A.cols() == d && dr.w.size() == d && dr.v.size() == d;
      },
      problem.drift);
  if (std::holds_alternative<CompoundPoissonDoubleExp<Scalar>>(problem.levy.jump)) dims_ok = dims_ok && d == 1;
  add("dimensions_consistent", dims_ok ? CheckStatus::pass : CheckStatus::fail, true,
      "d = " + std::to_string(d));

  // uniform ellipticity of theta = sigma sigma^T
  const Scalar lmin = min_eigenvalue_sym<Scalar>(problem.levy.theta());
  add("ellipticity", lmin > Scalar(0) ? CheckStatus::pass : CheckStatus::fail, false,
      "lambda_min(theta) = " + std::to_string(static_cast<double>(lmin)));

  // boundedness of the coefficients
  const bool structured = std::holds_alternative<ConstantATrigB<Scalar>>(problem.drift);
  add("coefficients_bounded", CheckStatus::pass, false,
      structured ? "|a| = " + std::to_string(static_cast<double>(drift_sup_norm_a(problem.drift))) +
                       ", |b| = " + std::to_string(static_cast<double>(drift_sup_norm_b(problem.drift)))
                 : "declared sup norms");

  // first moment of the jump measure
  Scalar n_small = 0;
  Scalar n_tail = 0;
  bool jump_declared = true;
  std::visit(
      [&](const auto& j) {
        using J = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<J, CompoundPoissonDoubleExp<Scalar>>) {
          n_small = detail::double_exp_moment_small(j);
          n_tail = detail::double_exp_moment_tail(j, report.q);
        } else if constexpr (std::is_same_v<J, CustomExponent<Scalar>>) {
          n_small = j.moment_small;
          n_tail = j.moment_tail_q;
          jump_declared = false;
        }
      },
      problem.levy.jump);
  const auto moment_status = [&](Scalar value) {
    if (std::isfinite(static_cast<double>(value))) return CheckStatus::pass;
    // a custom exponent without declared bounds is unverifiable, not wrong
    return jump_declared ? CheckStatus::fail : CheckStatus::not_checkable;
  };
  add("jump_first_moment", moment_status(n_small), false,
      "n_bar = " + std::to_string(static_cast<double>(n_small)) + (jump_declared ? "" : " (declared)"));

  // first absolute moment of the initial law
  const Scalar m1 = problem.law.abs_moment(1);
  add("initial_first_moment", std::isfinite(static_cast<double>(m1)) ? CheckStatus::pass : CheckStatus::fail,
      false, "E|Y| = " + std::to_string(static_cast<double>(m1)));

  // damped path needs higher moments on both the measure and the law
  const bool damped = std::holds_alternative<SpectralPair<Scalar>>(problem.drift) &&
                      std::get<SpectralPair<Scalar>>(problem.drift).damped;
  if (damped) {
    const Scalar mq = problem.law.abs_moment(report.q + 1);
    add("initial_moment_q1", std::isfinite(static_cast<double>(mq)) ? CheckStatus::pass : CheckStatus::fail,
        false, "E|Y|^" + std::to_string(report.q + 1) + " = " + std::to_string(static_cast<double>(mq)));
    add("jump_moment_q1", moment_status(n_tail), false,
        "n_bar_q = " + std::to_string(static_cast<double>(n_tail)));
  }

  return report;
}

}  // namespace mkv
