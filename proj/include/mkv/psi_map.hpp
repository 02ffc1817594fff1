#pragma once

#include "mkv/linear_flow.hpp"
#include "mkv/model.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace mkv {

/// Tensor-product quadrature settings for the frequency-domain integrals.
template <typename Scalar>
struct QuadratureSpec {
  Scalar radius = 10;        // truncation half-width per axis
  int nodes_per_axis = 65;
  enum class Rule { trapezoid, gauss_legendre } rule = Rule::gauss_legendre;
  long long node_budget = 1LL << 24;
};

/// Damping-operator settings. The order q is fixed by the dimension; only the
/// derivative strategy is configurable.
template <typename Scalar>
struct DampingSpec {
  enum class Mode { analytic_leibniz, finite_difference } mode = Mode::analytic_leibniz;
  Scalar fd_step = Scalar(1e-2);
};

/// One evaluation of the fixed-point map: Psi_1 (matrix), Psi_2 (vector), and
/// the largest imaginary part discarded when taking real parts. Residues
/// above 1e-8 are flagged; they indicate broken Hermitian symmetry rather
/// than roundoff.
template <typename Scalar>
struct PsiValue {
  MatrixX<Scalar> alpha;
  VectorX<Scalar> beta;
  Scalar imag_residue = 0;
  bool flagged = false;

  void absorb_residue(Scalar r) {
    imag_residue = std::max(imag_residue, r);
    if (imag_residue > Scalar(1e-8)) flagged = true;
  }
};

// ---------------------------------------------------------------------------
// Trigonometric fast path
// ---------------------------------------------------------------------------

/// Psi for the structured drift a = A, b(x) = cos(<w,x>) v: Psi_1 = A exactly
/// and Psi_2 = v Re cf(t, w), since (cf(w) + cf(-w))/2 = Re cf(w).
template <typename Scalar>
PsiValue<Scalar> psi_trig(const Problem<Scalar>& problem, const CharComponents<Scalar>& comps, Scalar t) {
  const auto* drift = std::get_if<ConstantATrigB<Scalar>>(&problem.drift);
  if (!drift) throw ContractViolation("psi_trig: drift is not the constant/trigonometric form");
  PsiValue<Scalar> out;
  out.alpha = drift->A;
  out.beta = drift->v * comps.cf(t, drift->w).real();
  return out;
}

template <typename Scalar>
PsiValue<Scalar> psi_trig(const Problem<Scalar>& problem, const PiecewisePair<Scalar>& pair, Scalar t) {
  CharComponents<Scalar> comps(pair, problem.levy, problem.law);
  return psi_trig(problem, comps, t);
}

// ---------------------------------------------------------------------------
// Plain Fourier representation
// ---------------------------------------------------------------------------

namespace detail {

/// Per-axis rule for the truncated frequency integral on [-R, R].
template <typename Scalar>
QuadRule1d<Scalar> axis_rule(const QuadratureSpec<Scalar>& quad) {
  QuadRule1d<Scalar> base = (quad.rule == QuadratureSpec<Scalar>::Rule::gauss_legendre)
                                ? gauss_legendre<Scalar>(quad.nodes_per_axis)
                                : trapezoid<Scalar>(quad.nodes_per_axis);
  return base.mapped_to(-quad.radius, quad.radius);
}

/// Tensor-grid sweep: calls body(eta, weight) for every node of the product
/// rule. Row-major odometer order, so the node order is fixed and results are
/// reproducible.
template <typename Scalar, typename Body>
void tensor_sweep(const QuadRule1d<Scalar>& rule, int d, Body&& body) {
  const int n = static_cast<int>(rule.nodes.size());
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  VectorX<Scalar> eta(d);
  for (;;) {
    Scalar w = 1;
    for (int a = 0; a < d; ++a) {
      eta(a) = rule.nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
      w *= rule.weights[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
    }
    body(eta, w);
    int a = d - 1;
    while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == n) {
      idx[static_cast<std::size_t>(a)] = 0;
      --a;
    }
    if (a < 0) break;
  }
}

/// Inversion kernel cf(t, -eta) with the time-t components precomputed.
template <typename Scalar>
struct FourierKernel {
  const CharComponents<Scalar>* comps;
  Scalar t;
  MatrixX<Scalar> c;
  VectorX<Scalar> m;
  MatrixX<Scalar> p;

  FourierKernel(const CharComponents<Scalar>& cc, Scalar time)
      : comps(&cc), t(time), c(cc.cov(time)), m(cc.mean_at(time)), p(cc.phi0(time)) {}

  std::complex<Scalar> operator()(const VectorX<Scalar>& eta) const {
    const std::complex<Scalar> expo =
        std::complex<Scalar>(-Scalar(0.5) * eta.dot(c * eta), -m.dot(eta)) + comps->jump_exp(t, VectorX<Scalar>(-eta));
    return std::exp(expo) * comps->law().cf(VectorX<Scalar>(-p.transpose() * eta));
  }
};

template <typename Scalar>
void check_quadrature_budget(const QuadratureSpec<Scalar>& quad, int d) {
  if (d > 3) throw ConfigurationError("frequency quadrature supports d <= 3; use the trigonometric path");
  long double total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<long double>(quad.nodes_per_axis);
  if (total > static_cast<long double>(quad.node_budget))
    throw NumericalError("frequency quadrature node budget exceeded");
}

}  // namespace detail

/// Psi through the plain Fourier representation: (2 pi)^{-d} integral of the
/// coefficient transform against the kernel cf(t, -eta), truncated to
/// [-R, R]^d. Atomic spectral parts are added exactly as weight * kernel(loc).
template <typename Scalar>
PsiValue<Scalar> psi_fourier(const Problem<Scalar>& problem, const CharComponents<Scalar>& comps, Scalar t,
                             const QuadratureSpec<Scalar>& quad) {
  const auto* drift = std::get_if<SpectralPair<Scalar>>(&problem.drift);
  if (!drift) throw ContractViolation("psi_fourier: drift carries no spectral data");
  if (drift->damped) throw ContractViolation("psi_fourier: damped drift must use psi_damped");
  const int d = problem.dim();
  const bool needs_quadrature = static_cast<bool>(drift->a_hat) || static_cast<bool>(drift->b_hat);
  if (needs_quadrature && t <= 0)
    throw ContractViolation("psi_fourier: t must be positive (kernel has no decay at t = 0)");
  if (needs_quadrature) detail::check_quadrature_budget(quad, d);

  MatrixXc<Scalar> acc_a = MatrixXc<Scalar>::Zero(d, d);
  VectorXc<Scalar> acc_b = VectorXc<Scalar>::Zero(d);
  const detail::FourierKernel<Scalar> kernel(comps, t);

  if (needs_quadrature) {
    const auto rule = detail::axis_rule(quad);
    const Scalar two_pi = Scalar(2) * Scalar(3.141592653589793238462643383279502884L);
    const Scalar norm = std::pow(two_pi, Scalar(-d));
    std::vector<MatrixXc<Scalar>> row_a;
    std::vector<VectorXc<Scalar>> row_b;
    detail::tensor_sweep<Scalar>(rule, d, [&](const VectorX<Scalar>& eta, Scalar w) {
      const std::complex<Scalar> k = kernel(eta) * (w * norm);
      if (drift->a_hat) row_a.push_back(drift->a_hat(eta) * k);
      if (drift->b_hat) row_b.push_back(drift->b_hat(eta) * k);
      if (row_a.size() == rule.nodes.size()) {
        acc_a += pairwise_sum(row_a);
        row_a.clear();
      }
      if (row_b.size() == rule.nodes.size()) {
        acc_b += pairwise_sum(row_b);
        row_b.clear();
      }
    });
    if (!row_a.empty()) acc_a += pairwise_sum(row_a);
    if (!row_b.empty()) acc_b += pairwise_sum(row_b);
  }
  for (const auto& atom : drift->a_atoms) acc_a += atom.weight.template cast<std::complex<Scalar>>() * kernel(atom.location);
  for (const auto& atom : drift->b_atoms) acc_b += atom.weight.template cast<std::complex<Scalar>>() * kernel(atom.location);

  PsiValue<Scalar> out;
  out.alpha = acc_a.real();
  out.beta = acc_b.real();
  out.absorb_residue(std::max(acc_a.imag().cwiseAbs().maxCoeff(), acc_b.imag().cwiseAbs().maxCoeff()));
  return out;
}

template <typename Scalar>
PsiValue<Scalar> psi_fourier(const Problem<Scalar>& problem, const PiecewisePair<Scalar>& pair, Scalar t,
                             const QuadratureSpec<Scalar>& quad) {
  CharComponents<Scalar> comps(pair, problem.levy, problem.law);
  return psi_fourier(problem, comps, t, quad);
}

// ---------------------------------------------------------------------------
// Damped representation
// ---------------------------------------------------------------------------

namespace detail {

/// Applies the damping operator 1 + i^q sum_j d^q/d eta_j^q to the kernel
/// G(eta) = exp(g(eta)) h(eta), where g collects the Gaussian, mean and jump
/// exponents and h is the initial-law factor.
template <typename Scalar>
class DampedKernel {
 public:
  DampedKernel(const CharComponents<Scalar>& comps, Scalar t, int q, const DampingSpec<Scalar>& damp)
      : comps_(&comps), kernel_(comps, t), t_(t), q_(q), damp_(damp) {
    const int d = comps.dim();
    iq_ = (q_ / 2) % 2 == 0 ? Scalar(1) : Scalar(-1);  // i^q for even q
    if (damp_.mode == DampingSpec<Scalar>::Mode::analytic_leibniz) {
      if (!comps.law().has_derivatives())
        throw ConfigurationError("damped analytic mode: initial law lacks derivative data");
      if (!comps.jump_derivative_supported())
        throw ConfigurationError("damped analytic mode: jump exponent derivatives unavailable");
      diagonal_flow_ = d == 1 || is_diagonal<Scalar>(kernel_.p, Scalar(1e-13) * kernel_.p.norm());
      if (!diagonal_flow_)
        throw ConfigurationError(
            "damped analytic mode: axis derivatives of the initial-law factor need a diagonal flow; "
            "use finite differences");
    }
  }

  /// (L G)(eta).
  std::complex<Scalar> operator()(const VectorX<Scalar>& eta) const {
    if (damp_.mode == DampingSpec<Scalar>::Mode::finite_difference) return fd_value(eta);
    return analytic_value(eta);
  }

 private:
  std::complex<Scalar> fd_value(const VectorX<Scalar>& eta) const {
    std::complex<Scalar> out = kernel_(eta);
    for (int j = 0; j < comps_->dim(); ++j) {
      const std::complex<Scalar> d1 = fd_stencil(eta, j, damp_.fd_step);
      const std::complex<Scalar> d2 = fd_stencil(eta, j, damp_.fd_step / Scalar(2));
      out += iq_ * (Scalar(4) * d2 - d1) / Scalar(3);  // Richardson halving, O(h^2) error
    }
    return out;
  }

  /// Central stencil for the q-th derivative along axis j.
  std::complex<Scalar> fd_stencil(const VectorX<Scalar>& eta, int j, Scalar h) const {
    std::complex<Scalar> acc = 0;
    VectorX<Scalar> point = eta;
    for (int k = 0; k <= q_; ++k) {
      point(j) = eta(j) + (Scalar(q_) / Scalar(2) - Scalar(k)) * h;
      const Scalar coeff = static_cast<Scalar>(binomial(q_, k)) * ((k % 2 == 0) ? Scalar(1) : Scalar(-1));
      acc += coeff * kernel_(point);
    }
    return acc / std::pow(h, Scalar(q_));
  }

  std::complex<Scalar> analytic_value(const VectorX<Scalar>& eta) const {
    const int d = comps_->dim();
    const VectorX<Scalar> u = -kernel_.p.transpose() * eta;
    const std::complex<Scalar> eg =
        std::exp(std::complex<Scalar>(-Scalar(0.5) * eta.dot(kernel_.c * eta), -kernel_.m.dot(eta)) +
                 comps_->jump_exp(t_, VectorX<Scalar>(-eta)));
    const std::complex<Scalar> h0 = comps_->law().cf(u);
    std::complex<Scalar> out = eg * h0;
    const VectorX<Scalar> ceta = kernel_.c * eta;
    const VectorX<Scalar> meta = -eta;
    for (int j = 0; j < d; ++j) {
      // derivatives of g along eta_j
      std::vector<std::complex<Scalar>> gd(static_cast<std::size_t>(q_) + 1, std::complex<Scalar>(0, 0));
      gd[1] = std::complex<Scalar>(-ceta(j), -kernel_.m(j));
      if (q_ >= 2) gd[2] = std::complex<Scalar>(-kernel_.c(j, j), 0);
      if (comps_->levy().has_jumps()) {
        for (int k = 1; k <= q_; ++k) {
          const Scalar sign = (k % 2 == 0) ? Scalar(1) : Scalar(-1);
          gd[static_cast<std::size_t>(k)] += sign * comps_->jump_exp_derivative(t_, j, k, meta);
        }
      }
      // complete Bell polynomials of the g-derivatives: d^r e^g = e^g B_r
      std::vector<std::complex<Scalar>> bell(static_cast<std::size_t>(q_) + 1);
      bell[0] = 1;
      for (int r = 1; r <= q_; ++r) {
        std::complex<Scalar> sum = 0;
        for (int k = 0; k < r; ++k)
          sum += static_cast<Scalar>(binomial(r - 1, k)) * gd[static_cast<std::size_t>(k + 1)] *
                 bell[static_cast<std::size_t>(r - 1 - k)];
        bell[static_cast<std::size_t>(r)] = sum;
      }
      // derivatives of the law factor along eta_j through the diagonal flow
      const Scalar scale = -kernel_.p(j, j);
      std::vector<std::complex<Scalar>> hd(static_cast<std::size_t>(q_) + 1);
      hd[0] = h0;
      for (int s = 1; s <= q_; ++s)
        hd[static_cast<std::size_t>(s)] = std::pow(scale, Scalar(s)) * comps_->law().cf_derivs(j, s, u);
      // Leibniz combination of exp(g) and h
      std::complex<Scalar> dq = 0;
      for (int r = 0; r <= q_; ++r)
        dq += static_cast<Scalar>(binomial(q_, r)) * bell[static_cast<std::size_t>(r)] *
              hd[static_cast<std::size_t>(q_ - r)];
      out += iq_ * eg * dq;
    }
    return out;
  }

  const CharComponents<Scalar>* comps_;
  FourierKernel<Scalar> kernel_;
  Scalar t_;
  int q_;
  DampingSpec<Scalar> damp_;
  Scalar iq_ = 1;
  bool diagonal_flow_ = true;
};

}  // namespace detail

/// Psi through the damped Fourier representation: the damped coefficient
/// transforms integrated against L applied to the kernel.
template <typename Scalar>
PsiValue<Scalar> psi_damped(const Problem<Scalar>& problem, const CharComponents<Scalar>& comps, Scalar t,
                            const QuadratureSpec<Scalar>& quad, const DampingSpec<Scalar>& damp) {
  const auto* drift = std::get_if<SpectralPair<Scalar>>(&problem.drift);
  if (!drift) throw ContractViolation("psi_damped: drift carries no spectral data");
  if (!drift->damped || (!drift->a_hat_damped && !drift->b_hat_damped))
    throw ConfigurationError("psi_damped: damped transforms missing");
  if (t <= 0) throw ContractViolation("psi_damped: t must be positive");
  const int d = problem.dim();
  detail::check_quadrature_budget(quad, d);
  const int q = damping_order(d);
  const detail::DampedKernel<Scalar> lkernel(comps, t, q, damp);

  const auto rule = detail::axis_rule(quad);
  const Scalar two_pi = Scalar(2) * Scalar(3.141592653589793238462643383279502884L);
  const Scalar norm = std::pow(two_pi, Scalar(-d));
  MatrixXc<Scalar> acc_a = MatrixXc<Scalar>::Zero(d, d);
  VectorXc<Scalar> acc_b = VectorXc<Scalar>::Zero(d);
  std::vector<MatrixXc<Scalar>> row_a;
  std::vector<VectorXc<Scalar>> row_b;
  detail::tensor_sweep<Scalar>(rule, d, [&](const VectorX<Scalar>& eta, Scalar w) {
    const std::complex<Scalar> k = lkernel(eta) * (w * norm);
    if (drift->a_hat_damped) row_a.push_back(drift->a_hat_damped(eta) * k);
    if (drift->b_hat_damped) row_b.push_back(drift->b_hat_damped(eta) * k);
    if (row_a.size() == rule.nodes.size()) {
      acc_a += pairwise_sum(row_a);
      row_a.clear();
    }
    if (row_b.size() == rule.nodes.size()) {
      acc_b += pairwise_sum(row_b);
      row_b.clear();
    }
  });
  if (!row_a.empty()) acc_a += pairwise_sum(row_a);
  if (!row_b.empty()) acc_b += pairwise_sum(row_b);

  PsiValue<Scalar> out;
  out.alpha = acc_a.real();
  out.beta = acc_b.real();
  out.absorb_residue(std::max(acc_a.imag().cwiseAbs().maxCoeff(), acc_b.imag().cwiseAbs().maxCoeff()));
  return out;
}

template <typename Scalar>
PsiValue<Scalar> psi_damped(const Problem<Scalar>& problem, const PiecewisePair<Scalar>& pair, Scalar t,
                            const QuadratureSpec<Scalar>& quad, const DampingSpec<Scalar>& damp) {
  CharComponents<Scalar> comps(pair, problem.levy, problem.law);
  return psi_damped(problem, comps, t, quad, damp);
}

// ---------------------------------------------------------------------------
// Truncation radius
// ---------------------------------------------------------------------------

/// Truncation half-width R such that the kernel envelope
/// exp(t(-decay R^2 / 2 + c1 R + c0)) falls below tol, with decay the
/// ellipticity floor of the quadratic form and c0, c1, cq crude jump-growth
/// constants. Conservative: the initial-law factor is bounded by one.
template <typename Scalar>
Scalar choose_radius(const Problem<Scalar>& problem, const PiecewisePair<Scalar>& pair, Scalar t, Scalar tol) {
  if (t <= 0) throw ContractViolation("choose_radius: t must be positive");
  Scalar anorm = 0;
  for (const auto& A : pair.alpha) anorm = std::max(anorm, spectral_norm<Scalar>(A));
  const Scalar T = pair.horizon;
  const Scalar decay = min_eigenvalue_sym<Scalar>(problem.levy.theta()) * std::exp(Scalar(-2) * T * anorm);
  Scalar cq = 0, c1 = 0, c0 = 0;
  std::visit(
      [&](const auto& j) {
        using J = std::decay_t<decltype(j)>;
        const Scalar growth = Scalar(2) * std::exp(Scalar(2) * T * anorm);
        if constexpr (std::is_same_v<J, CompoundPoissonDoubleExp<Scalar>>) {
          c1 = c0 = growth * j.intensity;
        } else if constexpr (std::is_same_v<J, CustomExponent<Scalar>>) {
          cq = c1 = c0 = growth * j.moment_small;
        }
      },
      problem.levy.jump);
  const Scalar a2 = Scalar(0.5) * decay - cq;
  if (!(a2 > 0)) throw NumericalError("choose_radius: jump growth overwhelms the Gaussian decay bound");
  const Scalar level = std::log(Scalar(1) / tol) / t;
  if (c0 + level <= 0) return 0;
  return (c1 + std::sqrt(c1 * c1 + Scalar(4) * a2 * (c0 + level))) / (Scalar(2) * a2);
}

}  // namespace mkv
