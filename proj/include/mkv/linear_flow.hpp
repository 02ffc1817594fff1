#pragma once

#include "mkv/model.hpp"
#include "mkv/quadrature.hpp"
#include "mkv/types.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <vector>

namespace mkv {

/// Step-function coefficient pair (alpha, beta) on the uniform grid
/// t_i = i*T/n: the pair equals (alpha[i-1], beta[i-1]) on [t_{i-1}, t_i).
/// Pointwise evaluation at a grid node returns the left limit, so sampling a
/// pair at the right endpoints reproduces its stored values.
template <typename Scalar>
struct PiecewisePair {
  Scalar horizon = 1;
  std::vector<MatrixX<Scalar>> alpha;
  std::vector<VectorX<Scalar>> beta;

  int steps() const { return static_cast<int>(alpha.size()); }
  Scalar dt() const { return horizon / Scalar(steps()); }
  int dim() const { return alpha.empty() ? 0 : static_cast<int>(alpha.front().rows()); }

  static PiecewisePair constant(const MatrixX<Scalar>& A, const VectorX<Scalar>& b, Scalar T, int n) {
    PiecewisePair out;
    out.horizon = T;
    out.alpha.assign(static_cast<std::size_t>(n), A);
    out.beta.assign(static_cast<std::size_t>(n), b);
    return out;
  }

  /// 1-based index of the interval whose closure (t_{i-1}, t_i] contains t;
  /// t = 0 maps to the first interval.
  int interval_index(Scalar t) const {
    const Scalar x = t / dt();
    int k = static_cast<int>(std::floor(static_cast<double>(x) + 1e-9));
    const Scalar frac = x - Scalar(k);
    int idx = (frac > Scalar(1e-9)) ? k + 1 : k;
    if (idx < 1) idx = 1;
    if (idx > steps()) idx = steps();
    return idx;
  }

  const MatrixX<Scalar>& alpha_at(Scalar t) const { return alpha[static_cast<std::size_t>(interval_index(t) - 1)]; }
  const VectorX<Scalar>& beta_at(Scalar t) const { return beta[static_cast<std::size_t>(interval_index(t) - 1)]; }

  /// max_i max(|alpha_i|, |beta_i|), spectral/Euclidean norms.
  Scalar sup_norm() const {
    Scalar out = 0;
    for (int i = 0; i < steps(); ++i) {
      out = std::max(out, spectral_norm<Scalar>(alpha[static_cast<std::size_t>(i)]));
      out = std::max(out, beta[static_cast<std::size_t>(i)].norm());
    }
    return out;
  }
};

namespace detail {

template <typename Scalar>
MatrixX<Scalar> mat_exp(const MatrixX<Scalar>& m) {
  if (m.rows() == 1) {
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = std::exp(m(0, 0));
    return out;
  }
  return m.exp();
}

/// theta(Z) = Z^{-1}(exp(Z) - I). Truncated series below ||Z|| = 1e-2
/// (10 terms); otherwise read off the top-right block of the augmented
/// exponential exp([[Z, I], [0, 0]]), which needs no inversion.
template <typename Scalar>
MatrixX<Scalar> theta_phi1(const MatrixX<Scalar>& z) {
  const int d = static_cast<int>(z.rows());
  if (z.norm() < Scalar(1e-2)) {
    MatrixX<Scalar> term = MatrixX<Scalar>::Identity(d, d);
    MatrixX<Scalar> sum = term;  // k = 0 term: I / 1!
    Scalar denom = 1;
    for (int k = 1; k < 10; ++k) {
      term = term * z;
      denom *= Scalar(k + 1);
      sum += term / denom;
    }
    return sum;
  }
  if (d == 1) {
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = (std::exp(z(0, 0)) - Scalar(1)) / z(0, 0);
    return out;
  }
  MatrixX<Scalar> aug = MatrixX<Scalar>::Zero(2 * d, 2 * d);
  aug.topLeftCorner(d, d) = z;
  aug.topRightCorner(d, d) = MatrixX<Scalar>::Identity(d, d);
  const MatrixX<Scalar> e = aug.exp();
  return e.topRightCorner(d, d);
}

/// Segment [l, r] of the coefficient grid covered by [s, t], clipped.
template <typename Scalar>
struct CoveredSegment {
  int index;  // 1-based interval index
  Scalar left, right;
  bool full;  // covers the whole grid interval
};

/// Enumerates the grid intervals intersecting [s, t] from left to right.
template <typename Scalar>
std::vector<CoveredSegment<Scalar>> covered_segments(const PiecewisePair<Scalar>& pair, Scalar s, Scalar t) {
  std::vector<CoveredSegment<Scalar>> out;
  const Scalar h = pair.dt();
  const Scalar snap = h * Scalar(1e-9);
  int k0 = static_cast<int>(std::floor(static_cast<double>(s / h + 1e-9))) + 1;
  int k1 = static_cast<int>(std::ceil(static_cast<double>(t / h - 1e-9)));
  if (k1 < k0) k1 = k0;
  if (k1 > pair.steps()) k1 = pair.steps();
  if (k0 > k1) k0 = k1;
  for (int k = k0; k <= k1; ++k) {
    const Scalar gl = h * Scalar(k - 1);
    const Scalar gr = h * Scalar(k);
    CoveredSegment<Scalar> seg;
    seg.index = k;
    seg.left = std::max(s, gl);
    seg.right = std::min(t, gr);
    if (seg.right - seg.left <= snap) continue;  // zero-width sliver from snapping
    seg.full = (seg.left <= gl + snap) && (seg.right >= gr - snap);
    out.push_back(seg);
  }
  return out;
}

/// Gramian of the diffusion over one constant-coefficient stretch of length
/// tau: integral of exp(A u) theta exp(A^T u) du on [0, tau], by fixed-order
/// Gauss-Legendre (the integrand is entire, so the rule is spectrally exact).
template <typename Scalar>
MatrixX<Scalar> interval_gramian(const MatrixX<Scalar>& A, const MatrixX<Scalar>& theta, Scalar tau,
                                 const QuadRule1d<Scalar>& rule) {
  const int d = static_cast<int>(A.rows());
  MatrixX<Scalar> g = MatrixX<Scalar>::Zero(d, d);
  const auto mapped = rule.mapped_to(Scalar(0), tau);
  for (std::size_t q = 0; q < mapped.nodes.size(); ++q) {
    const MatrixX<Scalar> e = mat_exp<Scalar>(A * mapped.nodes[q]);
    g.noalias() += mapped.weights[q] * (e * theta * e.transpose());
  }
  return Scalar(0.5) * (g + g.transpose());
}

}  // namespace detail

/// Flow matrix Phi_{s,t} of the linear ODE d/dt Phi = alpha_t Phi with
/// Phi_{s,s} = I: for step-function alpha an ordered product of matrix
/// exponentials, newest factor leftmost.
template <typename Scalar>
MatrixX<Scalar> flow(const PiecewisePair<Scalar>& pair, Scalar s, Scalar t) {
  if (s > t) throw ContractViolation("flow: require s <= t");
  const int d = pair.dim();
  MatrixX<Scalar> m = MatrixX<Scalar>::Identity(d, d);
  if (t - s <= pair.horizon * Scalar(1e-15)) return m;
  for (const auto& seg : detail::covered_segments(pair, s, t)) {
    const MatrixX<Scalar>& A = pair.alpha[static_cast<std::size_t>(seg.index - 1)];
    m = detail::mat_exp<Scalar>(A * (seg.right - seg.left)) * m;
  }
  return m;
}

/// Covariance C_t = integral of Phi_{s,t} theta Phi_{s,t}^T ds over [0, t],
/// accumulated per interval: C over [0, r] = E C E^T + Gramian on the last
/// stretch, with E the stretch's flow factor.
template <typename Scalar>
MatrixX<Scalar> covariance(const PiecewisePair<Scalar>& pair, const LevyTriplet<Scalar>& levy, Scalar t) {
  if (t < 0 || t > pair.horizon * (Scalar(1) + Scalar(1e-12)))
    throw ContractViolation("covariance: t outside [0, T]");
  const int d = pair.dim();
  const MatrixX<Scalar> theta = levy.theta();
  const auto rule = gauss_legendre<Scalar>(16);
  MatrixX<Scalar> c = MatrixX<Scalar>::Zero(d, d);
  if (t <= pair.horizon * Scalar(1e-15)) return c;
  for (const auto& seg : detail::covered_segments(pair, Scalar(0), t)) {
    const MatrixX<Scalar>& A = pair.alpha[static_cast<std::size_t>(seg.index - 1)];
    const Scalar tau = seg.right - seg.left;
    const MatrixX<Scalar> e = detail::mat_exp<Scalar>(A * tau);
    c = e * c * e.transpose() + detail::interval_gramian(A, theta, tau, rule);
    c = Scalar(0.5) * (c + c.transpose());
  }
  return c;
}

/// Mean m_t = integral of Phi_{s,t} beta_s ds over [0, t]; per stretch the
/// exact update m <- E m + tau * theta(A tau) b.
template <typename Scalar>
VectorX<Scalar> mean(const PiecewisePair<Scalar>& pair, Scalar t) {
  if (t < 0 || t > pair.horizon * (Scalar(1) + Scalar(1e-12))) throw ContractViolation("mean: t outside [0, T]");
  const int d = pair.dim();
  VectorX<Scalar> m = VectorX<Scalar>::Zero(d);
  if (t <= pair.horizon * Scalar(1e-15)) return m;
  for (const auto& seg : detail::covered_segments(pair, Scalar(0), t)) {
    const MatrixX<Scalar>& A = pair.alpha[static_cast<std::size_t>(seg.index - 1)];
    const VectorX<Scalar>& b = pair.beta[static_cast<std::size_t>(seg.index - 1)];
    const Scalar tau = seg.right - seg.left;
    m = detail::mat_exp<Scalar>(A * tau) * m + tau * (detail::theta_phi1<Scalar>(A * tau) * b);
  }
  return m;
}

namespace detail {

/// Visits the composite Gauss-Legendre nodes of the jump time integral over
/// [0, t]: calls visit(weight, Phi_{s,t}) for every node s, walking the
/// covered intervals from right to left so each flow factor is reused.
template <typename Scalar, typename Visitor>
void visit_jump_nodes(const PiecewisePair<Scalar>& pair, Scalar t, const QuadRule1d<Scalar>& rule,
                      Visitor&& visit) {
  const int d = pair.dim();
  auto segs = covered_segments(pair, Scalar(0), t);
  MatrixX<Scalar> right_flow = MatrixX<Scalar>::Identity(d, d);  // Phi_{seg.right, t}
  for (auto it = segs.rbegin(); it != segs.rend(); ++it) {
    const MatrixX<Scalar>& A = pair.alpha[static_cast<std::size_t>(it->index - 1)];
    const Scalar tau = it->right - it->left;
    if (tau > 0) {
      const auto mapped = rule.mapped_to(Scalar(0), tau);  // u = seg.right - s
      for (std::size_t q = 0; q < mapped.nodes.size(); ++q) {
        const MatrixX<Scalar> phi_node = right_flow * mat_exp<Scalar>(A * mapped.nodes[q]);
        visit(mapped.weights[q], phi_node);
      }
    }
    right_flow = right_flow * mat_exp<Scalar>(A * tau);
  }
}

/// Per-interval closed form of the Kou jump integral in one dimension. On a
/// stretch where alpha = a and Phi_{right,t} = c, the substitution
/// u = c e^{a(right-s)} eta turns the time integral into
/// (F(u_left) - F(u_right)) / a with F(u) = -lambda [p log(l1 - iu)
/// + (1-p) log(l2 + iu)]; both arguments stay in the right half-plane.
template <typename Scalar>
std::complex<Scalar> kou_closed_form(const PiecewisePair<Scalar>& pair, const CompoundPoissonDoubleExp<Scalar>& j,
                                     Scalar t, Scalar eta) {
  const auto F = [&j](Scalar u) {
    return -j.intensity * (j.p * std::log(std::complex<Scalar>(j.lambda1, -u)) +
                           (Scalar(1) - j.p) * std::log(std::complex<Scalar>(j.lambda2, u)));
  };
  std::complex<Scalar> total = 0;
  Scalar c = 1;  // scalar flow Phi_{seg.right, t}
  auto segs = covered_segments(pair, Scalar(0), t);
  for (auto it = segs.rbegin(); it != segs.rend(); ++it) {
    const Scalar a = pair.alpha[static_cast<std::size_t>(it->index - 1)](0, 0);
    const Scalar tau = it->right - it->left;
    if (tau > 0) {
      if (std::abs(a) * tau < Scalar(1e-10)) {
        total += tau * double_exp_exponent(j, c * eta);
      } else {
        const Scalar u_right = c * eta;
        const Scalar u_left = c * std::exp(a * tau) * eta;
        total += (F(u_left) - F(u_right)) / a;
      }
    }
    c *= std::exp(a * tau);
  }
  return total;
}

}  // namespace detail

/// Jump component n_t(eta) of the characteristic exponent: the time integral
/// of the Levy exponent along the transposed flow. Uses the closed Kou form
/// in one dimension, composite Gauss-Legendre otherwise.
template <typename Scalar>
std::complex<Scalar> jump_exponent(const PiecewisePair<Scalar>& pair, const LevyTriplet<Scalar>& levy, Scalar t,
                                   const VectorX<Scalar>& eta, int nodes_per_interval = 16) {
  if (t < 0 || t > pair.horizon * (Scalar(1) + Scalar(1e-12)))
    throw ContractViolation("jump_exponent: t outside [0, T]");
  if (!levy.has_jumps() || t <= pair.horizon * Scalar(1e-15)) return {0, 0};
  if (pair.dim() == 1 && std::holds_alternative<CompoundPoissonDoubleExp<Scalar>>(levy.jump))
    return detail::kou_closed_form(pair, std::get<CompoundPoissonDoubleExp<Scalar>>(levy.jump), t, eta(0));
  const auto rule = gauss_legendre<Scalar>(nodes_per_interval);
  std::vector<std::complex<Scalar>> terms;
  detail::visit_jump_nodes<Scalar>(pair, t, rule, [&](Scalar w, const MatrixX<Scalar>& phi) {
    terms.push_back(w * levy_exponent(levy, VectorX<Scalar>(phi.transpose() * eta)));
  });
  return pairwise_sum(terms);
}

/// Characteristic function of the linear-SDE marginal at time t:
/// exp(-<eta, C_t eta>/2 + i <eta, m_t> + n_t(eta)) * cf_Y(Phi_{0,t}^T eta).
template <typename Scalar>
std::complex<Scalar> char_fn(const PiecewisePair<Scalar>& pair, const LevyTriplet<Scalar>& levy,
                             const InitialLaw<Scalar>& law, Scalar t, const VectorX<Scalar>& eta) {
  const MatrixX<Scalar> c = covariance(pair, levy, t);
  const VectorX<Scalar> m = mean(pair, t);
  const std::complex<Scalar> n = jump_exponent(pair, levy, t, eta);
  const MatrixX<Scalar> p = flow(pair, Scalar(0), t);
  const std::complex<Scalar> expo =
      std::complex<Scalar>(-Scalar(0.5) * eta.dot(c * eta), m.dot(eta)) + n;
  return std::exp(expo) * law.cf(VectorX<Scalar>(p.transpose() * eta));
}

/// Grid-cached evaluators for one coefficient pair: per-interval exponentials,
/// prefix flows, covariances and means at the grid nodes, and jump-node flow
/// factors. All caches are built eagerly; evaluation is then pure and safe to
/// share across threads.
template <typename Scalar>
class CharComponents {
 public:
  CharComponents(PiecewisePair<Scalar> pair, LevyTriplet<Scalar> levy, InitialLaw<Scalar> law,
                 int jump_nodes_per_interval = 16)
      : pair_(std::move(pair)),
        levy_(std::move(levy)),
        law_(std::move(law)),
        jump_rule_(gauss_legendre<Scalar>(jump_nodes_per_interval)),
        cov_rule_(gauss_legendre<Scalar>(16)) {
    const int d = pair_.dim();
    const int n = pair_.steps();
    const Scalar h = pair_.dt();
    const MatrixX<Scalar> theta = levy_.theta();
    exp_.reserve(static_cast<std::size_t>(n));
    prefix_.reserve(static_cast<std::size_t>(n) + 1);
    cov_.reserve(static_cast<std::size_t>(n) + 1);
    mean_.reserve(static_cast<std::size_t>(n) + 1);
    prefix_.push_back(MatrixX<Scalar>::Identity(d, d));
    cov_.push_back(MatrixX<Scalar>::Zero(d, d));
    mean_.push_back(VectorX<Scalar>::Zero(d));
    for (int i = 0; i < n; ++i) {
      const MatrixX<Scalar>& A = pair_.alpha[static_cast<std::size_t>(i)];
      const VectorX<Scalar>& b = pair_.beta[static_cast<std::size_t>(i)];
      exp_.push_back(detail::mat_exp<Scalar>(A * h));
      const MatrixX<Scalar>& e = exp_.back();
      prefix_.push_back(e * prefix_.back());
      MatrixX<Scalar> c = e * cov_.back() * e.transpose() + detail::interval_gramian(A, theta, h, cov_rule_);
      cov_.push_back(Scalar(0.5) * (c + c.transpose()));
      mean_.push_back(e * mean_.back() + h * (detail::theta_phi1<Scalar>(A * h) * b));
    }
    use_kou_ = d == 1 && std::holds_alternative<CompoundPoissonDoubleExp<Scalar>>(levy_.jump);
    if (levy_.has_jumps() && !use_kou_) {
      // node flow factors inside each interval: exp(A_k (t_k - s_q))
      const auto mapped = jump_rule_.mapped_to(Scalar(0), h);
      jump_node_exp_.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        for (std::size_t q = 0; q < mapped.nodes.size(); ++q)
          jump_node_exp_[static_cast<std::size_t>(i)].push_back(
              detail::mat_exp<Scalar>(pair_.alpha[static_cast<std::size_t>(i)] * mapped.nodes[q]));
    }
  }

  const PiecewisePair<Scalar>& pair() const { return pair_; }
  const LevyTriplet<Scalar>& levy() const { return levy_; }
  const InitialLaw<Scalar>& law() const { return law_; }
  int dim() const { return pair_.dim(); }
  bool kou_closed_form() const { return use_kou_; }

  /// Phi_{s,t}; grid-aligned endpoints hit the cached per-interval factors.
  MatrixX<Scalar> phi(Scalar s, Scalar t) const {
    if (s > t) throw ContractViolation("phi: require s <= t");
    const auto [ks, taus] = locate(s);
    const auto [kt, taut] = locate(t);
    if (taus == Scalar(0) && taut == Scalar(0)) {
      MatrixX<Scalar> m = MatrixX<Scalar>::Identity(dim(), dim());
      for (int k = ks; k < kt; ++k) m = exp_[static_cast<std::size_t>(k)] * m;
      return m;
    }
    return flow(pair_, s, t);
  }

  /// Phi_{0,t} via the prefix cache.
  MatrixX<Scalar> phi0(Scalar t) const {
    const auto [k, tau] = locate(t);
    if (tau == Scalar(0)) return prefix_[static_cast<std::size_t>(k)];
    return detail::mat_exp<Scalar>(pair_.alpha[static_cast<std::size_t>(k)] * tau) *
           prefix_[static_cast<std::size_t>(k)];
  }

  MatrixX<Scalar> cov(Scalar t) const {
    const auto [k, tau] = locate(t);
    if (tau == Scalar(0)) return cov_[static_cast<std::size_t>(k)];
    const MatrixX<Scalar>& A = pair_.alpha[static_cast<std::size_t>(k)];
    const MatrixX<Scalar> e = detail::mat_exp<Scalar>(A * tau);
    MatrixX<Scalar> c = e * cov_[static_cast<std::size_t>(k)] * e.transpose() +
                        detail::interval_gramian(A, levy_.theta(), tau, cov_rule_);
    return Scalar(0.5) * (c + c.transpose());
  }

  VectorX<Scalar> mean_at(Scalar t) const {
    const auto [k, tau] = locate(t);
    if (tau == Scalar(0)) return mean_[static_cast<std::size_t>(k)];
    const MatrixX<Scalar>& A = pair_.alpha[static_cast<std::size_t>(k)];
    return detail::mat_exp<Scalar>(A * tau) * mean_[static_cast<std::size_t>(k)] +
           tau * (detail::theta_phi1<Scalar>(A * tau) * pair_.beta[static_cast<std::size_t>(k)]);
  }

  /// n_t(eta); closed Kou form when available, else node quadrature.
  std::complex<Scalar> jump_exp(Scalar t, const VectorX<Scalar>& eta) const {
    if (!levy_.has_jumps() || t <= pair_.horizon * Scalar(1e-15)) return {0, 0};
    if (use_kou_)
      return detail::kou_closed_form(pair_, std::get<CompoundPoissonDoubleExp<Scalar>>(levy_.jump), t, eta(0));
    return jump_exp_quadrature(t, eta);
  }

  /// n_t(eta) by composite time quadrature regardless of closed forms.
  std::complex<Scalar> jump_exp_quadrature(Scalar t, const VectorX<Scalar>& eta) const {
    if (!levy_.has_jumps() || t <= pair_.horizon * Scalar(1e-15)) return {0, 0};
    std::vector<std::complex<Scalar>> terms;
    visit_nodes(t, [&](Scalar w, const MatrixX<Scalar>& phi_node) {
      terms.push_back(w * levy_exponent(levy_, VectorX<Scalar>(phi_node.transpose() * eta)));
    });
    return pairwise_sum(terms);
  }

  bool jump_derivative_supported() const { return !levy_.has_jumps() || use_kou_; }

  /// d^m/d eta_j^m of n_t at eta. Zero measure gives 0; for Kou jumps the
  /// node quadrature of phi^m f^{(m)}(phi eta); otherwise unsupported.
  std::complex<Scalar> jump_exp_derivative(Scalar t, int axis, int order, const VectorX<Scalar>& eta) const {
    if (!levy_.has_jumps()) return {0, 0};
    if (order == 0) return jump_exp(t, eta);
    if (!use_kou_)
      throw ConfigurationError("jump_exp_derivative: analytic derivatives need the double-exponential family");
    if (axis != 0) throw ContractViolation("jump_exp_derivative: axis out of range");
    if (t <= pair_.horizon * Scalar(1e-15)) return {0, 0};
    const auto& j = std::get<CompoundPoissonDoubleExp<Scalar>>(levy_.jump);
    std::vector<std::complex<Scalar>> terms;
    visit_nodes(t, [&](Scalar w, const MatrixX<Scalar>& phi_node) {
      const Scalar f = phi_node(0, 0);
      terms.push_back(w * std::pow(f, Scalar(order)) * double_exp_exponent_derivative(j, order, f * eta(0)));
    });
    return pairwise_sum(terms);
  }

  /// Full characteristic function of the marginal at t.
  std::complex<Scalar> cf(Scalar t, const VectorX<Scalar>& eta) const {
    const MatrixX<Scalar> c = cov(t);
    const VectorX<Scalar> m = mean_at(t);
    const std::complex<Scalar> expo =
        std::complex<Scalar>(-Scalar(0.5) * eta.dot(c * eta), m.dot(eta)) + jump_exp(t, eta);
    return std::exp(expo) * law_.cf(VectorX<Scalar>(phi0(t).transpose() * eta));
  }

 private:
  std::pair<int, Scalar> locate(Scalar t) const {
    const Scalar h = pair_.dt();
    int k = static_cast<int>(std::floor(static_cast<double>(t / h) + 1e-9));
    if (k > pair_.steps()) k = pair_.steps();
    if (k < 0) k = 0;
    Scalar tau = t - Scalar(k) * h;
    if (std::abs(tau) <= h * Scalar(1e-9) || tau < 0) tau = 0;
    if (k == pair_.steps()) tau = 0;
    return {k, tau};
  }

  template <typename Visitor>
  void visit_nodes(Scalar t, Visitor&& visit) const {
    const auto [kfull, tau] = locate(t);
    const Scalar h = pair_.dt();
    MatrixX<Scalar> right_flow = MatrixX<Scalar>::Identity(dim(), dim());
    if (tau > 0) {
      const MatrixX<Scalar>& A = pair_.alpha[static_cast<std::size_t>(kfull)];
      const auto mapped = jump_rule_.mapped_to(Scalar(0), tau);
      for (std::size_t q = 0; q < mapped.nodes.size(); ++q)
        visit(mapped.weights[q], MatrixX<Scalar>(detail::mat_exp<Scalar>(A * mapped.nodes[q])));
      right_flow = detail::mat_exp<Scalar>(A * tau);
    }
    const auto mapped = jump_rule_.mapped_to(Scalar(0), h);
    for (int k = kfull; k >= 1; --k) {
      if (!jump_node_exp_.empty()) {
        for (std::size_t q = 0; q < mapped.nodes.size(); ++q)
          visit(mapped.weights[q],
                MatrixX<Scalar>(right_flow * jump_node_exp_[static_cast<std::size_t>(k - 1)][q]));
      } else {
        const MatrixX<Scalar>& A = pair_.alpha[static_cast<std::size_t>(k - 1)];
        for (std::size_t q = 0; q < mapped.nodes.size(); ++q)
          visit(mapped.weights[q], MatrixX<Scalar>(right_flow * detail::mat_exp<Scalar>(A * mapped.nodes[q])));
      }
      right_flow = right_flow * exp_[static_cast<std::size_t>(k - 1)];
    }
  }

  PiecewisePair<Scalar> pair_;
  LevyTriplet<Scalar> levy_;
  InitialLaw<Scalar> law_;
  QuadRule1d<Scalar> jump_rule_;
  QuadRule1d<Scalar> cov_rule_;
  std::vector<MatrixX<Scalar>> exp_;     // exp(A_i dt)
  std::vector<MatrixX<Scalar>> prefix_;  // Phi_{0, t_i}
  std::vector<MatrixX<Scalar>> cov_;     // C_{t_i}
  std::vector<VectorX<Scalar>> mean_;    // m_{t_i}
  std::vector<std::vector<MatrixX<Scalar>>> jump_node_exp_;
  bool use_kou_ = false;
};

}  // namespace mkv
