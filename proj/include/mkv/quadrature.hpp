#pragma once

#include "mkv/types.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace mkv {

/// One-dimensional quadrature rule on a reference interval.
template <typename Scalar>
struct QuadRule1d {
  std::vector<Scalar> nodes;
  std::vector<Scalar> weights;

  /// Affine image of the rule on [a, b].
  QuadRule1d mapped_to(Scalar a, Scalar b) const {
    QuadRule1d out;
    out.nodes.reserve(nodes.size());
    out.weights.reserve(weights.size());
    const Scalar mid = (a + b) / Scalar(2);
    const Scalar half = (b - a) / Scalar(2);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      out.nodes.push_back(mid + half * nodes[i]);
      out.weights.push_back(half * weights[i]);
    }
    return out;
  }
};

/// n-point Gauss-Legendre rule on [-1, 1]. Nodes are the Legendre roots,
/// located by Newton iteration from the Chebyshev initial guess.
template <typename Scalar>
QuadRule1d<Scalar> gauss_legendre(int n) {
  if (n < 1) throw ContractViolation("gauss_legendre: need at least one node");
  QuadRule1d<Scalar> rule;
  rule.nodes.assign(static_cast<std::size_t>(n), Scalar(0));
  rule.weights.assign(static_cast<std::size_t>(n), Scalar(0));
  const long double pi = 3.141592653589793238462643383279502884L;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    long double x = std::cos(pi * (static_cast<long double>(i) + 0.75L) / (static_cast<long double>(n) + 0.5L));
    long double dp = 0.0L;
    for (int it = 0; it < 100; ++it) {
      // Legendre recurrence for P_n(x) and P'_n(x)
      long double p0 = 1.0L, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2.0L * k - 1.0L) * x * p1 - (k - 1.0L) * p0) / static_cast<long double>(k);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<long double>(n) * (x * p1 - p0) / (x * x - 1.0L);
      const long double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-19L) break;
    }
    const long double w = 2.0L / ((1.0L - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = static_cast<Scalar>(-x);
    rule.weights[static_cast<std::size_t>(i)] = static_cast<Scalar>(w);
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = static_cast<Scalar>(x);
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = static_cast<Scalar>(w);
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = Scalar(0);
  return rule;
}

/// n-point composite trapezoid rule on [-1, 1] (endpoints included, n >= 2).
template <typename Scalar>
QuadRule1d<Scalar> trapezoid(int n) {
  if (n < 2) throw ContractViolation("trapezoid: need at least two nodes");
  QuadRule1d<Scalar> rule;
  const Scalar h = Scalar(2) / Scalar(n - 1);
  for (int i = 0; i < n; ++i) {
    rule.nodes.push_back(Scalar(-1) + h * Scalar(i));
    rule.weights.push_back((i == 0 || i == n - 1) ? h / Scalar(2) : h);
  }
  return rule;
}

namespace detail {

template <typename F, typename R>
R adaptive_simpson_rec(const F& f, double a, double b, R fa, R fm, R fb, R whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const R flm = f(lm);
  const R frm = f(rm);
  const R left = (b - a) / 12.0 * (fa + 4.0 * flm + fm);
  const R right = (b - a) / 12.0 * (fm + 4.0 * frm + fb);
  const R delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
/// The integrand may return double or std::complex<double>.
template <typename F>
auto adaptive_simpson(const F& f, double a, double b, double tol = 1e-12, int max_depth = 40) {
  using R = decltype(f(a));
  const R fa = f(a);
  const R fm = f(0.5 * (a + b));
  const R fb = f(b);
  const R whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec<F, R>(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace mkv
