#include "mkv/diagnostics.hpp"

#include "mkv/benchmark.hpp"
#include "mkv/linear_flow.hpp"
#include "mkv/model.hpp"
#include "mkv/picard.hpp"
#include "mkv/psi_map.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <sstream>

namespace mkv::diag {
namespace {

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Complex = std::complex<double>;

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

Vector random_vector(DeterministicRng& rng, int d, double lo, double hi) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

Matrix random_matrix(DeterministicRng& rng, int d, double lo, double hi) {
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

struct Instance {
  PiecewisePair<double> pair;
  LevyTriplet<double> levy;
};

Instance make_instance(DeterministicRng& rng, int d, bool with_jumps) {
  Instance inst;
  const int n = 4 + static_cast<int>(rng.uniform(0.0, 8.99));
  inst.pair.horizon = 1.0;
  for (int i = 0; i < n; ++i) {
    inst.pair.alpha.push_back(random_matrix(rng, d, -0.7, 0.7));
    inst.pair.beta.push_back(random_vector(rng, d, -1.0, 1.0));
  }
  Matrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  inst.levy.sigma = Matrix::Identity(d, d) + 0.3 * g;
  if (with_jumps && d == 1) {
    CompoundPoissonDoubleExp<double> j;
    j.intensity = rng.uniform(0.2, 1.2);
    j.lambda1 = rng.uniform(0.5, 3.0);
    j.lambda2 = rng.uniform(0.5, 3.0);
    j.p = rng.uniform(0.0, 1.0);
    inst.levy.jump = j;
  }
  return inst;
}

double alpha_sup(const PiecewisePair<double>& pair) {
  double out = 0;
  for (const auto& a : pair.alpha) out = std::max(out, spectral_norm<double>(a));
  return out;
}

double beta_sup(const PiecewisePair<double>& pair) {
  double out = 0;
  for (const auto& b : pair.beta) out = std::max(out, b.norm());
  return out;
}

// Closed-form moments of the double-exponential Levy measure.
double dblexp_mass_tail(const CompoundPoissonDoubleExp<double>& j, double cut) {
  return j.intensity * (j.p * std::exp(-j.lambda1 * cut) + (1.0 - j.p) * std::exp(-j.lambda2 * cut));
}

double dblexp_second_moment_below(const CompoundPoissonDoubleExp<double>& j, double cut) {
  const auto piece = [cut](double c) {
    return (2.0 - std::exp(-c * cut) * (c * c * cut * cut + 2.0 * c * cut + 2.0)) / (c * c);
  };
  return j.intensity * (j.p * piece(j.lambda1) + (1.0 - j.p) * piece(j.lambda2));
}

double dblexp_first_moment_wedge(const CompoundPoissonDoubleExp<double>& j) {
  // integral of |y| (1 ^ |y|) = second moment below 1 + first moment above 1
  const auto tail_first = [](double c) { return std::exp(-c) * (1.0 + 1.0 / c); };
  return dblexp_second_moment_below(j, 1.0) +
         j.intensity * (j.p * tail_first(j.lambda1) + (1.0 - j.p) * tail_first(j.lambda2));
}

Problem<double> gaussian_problem() { return make_gaussian_case<double>().problem(); }
Problem<double> kou_problem() { return make_kou_case<double>().problem(); }

PiecewisePair<double> random_ball_pair(DeterministicRng& rng, const Problem<double>& problem, int n) {
  const double r = problem.ball_radius();
  const int d = problem.dim();
  PiecewisePair<double> pair;
  pair.horizon = problem.horizon;
  for (int i = 0; i < n; ++i) {
    // scale a random direction to stay strictly inside the ball
    Matrix a = random_matrix(rng, d, -1.0, 1.0);
    const double na = spectral_norm<double>(a);
    if (na > 0) a *= rng.uniform(0.0, 0.95) * r / na;
    Vector b = random_vector(rng, d, -1.0, 1.0);
    const double nb = b.norm();
    if (nb > 0) b *= rng.uniform(0.0, 0.95) * r / nb;
    pair.alpha.push_back(a);
    pair.beta.push_back(b);
  }
  return pair;
}

struct Worst {
  double value = 0;
  void record(double v) { value = std::max(value, v); }
  bool below(double bound) const { return value <= bound; }
};

}  // namespace

CheckResult check_cf_properties() {
  DeterministicRng rng(101);
  Worst worst;
  const auto run = [&](const InitialLaw<double>& law) {
    Vector zero = Vector::Zero(law.dim);
    worst.record(std::abs(law.cf(zero) - 1.0));
    for (int k = 0; k < 1000; ++k) {
      const Vector eta = random_vector(rng, law.dim, -8.0, 8.0);
      const Complex v = law.cf(eta);
      worst.record(std::abs(v) - 1.0);
      worst.record(std::abs(law.cf(Vector(-eta)) - std::conj(v)));
    }
  };
  run(laplace_initial_law<double>());
  run(product_laplace_initial_law<double>(2));
  run(stable_one_initial_law<double>(2));
  run(gaussian_initial_law<double>(Vector::Ones(2), Matrix::Identity(2, 2)));
  run(point_mass_initial_law<double>(0.5 * Vector::Ones(2)));
  return {"cf_normalization_modulus_symmetry", worst.below(1e-12),
          "worst deviation " + fmt(worst.value) + " over 5 laws x 1000 draws (tol 1e-12)"};
}

CheckResult check_laplace_cf_quadrature() {
  const auto law = laplace_initial_law<double>();
  Worst worst;
  for (int k = 0; k <= 100; ++k) {
    const double eta = -10.0 + 0.2 * k;
    // direct transform of the density exp(-|y|)/2
    const Complex oracle = adaptive_simpson(
        [eta](double y) {
          return 0.5 * std::exp(-std::abs(y)) * std::exp(Complex(0, eta * y));
        },
        -60.0, 60.0, 1e-12);
    Vector e(1);
    e(0) = eta;
    worst.record(std::abs(law.cf(e) - oracle));
  }
  return {"laplace_cf_vs_quadrature", worst.below(1e-10),
          "max |cf - quadrature| = " + fmt(worst.value) + " on [-10,10] (tol 1e-10)"};
}

CheckResult check_levy_exponent_oracle() {
  CompoundPoissonDoubleExp<double> j{0.8, 0.5, 0.6, 0.35};
  LevyTriplet<double> levy;
  levy.sigma = Matrix::Identity(1, 1);
  levy.jump = j;
  Worst worst;
  // f(0) = 0 for every jump spec
  Vector zero = Vector::Zero(1);
  worst.record(std::abs(levy_exponent(levy, zero)));
  LevyTriplet<double> none;
  none.sigma = Matrix::Identity(1, 1);
  worst.record(std::abs(levy_exponent(none, zero)));
  const double cut = 30.0 / std::min(j.lambda1, j.lambda2);
  for (int k = -20; k <= 20; k += 2) {
    const double xi = static_cast<double>(k);
    const Complex up = adaptive_simpson(
        [&](double y) {
          return j.p * j.lambda1 * std::exp(-j.lambda1 * y) * (std::exp(Complex(0, xi * y)) - 1.0);
        },
        0.0, cut, 1e-11);
    const Complex down = adaptive_simpson(
        [&](double y) {
          return (1.0 - j.p) * j.lambda2 * std::exp(j.lambda2 * y) * (std::exp(Complex(0, xi * y)) - 1.0);
        },
        -cut, 0.0, 1e-11);
    Vector x(1);
    x(0) = xi;
    worst.record(std::abs(levy_exponent(levy, x) - j.intensity * (up + down)));
  }
  return {"levy_exponent_vs_quadrature", worst.below(1e-8),
          "max closed-form deviation " + fmt(worst.value) + " on |xi| <= 20 (tol 1e-8)"};
}

CheckResult check_flow_composition() {
  DeterministicRng rng(202);
  Worst worst;
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 1 + trial % 3;
    const Instance inst = make_instance(rng, d, false);
    double a = rng.uniform(0.0, 1.0), b = rng.uniform(0.0, 1.0), c = rng.uniform(0.0, 1.0);
    double s = std::min({a, b, c}), t = std::max({a, b, c});
    const double u = a + b + c - s - t;
    const Matrix lhs = flow(inst.pair, s, t);
    const Matrix rhs = flow(inst.pair, u, t) * flow(inst.pair, s, u);
    worst.record(spectral_norm<double>(Matrix(lhs - rhs)));
  }
  return {"flow_composition", worst.below(1e-10),
          "max |Phi_st - Phi_ut Phi_su| = " + fmt(worst.value) + " (tol 1e-10)"};
}

CheckResult check_flow_inverse_bound() {
  DeterministicRng rng(203);
  Worst worst;
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 1 + trial % 3;
    const Instance inst = make_instance(rng, d, false);
    double s = rng.uniform(0.0, 1.0), t = rng.uniform(0.0, 1.0);
    if (s > t) std::swap(s, t);
    const Matrix phi = flow(inst.pair, s, t);
    const double inv_norm = spectral_norm<double>(Matrix(phi.inverse()));
    const double bound = std::exp(inst.pair.horizon * alpha_sup(inst.pair));
    worst.record(inv_norm / bound);
  }
  return {"flow_inverse_bound", worst.below(1.0 + 1e-9),
          "max |Phi^-1| / e^{T|alpha|} = " + fmt(worst.value) + " (must be <= 1)"};
}

CheckResult check_apriori_bounds() {
  DeterministicRng rng(204);
  Worst worst;  // max ratio of lhs to its bound; lower bound stored as bound/lhs
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 3;
    const Instance inst = make_instance(rng, d, trial % 2 == 0);
    const double T = inst.pair.horizon;
    const double an = alpha_sup(inst.pair);
    const double bn = beta_sup(inst.pair);
    const Matrix theta = inst.levy.theta();
    const double theta_norm = spectral_norm<double>(theta);
    double s = rng.uniform(0.0, T), t = rng.uniform(0.0, T);
    if (s > t) std::swap(s, t);
    if (t < 1e-3) t = 1e-3;
    const Vector eta = random_vector(rng, d, -5.0, 5.0);

    worst.record(spectral_norm<double>(flow(inst.pair, s, t)) / std::exp(T * an));
    const Matrix c = covariance(inst.pair, inst.levy, t);
    worst.record(spectral_norm<double>(c) / (t * theta_norm * std::exp(2 * T * an)) );
    worst.record(mean(inst.pair, t).norm() / std::max(1e-300, t * std::exp(T * an) * bn));
    const double quad = eta.dot(c * eta);
    const double lower = min_eigenvalue_sym<double>(theta) * std::exp(-2 * T * an) * t * eta.squaredNorm();
    if (lower > 0) worst.record(lower / quad);
    if (const auto* j = std::get_if<CompoundPoissonDoubleExp<double>>(&inst.levy.jump)) {
      const double delta = 0.5;
      const double n_val = std::abs(jump_exponent(inst.pair, inst.levy, t, eta));
      const double bound = 2.0 * t * std::exp(2 * T * an) *
                           (eta.squaredNorm() * dblexp_second_moment_below(*j, delta) +
                            (eta.norm() + 1.0) * dblexp_mass_tail(*j, delta));
      worst.record(n_val / bound);
    }
  }
  return {"apriori_bounds", worst.below(1.0 + 1e-9),
          "max lhs/bound ratio " + fmt(worst.value) + " over 100 instances (must be <= 1)"};
}

CheckResult check_increment_bounds() {
  DeterministicRng rng(205);
  Worst worst;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 3;
    const Instance inst = make_instance(rng, d, trial % 2 == 0);
    const double T = inst.pair.horizon;
    const double an = alpha_sup(inst.pair);
    const double bn = beta_sup(inst.pair);
    const Matrix theta = inst.levy.theta();
    double s = rng.uniform(0.0, T), t = rng.uniform(0.0, T), tp = rng.uniform(0.0, T);
    if (t > tp) std::swap(t, tp);
    s = std::min(s, t);
    const double gap = tp - t;
    if (gap < 1e-6) continue;
    const Vector eta = random_vector(rng, d, -5.0, 5.0);

    worst.record(spectral_norm<double>(Matrix(flow(inst.pair, s, tp) - flow(inst.pair, s, t))) /
                 std::max(1e-300, gap * an * std::exp(T * an)));
    worst.record(spectral_norm<double>(Matrix(covariance(inst.pair, inst.levy, tp) -
                                              covariance(inst.pair, inst.levy, t))) /
                 (gap * spectral_norm<double>(theta) * std::exp(4 * T * an)));
    worst.record((mean(inst.pair, tp) - mean(inst.pair, t)).norm() /
                 std::max(1e-300, gap * bn * std::exp(2 * T * an)));
    if (std::holds_alternative<CompoundPoissonDoubleExp<double>>(inst.levy.jump)) {
      const auto& j = std::get<CompoundPoissonDoubleExp<double>>(inst.levy.jump);
      const double nbar = dblexp_first_moment_wedge(j);
      const double lhs = std::abs(jump_exponent(inst.pair, inst.levy, tp, eta) -
                                  jump_exponent(inst.pair, inst.levy, t, eta));
      const double bound =
          2.0 * gap * std::exp(3 * T * an) * (eta.squaredNorm() + eta.norm() + 1.0) * nbar;
      worst.record(lhs / bound);
    }
  }
  return {"increment_bounds", worst.below(1.0 + 1e-9),
          "max lhs/bound ratio " + fmt(worst.value) + " over 100 instances (must be <= 1)"};
}

CheckResult check_char_fn_properties() {
  DeterministicRng rng(206);
  Worst worst;
  const Problem<double> problems[] = {gaussian_problem(), kou_problem()};
  for (const auto& problem : problems) {
    const PiecewisePair<double> pair = random_ball_pair(rng, problem, 12);
    const CharComponents<double> comps(pair, problem.levy, problem.law);
    const int d = problem.dim();
    for (int k = 0; k < 200; ++k) {
      const double t = rng.uniform(0.0, problem.horizon);
      const Vector eta = random_vector(rng, d, -6.0, 6.0);
      worst.record(std::abs(comps.cf(t, Vector::Zero(d)) - 1.0));
      const Complex v = comps.cf(t, eta);
      worst.record(std::abs(v) - 1.0);
      worst.record(std::abs(comps.cf(t, Vector(-eta)) - std::conj(v)));
    }
  }
  return {"char_fn_normalization_modulus_symmetry", worst.below(1e-10),
          "worst deviation " + fmt(worst.value) + " (tol 1e-10)"};
}

CheckResult check_ball_preservation() {
  DeterministicRng rng(207);
  Worst worst;
  const BenchmarkCase<double> cases[] = {make_gaussian_case<double>(), make_kou_case<double>(),
                                         make_multidim_case<double>(2)};
  for (const auto& bc : cases) {
    const Problem<double> problem = bc.problem();
    const double na = drift_sup_norm_a(problem.drift);
    const double nb = drift_sup_norm_b(problem.drift);
    for (int k = 0; k < 20; ++k) {
      const PiecewisePair<double> pair = random_ball_pair(rng, problem, 8);
      const CharComponents<double> comps(pair, problem.levy, problem.law);
      const double t = rng.uniform(1e-3, problem.horizon);
      const PsiValue<double> psi = psi_trig(problem, comps, t);
      worst.record(spectral_norm<double>(psi.alpha) / std::max(na, 1e-300));
      worst.record(psi.beta.norm() / std::max(nb, 1e-300));
    }
  }
  return {"psi_ball_preservation", worst.below(1.0 + 1e-12),
          "max |Psi| / coefficient sup norm = " + fmt(worst.value) + " (must be <= 1)"};
}

CheckResult check_contraction_ratio() {
  DeterministicRng rng(208);
  const Problem<double> problem = gaussian_problem();
  const double lambda = 50.0;
  const int n = 16;
  Worst worst;
  for (int k = 0; k < 20; ++k) {
    const PiecewisePair<double> g1 = random_ball_pair(rng, problem, n);
    const PiecewisePair<double> g2 = random_ball_pair(rng, problem, n);
    const double denom = weighted_norm(g1, g2, lambda);
    if (denom < 1e-12) continue;
    PicardConfig<double> config;
    config.n_steps = n;
    config.max_iters = 1;
    const CharComponents<double> c1(g1, problem.levy, problem.law);
    const CharComponents<double> c2(g2, problem.levy, problem.law);
    PiecewisePair<double> p1, p2;
    p1.horizon = p2.horizon = problem.horizon;
    for (int i = 1; i <= n; ++i) {
      const double ti = problem.horizon * i / n;
      const PsiValue<double> v1 = psi_trig(problem, c1, ti);
      const PsiValue<double> v2 = psi_trig(problem, c2, ti);
      p1.alpha.push_back(v1.alpha);
      p1.beta.push_back(v1.beta);
      p2.alpha.push_back(v2.alpha);
      p2.beta.push_back(v2.beta);
    }
    worst.record(weighted_norm(p1, p2, lambda) / denom);
  }
  return {"empirical_contraction", worst.value < 1.0,
          "max weighted ratio " + fmt(worst.value) + " at lambda = 50 over 20 pairs (must be < 1)"};
}

CheckResult check_time_lipschitz() {
  DeterministicRng rng(209);
  const Problem<double> problem = gaussian_problem();
  const PiecewisePair<double> pair = random_ball_pair(rng, problem, 32);
  const CharComponents<double> comps(pair, problem.levy, problem.law);
  double best_k = 0;
  for (int k = 0; k < 200; ++k) {
    double t1 = rng.uniform(0.0, problem.horizon), t2 = rng.uniform(0.0, problem.horizon);
    if (std::abs(t1 - t2) < 1e-4) continue;
    const PsiValue<double> a = psi_trig(problem, comps, t1);
    const PsiValue<double> b = psi_trig(problem, comps, t2);
    best_k = std::max(best_k, (a.beta - b.beta).norm() / std::abs(t1 - t2));
  }
  return {"psi_time_lipschitz", std::isfinite(best_k) && best_k < 1e3,
          "fitted Lipschitz constant " + fmt(best_k) + " (finite, < 1e3)"};
}

CheckResult check_rk4_order() {
  const BenchmarkCase<double> bc = make_gaussian_case<double>();
  const auto sup_diff = [&bc](long n_coarse) {
    const OdeBenchmark<double> coarse(bc, n_coarse);
    const OdeBenchmark<double> fine(bc, 2 * n_coarse);
    double out = 0;
    for (long k = 0; k <= n_coarse; ++k) {
      const double t = bc.horizon * static_cast<double>(k) / static_cast<double>(n_coarse);
      out = std::max(out, std::abs(coarse.mean_at(t) - fine.mean_at(t)));
    }
    return out;
  };
  const double d1 = sup_diff(32);
  const double d2 = sup_diff(64);
  const double order = std::log2(d1 / d2);
  return {"benchmark_rk4_order", order >= 3.9, "measured order " + fmt(order) + " (need >= 3.9)"};
}

CheckResult check_ode_richardson() {
  Worst worst;
  for (const auto& bc : {make_gaussian_case<double>(), make_kou_case<double>(), make_multidim_case<double>(2),
                         make_stable_case<double>(2)}) {
    const OdeBenchmark<double> base(bc);
    const OdeBenchmark<double> doubled(bc, 2 * bc.ode_steps);
    for (int k = 0; k <= 64; ++k) {
      const double t = bc.horizon * k / 64.0;
      worst.record(std::abs(base.mean_at(t) - doubled.mean_at(t)));
    }
  }
  return {"benchmark_ode_richardson", worst.below(1e-9),
          "max change on doubling the truth grid " + fmt(worst.value) + " (tol 1e-9)"};
}

CheckResult check_kou_benchmark_consistency() {
  const BenchmarkCase<double> bc = make_kou_case<double>();
  const Problem<double> problem = bc.problem();
  const OdeBenchmark<double> bench(bc);
  const PiecewisePair<double> const_pair =
      PiecewisePair<double>::constant(bc.a * Matrix::Identity(1, 1), Vector::Zero(1), bc.horizon, 1);
  Worst worst;
  Vector one(1);
  one(0) = 1.0;
  for (int k = 1; k <= 40; ++k) {
    const double t = bc.horizon * k / 40.0;
    // compose the factors directly and compare with the attenuation/phase display
    const Matrix c = covariance(const_pair, problem.levy, t);
    const Complex n = jump_exponent(const_pair, problem.levy, t, one);
    const double m = bench.mean_at(t);
    const Complex composed =
        std::exp(Complex(-0.5 * c(0, 0), m) + n) * problem.law.cf(Vector(std::exp(bc.a * t) * one));
    worst.record(std::abs(composed.real() - bench.beta_at(t)));
  }
  return {"kou_char_fn_consistency", worst.below(1e-6),
          "max |composed - display| = " + fmt(worst.value) + " (tol 1e-6)"};
}

CheckResult check_beta_envelope() {
  const BenchmarkCase<double> bc = make_gaussian_case<double>();
  const OdeBenchmark<double> bench(bc);
  Worst worst;
  for (int k = 0; k <= 200; ++k) {
    const double t = bc.horizon * k / 200.0;
    const double envelope = std::exp(-bc.quad_form_at(t) / 2.0) / (1.0 + std::exp(2.0 * bc.a * t));
    worst.record(std::abs(bench.beta_at(t)) / std::max(envelope, 1e-300));
  }
  return {"benchmark_beta_envelope", worst.below(1.0 + 1e-12),
          "max |beta| / envelope = " + fmt(worst.value) + " (must be <= 1)"};
}

CheckResult check_cross_path_atoms() {
  DeterministicRng rng(210);
  const BenchmarkCase<double> bc = make_gaussian_case<double>();
  const Problem<double> trig_problem = bc.problem();
  // same drift written as spectral atoms: a as a mass at 0, cos as masses at +-w
  Problem<double> atom_problem = trig_problem;
  const auto& drift = std::get<ConstantATrigB<double>>(trig_problem.drift);
  SpectralPair<double> spectral;
  spectral.a_atoms.push_back({Vector::Zero(1), drift.A});
  spectral.b_atoms.push_back({drift.w, 0.5 * drift.v});
  spectral.b_atoms.push_back({Vector(-drift.w), 0.5 * drift.v});
  spectral.sup_norm_a = spectral_norm<double>(drift.A);
  spectral.sup_norm_b = drift.v.norm();
  atom_problem.drift = spectral;
  Worst worst;
  QuadratureSpec<double> quad;
  for (int k = 0; k < 10; ++k) {
    const PiecewisePair<double> pair = random_ball_pair(rng, trig_problem, 8);
    const double t = rng.uniform(0.05, 1.0);
    const PsiValue<double> a = psi_trig(trig_problem, pair, t);
    const PsiValue<double> b = psi_fourier(atom_problem, pair, t, quad);
    worst.record(spectral_norm<double>(Matrix(a.alpha - b.alpha)));
    worst.record((a.beta - b.beta).norm());
  }
  return {"cross_path_trig_vs_atoms", worst.below(1e-10),
          "max path disagreement " + fmt(worst.value) + " (tol 1e-10)"};
}

std::vector<CheckResult> run_invariant_suite() {
  return {
      check_cf_properties(),       check_laplace_cf_quadrature(),
      check_levy_exponent_oracle(), check_flow_composition(),
      check_flow_inverse_bound(),  check_apriori_bounds(),
      check_increment_bounds(),    check_char_fn_properties(),
      check_ball_preservation(),   check_contraction_ratio(),
      check_time_lipschitz(),      check_rk4_order(),
      check_ode_richardson(),      check_kou_benchmark_consistency(),
      check_beta_envelope(),       check_cross_path_atoms(),
  };
}

}  // namespace mkv::diag
