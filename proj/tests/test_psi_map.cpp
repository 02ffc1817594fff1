#include "mkv/psi_map.hpp"

#include "mkv/benchmark.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>

using namespace mkv;
using Complex = std::complex<double>;
using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

namespace {

const double kSqrt2Pi = std::sqrt(2.0 * 3.14159265358979323846);

/// Gaussian-profile spectral drift: a(x) = ca exp(-x^2/(2 s^2)) and the same
/// shape for b, in one dimension.
SpectralPair<double> gaussian_spectral_drift(double ca, double cb, double s) {
  SpectralPair<double> drift;
  drift.a_hat = [ca, s](const Vector& eta) {
    MatrixXc<double> m(1, 1);
    m(0, 0) = ca * s * kSqrt2Pi * std::exp(-0.5 * s * s * eta(0) * eta(0));
    return m;
  };
  drift.b_hat = [cb, s](const Vector& eta) {
    VectorXc<double> v(1);
    v(0) = cb * s * kSqrt2Pi * std::exp(-0.5 * s * s * eta(0) * eta(0));
    return v;
  };
  drift.sup_norm_a = std::abs(ca);
  drift.sup_norm_b = std::abs(cb);
  return drift;
}

Problem<double> gaussian_drift_problem(double mu0, double var0) {
  Problem<double> problem;
  problem.levy.sigma = Matrix::Identity(1, 1);
  problem.law = gaussian_initial_law<double>(mu0 * Vector::Ones(1), var0 * Matrix::Identity(1, 1));
  problem.drift = gaussian_spectral_drift(1.0, 0.5, 0.8);
  problem.horizon = 1.0;
  return problem;
}

}  // namespace

TEST_CASE("trig map at t = 0 is half the direction for the Laplace law") {
  const auto bc = make_gaussian_case<double>();
  const Problem<double> problem = bc.problem();
  const auto pair = PiecewisePair<double>::constant(bc.a * Matrix::Identity(1, 1), Vector::Zero(1), 1.0, 8);
  const PsiValue<double> psi = psi_trig(problem, pair, 0.0);
  CHECK(psi.alpha(0, 0) == doctest::Approx(1.5));
  CHECK(psi.beta(0) == doctest::Approx(0.5).epsilon(1e-12));  // cf_Y(1) = 1/2
}

TEST_CASE("deterministic motionless state gives the full direction") {
  Problem<double> problem;
  problem.levy.sigma = Matrix::Zero(1, 1);  // no diffusion
  problem.law = point_mass_initial_law<double>(Vector::Zero(1));
  ConstantATrigB<double> drift{Matrix::Zero(1, 1), Vector::Ones(1), 2.0 * Vector::Ones(1)};
  problem.drift = drift;
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 4);
  const PsiValue<double> psi = psi_trig(problem, pair, 0.7);
  CHECK(psi.beta(0) == doctest::Approx(2.0).epsilon(1e-14));  // cos(0) = 1
}

TEST_CASE("trig map at the benchmark pair reproduces the reference value") {
  const auto bc = make_gaussian_case<double>();
  const Problem<double> problem = bc.problem();
  const OdeBenchmark<double> bench(bc);
  const int n = 4096;
  PiecewisePair<double> pair;
  pair.horizon = bc.horizon;
  for (int i = 1; i <= n; ++i) {
    // midpoint samples keep the mean integral second-order accurate
    const double tm = bc.horizon * (i - 0.5) / n;
    pair.alpha.push_back(bc.a * Matrix::Identity(1, 1));
    pair.beta.push_back(bench.beta_at(tm) * Vector::Ones(1));
  }
  const PsiValue<double> psi = psi_trig(problem, pair, 1.0);
  CHECK(psi.beta(0) == doctest::Approx(bench.beta_at(1.0)).epsilon(1e-6));
  CHECK(std::abs(psi.beta(0) - bench.beta_at(1.0)) < 1e-6);
}

TEST_CASE("trig map rejects spectral drifts") {
  Problem<double> problem = gaussian_drift_problem(0.0, 1.0);
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 2);
  CHECK_THROWS_AS(psi_trig(problem, pair, 0.5), ContractViolation);
}

TEST_CASE("fourier map matches the closed Gaussian expectation") {
  const double mu0 = 0.3, var0 = 0.5, s = 0.8;
  Problem<double> problem = gaussian_drift_problem(mu0, var0);
  const auto pair =
      PiecewisePair<double>::constant(0.4 * Matrix::Identity(1, 1), 0.2 * Vector::Ones(1), 1.0, 8);
  const double t = 0.7;
  QuadratureSpec<double> quad;
  quad.radius = 14.0;
  quad.nodes_per_axis = 161;
  const PsiValue<double> psi = psi_fourier(problem, pair, t, quad);

  // law of X_t is Gaussian with mean m_t + Phi mu0 and variance C_t + Phi^2 var0
  const double phi = flow(pair, 0.0, t)(0, 0);
  const double mu_t = mean(pair, t)(0) + phi * mu0;
  const double v_t = covariance(pair, problem.levy, t)(0, 0) + phi * phi * var0;
  const double expect_gauss = std::sqrt(s * s / (s * s + v_t)) * std::exp(-mu_t * mu_t / (2 * (s * s + v_t)));
  CHECK(psi.alpha(0, 0) == doctest::Approx(1.0 * expect_gauss).epsilon(1e-6));
  CHECK(psi.beta(0) == doctest::Approx(0.5 * expect_gauss).epsilon(1e-6));
  CHECK(psi.imag_residue < 1e-10);
  CHECK(!psi.flagged);
}

TEST_CASE("empty spectral data for b yields a zero component") {
  Problem<double> problem = gaussian_drift_problem(0.0, 1.0);
  auto& drift = std::get<SpectralPair<double>>(problem.drift);
  drift.b_hat = nullptr;
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 4);
  QuadratureSpec<double> quad;
  quad.radius = 12.0;
  quad.nodes_per_axis = 129;
  const PsiValue<double> psi = psi_fourier(problem, pair, 0.5, quad);
  CHECK(psi.beta.norm() == 0.0);
}

TEST_CASE("two-dimensional fourier map matches the closed Gaussian expectation") {
  // a(x) = exp(-|x|^2/(2 s^2)) in d = 2 with a Gaussian initial law
  const double s = 0.9;
  Problem<double> problem;
  Matrix sig(2, 2);
  sig << 1.0, 0.2, -0.1, 0.8;
  problem.levy.sigma = sig;
  Vector mu0(2);
  mu0 << 0.3, -0.2;
  Matrix cov0(2, 2);
  cov0 << 0.5, 0.1, 0.1, 0.4;
  problem.law = gaussian_initial_law<double>(mu0, cov0);
  SpectralPair<double> drift;
  drift.a_hat = [s](const Vector& eta) {
    return MatrixXc<double>::Identity(2, 2) *
           std::complex<double>(2.0 * 3.14159265358979323846 * s * s *
                                    std::exp(-0.5 * s * s * eta.squaredNorm()),
                                0.0);
  };
  drift.sup_norm_a = 1.0;
  problem.drift = drift;
  Matrix a(2, 2);
  a << 0.3, 0.1, -0.2, 0.25;
  Vector b(2);
  b << 0.2, -0.1;
  const auto pair = PiecewisePair<double>::constant(a, b, 1.0, 8);
  const double t = 0.6;
  QuadratureSpec<double> quad;
  quad.radius = 10.0;
  quad.nodes_per_axis = 101;
  const PsiValue<double> psi = psi_fourier(problem, pair, t, quad);

  const Matrix phi = flow(pair, 0.0, t);
  const Vector mu_t = mean(pair, t) + phi * mu0;
  const Matrix sigma_t = covariance(pair, problem.levy, t) + phi * cov0 * phi.transpose();
  const Matrix big = sigma_t + s * s * Matrix::Identity(2, 2);
  const double expected = std::sqrt(s * s * s * s / big.determinant()) *
                          std::exp(-0.5 * mu_t.dot(big.inverse() * mu_t));
  CHECK(psi.alpha(0, 0) == doctest::Approx(expected).epsilon(1e-6));
  CHECK(psi.alpha(1, 1) == doctest::Approx(expected).epsilon(1e-6));
  CHECK(std::abs(psi.alpha(0, 1)) < 1e-10);
}

TEST_CASE("two-dimensional damping modes agree on a diagonal flow") {
  // internal cross-mode check of the order-4 damping operator
  Problem<double> problem;
  problem.levy.sigma = Matrix::Identity(2, 2);
  Vector mu0(2);
  mu0 << 0.2, -0.3;
  problem.law = gaussian_initial_law<double>(mu0, Matrix(0.7 * Matrix::Identity(2, 2)));
  SpectralPair<double> drift;
  drift.damped = true;
  drift.a_hat_damped = [](const Vector& eta) {
    return MatrixXc<double>::Identity(2, 2) *
           std::complex<double>(std::exp(-0.4 * eta.squaredNorm()), 0.0);
  };
  drift.sup_norm_a = 2.0;
  problem.drift = drift;
  Matrix a(2, 2);
  a << 0.3, 0.0, 0.0, -0.2;  // diagonal: axis derivatives of the law factor suffice
  const auto pair = PiecewisePair<double>::constant(a, Vector::Zero(2), 1.0, 4);
  QuadratureSpec<double> quad;
  quad.radius = 8.0;
  quad.nodes_per_axis = 81;
  DampingSpec<double> analytic;
  DampingSpec<double> fd;
  fd.mode = DampingSpec<double>::Mode::finite_difference;
  const PsiValue<double> via_analytic = psi_damped(problem, pair, 0.5, quad, analytic);
  const PsiValue<double> via_fd = psi_damped(problem, pair, 0.5, quad, fd);
  CHECK(spectral_norm<double>(Matrix(via_analytic.alpha - via_fd.alpha)) < 1e-4);

  SUBCASE("a mixing flow rejects the analytic mode") {
    Matrix mix(2, 2);
    mix << 0.3, 0.2, -0.1, -0.2;
    const auto mixing_pair = PiecewisePair<double>::constant(mix, Vector::Zero(2), 1.0, 4);
    CHECK_THROWS_AS(psi_damped(problem, mixing_pair, 0.5, quad, analytic), ConfigurationError);
    CHECK_NOTHROW(psi_damped(problem, mixing_pair, 0.5, quad, fd));
  }
}

TEST_CASE("fourier map guards its preconditions") {
  Problem<double> problem = gaussian_drift_problem(0.0, 1.0);
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 4);
  QuadratureSpec<double> quad;
  CHECK_THROWS_AS(psi_fourier(problem, pair, 0.0, quad), ContractViolation);
  quad.node_budget = 16;
  quad.nodes_per_axis = 65;
  CHECK_THROWS_AS(psi_fourier(problem, pair, 0.5, quad), NumericalError);

  // the tensor grid is capped at three dimensions
  Problem<double> wide;
  wide.levy.sigma = Matrix::Identity(4, 4);
  wide.law = product_laplace_initial_law<double>(4);
  SpectralPair<double> drift4;
  drift4.a_hat = [](const Vector&) { return MatrixXc<double>::Identity(4, 4); };
  wide.drift = drift4;
  const auto pair4 = PiecewisePair<double>::constant(Matrix::Zero(4, 4), Vector::Zero(4), 1.0, 2);
  QuadratureSpec<double> quad4;
  CHECK_THROWS_AS(psi_fourier(wide, pair4, 0.5, quad4), ConfigurationError);
}

TEST_CASE("non-symmetric spectral data trips the imaginary-residue flag") {
  // nonzero initial mean makes the kernel genuinely complex
  Problem<double> problem = gaussian_drift_problem(0.4, 1.0);
  auto& drift = std::get<SpectralPair<double>>(problem.drift);
  drift.b_hat = nullptr;
  drift.a_hat = [](const Vector& eta) {
    MatrixXc<double> m(1, 1);
    m(0, 0) = std::exp(-(eta(0) - 0.3) * (eta(0) - 0.3));  // not Hermitian-even
    return m;
  };
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 4);
  QuadratureSpec<double> quad;
  quad.radius = 12.0;
  quad.nodes_per_axis = 257;
  const PsiValue<double> psi = psi_fourier(problem, pair, 0.4, quad);
  CHECK(psi.flagged);
  CHECK(psi.imag_residue > 1e-8);
}

TEST_CASE("damping operator leaves constants untouched") {
  // flat problem: zero coefficients, no diffusion spread at t -> the kernel
  // G is identically one, so L G must be one in both modes
  Problem<double> problem;
  problem.levy.sigma = Matrix::Zero(1, 1);
  problem.law = point_mass_initial_law<double>(Vector::Zero(1));
  SpectralPair<double> drift;
  drift.damped = true;
  drift.b_hat_damped = [](const Vector&) { return VectorXc<double>::Ones(1); };
  problem.drift = drift;
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 2);
  const CharComponents<double> comps(pair, problem.levy, problem.law);
  for (const auto mode : {DampingSpec<double>::Mode::analytic_leibniz,
                          DampingSpec<double>::Mode::finite_difference}) {
    DampingSpec<double> damp;
    damp.mode = mode;
    const mkv::detail::DampedKernel<double> lk(comps, 0.5, damping_order(1), damp);
    for (double eta : {-2.0, 0.0, 1.7}) {
      Vector e(1);
      e(0) = eta;
      CHECK(std::abs(lk(e) - Complex(1.0, 0.0)) < 1e-9);
    }
  }
}

TEST_CASE("damped map matches a direct density quadrature") {
  // a(x) = (1 + x^2) exp(-x^2/2), damped by 1/(1 + x^2)
  Problem<double> problem;
  problem.levy.sigma = Matrix::Identity(1, 1);
  problem.law = gaussian_initial_law<double>(0.2 * Vector::Ones(1), 0.6 * Matrix::Identity(1, 1));
  SpectralPair<double> drift;
  drift.damped = true;
  drift.a_hat_damped = [](const Vector& eta) {
    MatrixXc<double> m(1, 1);
    m(0, 0) = kSqrt2Pi * std::exp(-0.5 * eta(0) * eta(0));
    return m;
  };
  drift.b_hat_damped = [](const Vector& eta) {
    VectorXc<double> v(1);
    v(0) = 0.5 * kSqrt2Pi * std::exp(-0.5 * eta(0) * eta(0));
    return v;
  };
  drift.sup_norm_a = 1.3;
  drift.sup_norm_b = 0.7;
  problem.drift = drift;
  const auto pair =
      PiecewisePair<double>::constant(0.3 * Matrix::Identity(1, 1), -0.1 * Vector::Ones(1), 1.0, 8);
  const double t = 0.5;
  QuadratureSpec<double> quad;
  quad.radius = 14.0;
  quad.nodes_per_axis = 257;
  DampingSpec<double> damp;
  const PsiValue<double> psi = psi_damped(problem, pair, t, quad, damp);

  const double phi = flow(pair, 0.0, t)(0, 0);
  const double mu_t = mean(pair, t)(0) + phi * 0.2;
  const double v_t = covariance(pair, problem.levy, t)(0, 0) + phi * phi * 0.6;
  const auto density = [mu_t, v_t](double x) {
    return std::exp(-(x - mu_t) * (x - mu_t) / (2 * v_t)) / std::sqrt(2 * 3.14159265358979323846 * v_t);
  };
  const double oracle = adaptive_simpson(
      [&](double x) { return (1.0 + x * x) * std::exp(-0.5 * x * x) * density(x); }, mu_t - 40.0, mu_t + 40.0,
      1e-12);
  CHECK(psi.alpha(0, 0) == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(std::abs(psi.alpha(0, 0) - oracle) < 1e-6);

  SUBCASE("finite differences agree with the analytic derivatives") {
    DampingSpec<double> fd;
    fd.mode = DampingSpec<double>::Mode::finite_difference;
    const PsiValue<double> psi_fd = psi_damped(problem, pair, t, quad, fd);
    CHECK(std::abs(psi_fd.alpha(0, 0) - psi.alpha(0, 0)) < 1e-4);
    CHECK(std::abs(psi_fd.beta(0) - psi.beta(0)) < 1e-4);
  }

  SUBCASE("plain fourier evaluation of the undamped transform agrees") {
    // same drift, undamped: a_hat(eta) = sqrt(2 pi) (2 - eta^2) exp(-eta^2/2)
    Problem<double> plain = problem;
    SpectralPair<double> spectral;
    spectral.a_hat = [](const Vector& eta) {
      MatrixXc<double> m(1, 1);
      m(0, 0) = kSqrt2Pi * (2.0 - eta(0) * eta(0)) * std::exp(-0.5 * eta(0) * eta(0));
      return m;
    };
    spectral.sup_norm_a = 1.3;
    plain.drift = spectral;
    const PsiValue<double> via_fourier = psi_fourier(plain, pair, t, quad);
    CHECK(std::abs(via_fourier.alpha(0, 0) - psi.alpha(0, 0)) < 1e-5);
  }
}

TEST_CASE("damping modes agree in the presence of jumps") {
  // the analytic mode differentiates the jump exponent term by term; finite
  // differences see only kernel values, so agreement validates those formulas
  Problem<double> problem;
  problem.levy.sigma = Matrix::Identity(1, 1);
  problem.levy.jump = CompoundPoissonDoubleExp<double>{0.8, 0.5, 0.6, 0.35};
  problem.law = gaussian_initial_law<double>(0.1 * Vector::Ones(1), 0.8 * Matrix::Identity(1, 1));
  SpectralPair<double> drift;
  drift.damped = true;
  drift.a_hat_damped = [](const Vector& eta) {
    MatrixXc<double> m(1, 1);
    m(0, 0) = kSqrt2Pi * std::exp(-0.5 * eta(0) * eta(0));
    return m;
  };
  drift.sup_norm_a = 1.3;
  problem.drift = drift;
  DeterministicRng rng(91);
  PiecewisePair<double> pair;
  pair.horizon = 1.0;
  for (int i = 0; i < 6; ++i) {
    pair.alpha.push_back(rng.uniform(-0.8, 0.8) * Matrix::Identity(1, 1));
    pair.beta.push_back(rng.uniform(-0.5, 0.5) * Vector::Ones(1));
  }
  QuadratureSpec<double> quad;
  quad.radius = 12.0;
  quad.nodes_per_axis = 257;
  DampingSpec<double> analytic;
  DampingSpec<double> fd;
  fd.mode = DampingSpec<double>::Mode::finite_difference;
  const PsiValue<double> a = psi_damped(problem, pair, 0.6, quad, analytic);
  const PsiValue<double> b = psi_damped(problem, pair, 0.6, quad, fd);
  CHECK(std::abs(a.alpha(0, 0) - b.alpha(0, 0)) < 1e-4);
}

TEST_CASE("damped map requires derivative data in analytic mode") {
  Problem<double> problem;
  problem.levy.sigma = Matrix::Identity(1, 1);
  problem.law = stable_one_initial_law<double>(1);  // no derivatives on the axes
  SpectralPair<double> drift;
  drift.damped = true;
  drift.b_hat_damped = [](const Vector& eta) {
    VectorXc<double> v(1);
    v(0) = std::exp(-std::abs(eta(0)));
    return v;
  };
  problem.drift = drift;
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 2);
  QuadratureSpec<double> quad;
  DampingSpec<double> damp;
  CHECK_THROWS_AS(psi_damped(problem, pair, 0.5, quad, damp), ConfigurationError);
}

TEST_CASE("damped trig coefficients reproduce the fast path") {
  // the cos drift damped by 1/(1+x^2): hats are exponential kinks
  const auto bc = make_gaussian_case<double>();
  const Problem<double> trig_problem = bc.problem();
  Problem<double> damped_problem = trig_problem;
  SpectralPair<double> drift;
  drift.damped = true;
  const double pi = 3.14159265358979323846;
  drift.a_hat_damped = [pi, &bc](const Vector& eta) {
    MatrixXc<double> m(1, 1);
    m(0, 0) = bc.a * pi * std::exp(-std::abs(eta(0)));
    return m;
  };
  drift.b_hat_damped = [pi](const Vector& eta) {
    VectorXc<double> v(1);
    v(0) = 0.5 * pi * (std::exp(-std::abs(eta(0) - 1.0)) + std::exp(-std::abs(eta(0) + 1.0)));
    return v;
  };
  drift.sup_norm_a = bc.a;
  drift.sup_norm_b = 1.0;
  damped_problem.drift = drift;

  DeterministicRng rng(77);
  PiecewisePair<double> pair;
  pair.horizon = 1.0;
  for (int i = 0; i < 8; ++i) {
    pair.alpha.push_back(rng.uniform(-1.5, 1.5) * Matrix::Identity(1, 1));
    pair.beta.push_back(rng.uniform(-1.0, 1.0) * Vector::Ones(1));
  }
  QuadratureSpec<double> quad;
  quad.radius = 45.0;
  quad.nodes_per_axis = 32769;  // trapezoid handles the |eta| kinks at h^2
  quad.rule = QuadratureSpec<double>::Rule::trapezoid;
  quad.node_budget = 1LL << 24;
  DampingSpec<double> damp;
  for (double t : {0.3, 0.8}) {
    const PsiValue<double> via_trig = psi_trig(trig_problem, pair, t);
    const PsiValue<double> via_damped = psi_damped(damped_problem, pair, t, quad, damp);
    CHECK(std::abs(via_damped.alpha(0, 0) - via_trig.alpha(0, 0)) < 1e-5);
    CHECK(std::abs(via_damped.beta(0) - via_trig.beta(0)) < 1e-5);
  }
}

TEST_CASE("radius selection solves the pure-Gaussian decay equation") {
  Problem<double> problem;
  problem.levy.sigma = Matrix::Identity(1, 1);
  problem.law = point_mass_initial_law<double>(Vector::Zero(1));
  ConstantATrigB<double> drift{Matrix::Zero(1, 1), Vector::Ones(1), Vector::Ones(1)};
  problem.drift = drift;
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 2);
  const double r = choose_radius(problem, pair, 1.0, 1e-12);
  CHECK(r == doctest::Approx(std::sqrt(2.0 * std::log(1e12))).epsilon(1e-10));
  CHECK(choose_radius(problem, pair, 2.0, 1e-12) < r);         // larger t shrinks the radius
  CHECK(choose_radius(problem, pair, 1.0, 2e-12) < r);         // looser tolerance shrinks it
  CHECK(choose_radius<double>(problem, pair, 0.5, 1e-12) > r); // smaller t grows it
}
