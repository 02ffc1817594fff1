#include "mkv/linear_flow.hpp"

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

PiecewisePair<double> random_pair(DeterministicRng& rng, int d, int n, double scale = 0.8) {
  PiecewisePair<double> pair;
  pair.horizon = 1.0;
  for (int i = 0; i < n; ++i) {
    Matrix a(d, d);
    Vector b(d);
    for (int r = 0; r < d; ++r) {
      b(r) = rng.uniform(-1.0, 1.0);
      for (int c = 0; c < d; ++c) a(r, c) = rng.uniform(-scale, scale);
    }
    pair.alpha.push_back(a);
    pair.beta.push_back(b);
  }
  return pair;
}

Vector scalar1(double x) {
  Vector v(1);
  v(0) = x;
  return v;
}

}  // namespace

TEST_CASE("piecewise pair evaluates with the left-limit convention") {
  PiecewisePair<double> pair;
  pair.horizon = 1.0;
  for (int i = 1; i <= 4; ++i) {
    pair.alpha.push_back(static_cast<double>(i) * Matrix::Identity(1, 1));
    pair.beta.push_back(static_cast<double>(i) * Vector::Ones(1));
  }
  CHECK(pair.alpha_at(0.0)(0, 0) == 1.0);   // first interval
  CHECK(pair.alpha_at(0.1)(0, 0) == 1.0);
  CHECK(pair.alpha_at(0.25)(0, 0) == 1.0);  // grid node: value from the left
  CHECK(pair.alpha_at(0.26)(0, 0) == 2.0);
  CHECK(pair.alpha_at(1.0)(0, 0) == 4.0);
  CHECK(pair.sup_norm() == doctest::Approx(4.0));
}

TEST_CASE("flow of a zero generator is the identity") {
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(3, 3), Vector::Zero(3), 1.0, 5);
  CHECK(spectral_norm<double>(Matrix(flow(pair, 0.2, 0.9) - Matrix::Identity(3, 3))) < 1e-15);
}

TEST_CASE("scalar constant flow is the exponential") {
  const double a = 0.7;
  const auto pair = PiecewisePair<double>::constant(a * Matrix::Identity(1, 1), Vector::Zero(1), 1.0, 8);
  CHECK(flow(pair, 0.15, 0.85)(0, 0) == doctest::Approx(std::exp(a * 0.7)).epsilon(1e-12));
}

TEST_CASE("flow rejects reversed time arguments and is the identity at s = t") {
  const auto pair = PiecewisePair<double>::constant(Matrix::Identity(1, 1), Vector::Zero(1), 1.0, 2);
  CHECK_THROWS_AS(flow(pair, 0.8, 0.2), ContractViolation);
  for (double s : {0.0, 0.37, 0.5, 1.0})
    CHECK(spectral_norm<double>(Matrix(flow(pair, s, s) - Matrix::Identity(1, 1))) == 0.0);
}

TEST_CASE("constant-matrix flow matches a high-resolution RK4 integration") {
  DeterministicRng rng(42);
  Matrix a(2, 2);
  a << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
  const auto pair = PiecewisePair<double>::constant(a, Vector::Zero(2), 1.0, 1);
  const Matrix oracle = oracles::rk4(
      Matrix(Matrix::Identity(2, 2)), 0.0, 1.0, 100000,
      [&a](double, const Matrix& phi) { return Matrix(a * phi); });
  CHECK(spectral_norm<double>(Matrix(flow(pair, 0.0, 1.0) - oracle)) < 1e-9);
}

TEST_CASE("piecewise flow matches segment-aligned RK4") {
  DeterministicRng rng(43);
  const auto pair = random_pair(rng, 2, 6);
  const Matrix oracle = oracles::rk4_piecewise(
      pair, Matrix(Matrix::Identity(2, 2)), 1.0, 60000,
      [&pair](double t, const Matrix& phi) { return Matrix(pair.alpha_at(t) * phi); });
  CHECK(spectral_norm<double>(Matrix(flow(pair, 0.0, 1.0) - oracle)) < 1e-9);
}

TEST_CASE("scalar covariance has the exact linear-SDE variance") {
  const double a = 1.5, sigma = 0.8;
  const auto pair = PiecewisePair<double>::constant(a * Matrix::Identity(1, 1), Vector::Zero(1), 1.0, 4);
  LevyTriplet<double> levy;
  levy.sigma = sigma * Matrix::Identity(1, 1);
  for (double t : {0.25, 0.5, 1.0}) {
    const double expected = sigma * sigma / (2 * a) * (std::exp(2 * a * t) - 1.0);
    CHECK(covariance(pair, levy, t)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("zero generator covariance is t theta") {
  LevyTriplet<double> levy;
  Matrix s(2, 2);
  s << 1.0, 0.2, 0.0, 0.9;
  levy.sigma = s;
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(2, 2), Vector::Zero(2), 1.0, 3);
  const Matrix c = covariance(pair, levy, 0.7);
  CHECK(spectral_norm<double>(Matrix(c - 0.7 * levy.theta())) < 1e-13);
}

TEST_CASE("matrix covariance matches RK4 on the Lyapunov equation") {
  DeterministicRng rng(44);
  Matrix a(2, 2);
  a << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
  LevyTriplet<double> levy;
  Matrix s(2, 2);
  s << 1.0, 0.1, -0.2, 0.8;
  levy.sigma = s;
  const Matrix theta = levy.theta();
  const auto pair = PiecewisePair<double>::constant(a, Vector::Zero(2), 1.0, 1);
  const Matrix oracle =
      oracles::rk4(Matrix(Matrix::Zero(2, 2)), 0.0, 1.0, 100000, [&](double, const Matrix& c) {
        return Matrix(a * c + c * a.transpose() + theta);
      });
  CHECK(spectral_norm<double>(Matrix(covariance(pair, levy, 1.0) - oracle)) < 1e-8);
}

TEST_CASE("mean is zero without a source and exact for scalar constants") {
  const double a = 0.6, c = 1.1;
  const auto pair0 = PiecewisePair<double>::constant(a * Matrix::Identity(1, 1), Vector::Zero(1), 1.0, 4);
  CHECK(mean(pair0, 0.8).norm() == 0.0);
  const auto pair = PiecewisePair<double>::constant(a * Matrix::Identity(1, 1), c * Vector::Ones(1), 1.0, 4);
  for (double t : {0.3, 1.0})
    CHECK(mean(pair, t)(0) == doctest::Approx(c / a * (std::exp(a * t) - 1.0)).epsilon(1e-12));
}

TEST_CASE("piecewise mean matches segment-aligned RK4") {
  DeterministicRng rng(45);
  const auto pair = random_pair(rng, 3, 7);
  const Vector oracle = oracles::rk4_piecewise(pair, Vector(Vector::Zero(3)), 1.0, 40000,
                                               [&pair](double t, const Vector& m) {
                                                 return Vector(pair.alpha_at(t) * m + pair.beta_at(t));
                                               });
  CHECK((mean(pair, 1.0) - oracle).norm() < 1e-10);
}

TEST_CASE("jump exponent vanishes without jumps and at eta = 0") {
  LevyTriplet<double> none;
  none.sigma = Matrix::Identity(1, 1);
  const auto pair = PiecewisePair<double>::constant(Matrix::Identity(1, 1), Vector::Zero(1), 1.0, 4);
  CHECK(jump_exponent(pair, none, 0.7, scalar1(2.0)) == Complex(0, 0));

  LevyTriplet<double> kou;
  kou.sigma = Matrix::Identity(1, 1);
  kou.jump = CompoundPoissonDoubleExp<double>{0.8, 0.5, 0.6, 0.35};
  CHECK(std::abs(jump_exponent(pair, kou, 0.7, scalar1(0.0))) < 1e-15);
}

TEST_CASE("constant-coefficient Kou exponent equals the logarithmic closed form") {
  const double a = 0.25, lambda = 0.8, l1 = 0.5, l2 = 0.6, p = 0.35;
  LevyTriplet<double> kou;
  kou.sigma = Matrix::Identity(1, 1);
  kou.jump = CompoundPoissonDoubleExp<double>{lambda, l1, l2, p};
  const auto pair = PiecewisePair<double>::constant(a * Matrix::Identity(1, 1), Vector::Zero(1), 1.0, 4);
  const Complex i(0, 1);
  for (double t : {0.3, 1.0}) {
    for (double eta : {-2.0, 0.7, 1.0}) {
      const Complex expected =
          p * lambda / a * std::log((i * eta - l1) / (i * eta * std::exp(a * t) - l1)) +
          (1.0 - p) * lambda / a * std::log((i * eta + l2) / (i * eta * std::exp(a * t) + l2));
      CHECK(std::abs(jump_exponent(pair, kou, t, scalar1(eta)) - expected) < 1e-12);
    }
  }
}

TEST_CASE("Kou closed form agrees with the time-quadrature path") {
  DeterministicRng rng(46);
  LevyTriplet<double> kou;
  kou.sigma = Matrix::Identity(1, 1);
  kou.jump = CompoundPoissonDoubleExp<double>{0.8, 0.5, 0.6, 0.35};
  const auto pair = random_pair(rng, 1, 6);
  const CharComponents<double> comps(pair, kou, laplace_initial_law<double>());
  REQUIRE(comps.kou_closed_form());
  for (double t : {0.13, 0.5, 1.0})
    for (double eta : {-4.0, -1.0, 0.5, 2.0, 8.0}) {
      const Complex closed = comps.jump_exp(t, scalar1(eta));
      const Complex quad = comps.jump_exp_quadrature(t, scalar1(eta));
      CHECK(std::abs(closed - quad) < 1e-6);
    }
}

TEST_CASE("jump exponent derivatives match finite differences in eta") {
  DeterministicRng rng(49);
  LevyTriplet<double> kou;
  kou.sigma = Matrix::Identity(1, 1);
  kou.jump = CompoundPoissonDoubleExp<double>{0.8, 0.5, 0.6, 0.35};
  const auto pair = random_pair(rng, 1, 5);
  const CharComponents<double> comps(pair, kou, laplace_initial_law<double>());
  const double t = 0.8, h = 1e-4;
  for (double eta : {-1.5, 0.4, 2.0}) {
    const auto n_at = [&](double e) { return comps.jump_exp(t, scalar1(e)); };
    const Complex fd1 = (n_at(eta + h) - n_at(eta - h)) / (2 * h);
    CHECK(std::abs(comps.jump_exp_derivative(t, 0, 1, scalar1(eta)) - fd1) < 1e-6);
    const Complex fd2 = (n_at(eta + h) - 2.0 * n_at(eta) + n_at(eta - h)) / (h * h);
    CHECK(std::abs(comps.jump_exp_derivative(t, 0, 2, scalar1(eta)) - fd2) < 1e-5);
  }
  // unsupported for custom exponents
  LevyTriplet<double> custom;
  custom.sigma = Matrix::Identity(1, 1);
  CustomExponent<double> ce;
  ce.exponent = [](const Vector&) { return Complex(0, 0); };
  custom.jump = ce;
  const CharComponents<double> ccomps(pair, custom, laplace_initial_law<double>());
  CHECK_THROWS_AS(ccomps.jump_exp_derivative(t, 0, 1, scalar1(1.0)), ConfigurationError);
}

TEST_CASE("near-zero coefficients fall back to the flat jump integral") {
  LevyTriplet<double> kou;
  kou.sigma = Matrix::Identity(1, 1);
  kou.jump = CompoundPoissonDoubleExp<double>{1.0, 2.0, 3.0, 0.5};
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 2);
  const auto& j = std::get<CompoundPoissonDoubleExp<double>>(kou.jump);
  // alpha = 0 means n_t(eta) = t f(eta)
  const Complex expected = 0.8 * double_exp_exponent(j, 1.3);
  CHECK(std::abs(jump_exponent(pair, kou, 0.8, scalar1(1.3)) - expected) < 1e-12);
}

TEST_CASE("characteristic function reduces to the initial law at t = 0") {
  DeterministicRng rng(47);
  const auto pair = random_pair(rng, 2, 5);
  LevyTriplet<double> levy;
  levy.sigma = Matrix::Identity(2, 2);
  const auto law = product_laplace_initial_law<double>(2);
  Vector eta(2);
  eta << 0.9, -1.4;
  CHECK(std::abs(char_fn(pair, levy, law, 0.0, eta) - law.cf(eta)) < 1e-14);
}

TEST_CASE("driftless point-mass marginal is the Brownian characteristic function") {
  const auto pair = PiecewisePair<double>::constant(Matrix::Zero(1, 1), Vector::Zero(1), 1.0, 4);
  LevyTriplet<double> levy;
  levy.sigma = 0.9 * Matrix::Identity(1, 1);
  const auto law = point_mass_initial_law<double>(Vector::Zero(1));
  for (double t : {0.25, 1.0})
    for (double eta : {0.5, 2.0}) {
      const Complex expected = std::exp(Complex(-0.5 * t * 0.81 * eta * eta, 0));
      CHECK(std::abs(char_fn(pair, levy, law, t, scalar1(eta)) - expected) < 1e-13);
    }
}

TEST_CASE("grid-cached evaluators agree with the from-scratch functions") {
  DeterministicRng rng(48);
  const auto pair = random_pair(rng, 2, 9);
  LevyTriplet<double> levy;
  Matrix s(2, 2);
  s << 1.0, 0.3, -0.1, 0.8;
  levy.sigma = s;
  const auto law = product_laplace_initial_law<double>(2);
  const CharComponents<double> comps(pair, levy, law);
  for (double t : {0.0, 1.0 / 9.0, 0.37, 5.0 / 9.0, 0.995, 1.0}) {
    CHECK(spectral_norm<double>(Matrix(comps.phi0(t) - flow(pair, 0.0, t))) < 1e-12);
    CHECK(spectral_norm<double>(Matrix(comps.cov(t) - covariance(pair, levy, t))) < 1e-12);
    CHECK((comps.mean_at(t) - mean(pair, t)).norm() < 1e-12);
    Vector eta(2);
    eta << 1.1, -0.6;
    CHECK(std::abs(comps.cf(t, eta) - char_fn(pair, levy, law, t, eta)) < 1e-12);
  }
  CHECK(spectral_norm<double>(Matrix(comps.phi(2.0 / 9.0, 7.0 / 9.0) - flow(pair, 2.0 / 9.0, 7.0 / 9.0))) <
        1e-12);
}

TEST_CASE("theta function handles small, large, and singular generators") {
  using mkv::detail::theta_phi1;
  // small block: series
  Matrix z(2, 2);
  z << 1e-4, 2e-5, -3e-5, 5e-4;
  const Matrix small = theta_phi1<double>(z);
  const Matrix expected_small = Matrix::Identity(2, 2) + 0.5 * z + z * z / 6.0 + z * z * z / 24.0;
  CHECK(spectral_norm<double>(Matrix(small - expected_small)) < 1e-14);
  // singular generator with a zero eigenvalue
  Matrix zs(2, 2);
  zs << 0.0, 0.0, 0.0, 2.0;
  const Matrix big = theta_phi1<double>(zs);
  CHECK(big(0, 0) == doctest::Approx(1.0));  // limit (e^0 - 1)/0
  CHECK(big(1, 1) == doctest::Approx((std::exp(2.0) - 1.0) / 2.0));
  // scalar branch
  Matrix z1(1, 1);
  z1(0, 0) = 1.7;
  CHECK(theta_phi1<double>(z1)(0, 0) == doctest::Approx((std::exp(1.7) - 1.0) / 1.7));
}

TEST_CASE("flow is scalar-generic") {
  using MatrixF = MatrixX<float>;
  using VectorF = VectorX<float>;
  const auto pair = PiecewisePair<float>::constant(0.5f * MatrixF::Identity(1, 1), VectorF::Zero(1), 1.0f, 4);
  CHECK(flow(pair, 0.0f, 1.0f)(0, 0) == doctest::Approx(std::exp(0.5f)).epsilon(1e-5));
  const auto pard = PiecewisePair<long double>::constant(
      MatrixX<long double>::Identity(2, 2), VectorX<long double>::Zero(2), 1.0L, 2);
  CHECK(static_cast<double>(flow(pard, 0.0L, 1.0L)(0, 0)) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}
