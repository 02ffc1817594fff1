#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mkv {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

/// Caller broke a documented precondition (s > t, mismatched grids, wrong variant).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// Problem setup is incomplete for the requested evaluation path.
struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Runtime numerical failure (budget exceeded, non-finite value, lost symmetry).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Largest singular value. This is the matrix norm used for all coefficient
/// bounds; for vectors the Euclidean norm is used throughout.
template <typename Scalar>
Scalar spectral_norm(const MatrixX<Scalar>& m) {
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m);
  return svd.singularValues()(0);
}

template <typename Scalar>
Scalar min_eigenvalue_sym(const MatrixX<Scalar>& m) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <typename Scalar>
bool is_diagonal(const MatrixX<Scalar>& m, Scalar tol) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && std::abs(m(i, j)) > tol) return false;
  return true;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Pairwise (tree) summation over a buffer. Deterministic for a fixed element
/// order and more accurate than a running sum on long node lists.
template <typename T>
T pairwise_sum(std::vector<T>& buf) {
  if (buf.empty()) return T{};
  std::size_t n = buf.size();
  while (n > 1) {
    const std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i) buf[i] = buf[2 * i] + buf[2 * i + 1];
    if (n % 2 == 1) {
      buf[half] = buf[n - 1];
      n = half + 1;
    } else {
      n = half;
    }
  }
  return buf[0];
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// written to per-index slots; the partition does not affect them.
inline void parallel_for_index(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  if (nw <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nw);
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

/// Deterministic scalar RNG used wherever the library itself needs random
/// draws (seeded benchmark matrices, diagnostics instances). Box-Muller on
/// top of mt19937_64 so the stream does not depend on the standard library's
/// normal_distribution implementation.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    // 53-bit mantissa uniform in [0,1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mkv
