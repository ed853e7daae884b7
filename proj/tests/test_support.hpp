#ifndef PERTSOLVE_TEST_SUPPORT_HPP
#define PERTSOLVE_TEST_SUPPORT_HPP

// Shared fixtures for the unit tests and the acceptance binary.

#include "pertsolve/kernel.hpp"

#include <cmath>
#include <random>

namespace pertsolve::testing {

inline DenseMatrix random_orthonormal(Index m, Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  DenseMatrix X(m, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < m; ++i) X(i, j) = g(rng);
  Eigen::HouseholderQR<DenseMatrix> qr(X);
  return qr.householderQ() * DenseMatrix::Identity(m, k);
}

/// U diag(s) V^T with s geometric from 1 down to `smallest`.
inline DenseMatrix geometric_spectrum(Index m, Index n, double smallest,
                                      std::mt19937_64& rng) {
  const Index k = std::min(m, n);
  Eigen::VectorXd s(k);
  for (Index i = 0; i < k; ++i) {
    s[i] = std::pow(smallest, k > 1 ? static_cast<double>(i) / (k - 1) : 0.0);
  }
  return random_orthonormal(m, k, rng) * s.asDiagonal() *
         random_orthonormal(n, k, rng).transpose();
}

/// Log-kernel interactions between two well-separated random clusters.
inline DenseMatrix separated_clusters(Index m, Index n, double separation,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  DenseMatrix W(m, n);
  Eigen::Matrix2Xd x(2, m), y(2, n);
  for (Index i = 0; i < m; ++i) x.col(i) = Point(u(rng), u(rng));
  for (Index j = 0; j < n; ++j) y.col(j) = Point(separation + u(rng), u(rng));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) W(i, j) = fundamental_solution(x.col(i), y.col(j));
  return W;
}

/// Structured test matrix number `i` of a reproducible family mixing exact
/// low rank, geometric spectra and kernel blocks, in varied shapes.
inline DenseMatrix structured_matrix(int i, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> dim(20, 120);
  const Index m = dim(rng), n = dim(rng);
  switch (i % 4) {
    case 0: {
      std::uniform_int_distribution<Index> rk(1, std::min(m, n) / 2);
      const Index k = rk(rng);
      return random_orthonormal(m, k, rng) * DenseMatrix::Random(k, k) *
             random_orthonormal(n, k, rng).transpose();
    }
    case 1:
      return geometric_spectrum(m, n, 1e-15, rng);
    case 2:
      return geometric_spectrum(m, n, std::pow(10.0, -8.0 - (i % 7)), rng);
    default: {
      std::uniform_real_distribution<double> sep(1.5, 4.0);
      return separated_clusters(m, n, sep(rng), rng);
    }
  }
}

inline double relative_frobenius(const DenseMatrix& a, const DenseMatrix& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace pertsolve::testing

#endif  // PERTSOLVE_TEST_SUPPORT_HPP
