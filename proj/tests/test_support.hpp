#pragma once

// Shared generators and independent oracles for the test suites. Everything
// here must stay independent of the library code paths it is used to check.

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dpc/linsys.hpp"
#include "dpc/rng.hpp"
#include "dpc/types.hpp"

namespace testsup {

using dpc::Matrix;
using dpc::Vector;

inline Matrix random_matrix(dpc::Rng& rng, Eigen::Index r, Eigen::Index c,
                            double scale = 1.0) {
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = scale * rng.next_normal();
  return M;
}

inline Matrix random_stable(dpc::Rng& rng, Eigen::Index n, double radius = 0.8) {
  Matrix A = random_matrix(rng, n, n);
  const double rho = A.eigenvalues().cwiseAbs().maxCoeff();
  if (rho > 0) A *= radius / rho;
  return A;
}

inline dpc::StateSpace random_system(dpc::Rng& rng, Eigen::Index n, Eigen::Index m,
                                     Eigen::Index q, double radius = 0.8) {
  return dpc::StateSpace(random_stable(rng, n, radius), random_matrix(rng, n, m),
                         random_matrix(rng, q, n), random_matrix(rng, q, m));
}

// --- oracles ---------------------------------------------------------------

/// Matrix exponential through Eigen's unsupported module (independent of the
/// library's own Pade implementation).
inline Matrix expm_oracle(const Matrix& A) { return A.exp(); }

/// Gaussian tail by adaptive Simpson quadrature on [w, w+40].
inline double q_quadrature(double w) {
  auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  const double hi = w + 40.0;
  const int n = 40000;  // plain composite Simpson, plenty for 1e-12
  const double h = (hi - w) / n;
  double s = phi(w) + phi(hi);
  for (int i = 1; i < n; ++i) s += phi(w + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Q^{-1} by bisection against the quadrature.
inline double q_inverse_bisect(double delta) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (q_quadrature(mid) > delta ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double r_oracle(double epsilon, double delta) {
  const double qi = q_inverse_bisect(delta);
  return (qi + std::sqrt(qi * qi + 2.0 * epsilon)) / (2.0 * epsilon);
}

/// Direct recursion, written independently of dpc::simulate.
inline std::vector<Vector> output_recursion(const Matrix& A, const Matrix& B,
                                            const Matrix& C, const Matrix& D,
                                            Vector x, const std::vector<Vector>& u) {
  std::vector<Vector> y;
  for (const auto& uk : u) {
    y.push_back(C * x + D * uk);
    x = A * x + B * uk;
  }
  return y;
}

inline double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace testsup
