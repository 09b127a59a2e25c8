#pragma once

#include <optional>
#include <vector>

#include "dpc/linsys.hpp"
#include "dpc/types.hpp"

namespace dpc {

/// Stacked output map O_t, full Markov map N_t and its left (T+1)m-column
/// submatrix N_{t,T}.
struct StackedMaps {
  Matrix O;       // (t+1)q x n
  Matrix N_full;  // (t+1)q x (t+1)m
  Matrix N_sub;   // (t+1)q x (T+1)m
  int t = 0;
  int T = 0;
};

Matrix stack_output_map(const StateSpace& sys, int t);
StackedMaps stack_markov_map(const StateSpace& sys, int t, int T);

/// Enforces the standing assumption [O_t N_t] != 0 (checked at use).
void require_nontrivial_maps(const Matrix& O, const Matrix& N);

struct GramianReport {
  Matrix gramian;               // (n+(T+1)m) square, PSD
  Vector eigenvalues;           // ascending
  Matrix eigenvectors;          // orthonormal columns, matching order
  /// Row i: norms of eigenvector i's components on the x0 block and on each
  /// u(k) block, k = 0..T.
  Matrix block_projections;
  int t = 0, T = 0;
};

/// O_{Sigma,t,T} = [O N_{t,T}]' Sigma^{-1} [O N_{t,T}], formed via the
/// Cholesky factor of Sigma. Sigma = I gives the strong input observability
/// Gramian.
GramianReport weighted_gramian(const StateSpace& sys, int t, int T, const Matrix& Sigma);
GramianReport weighted_gramian_iid(const StateSpace& sys, int t, int T, double sigma = 1.0);

struct SioReport {
  bool observable = false;
  Eigen::Index rank = 0;
  Eigen::Index required = 0;
  std::vector<double> singular_values;
};

/// Rank test for strong input observability: rank [O_2n N_{2n,n}] == n + (n+1)m.
/// Horizons overridable (any T >= n, t >= T + n gives the same verdict).
SioReport is_strongly_input_observable(const StateSpace& sys,
                                       std::optional<int> T = std::nullopt,
                                       std::optional<int> t = std::nullopt,
                                       std::optional<double> rank_tol = std::nullopt);

/// O_inf = sum_k (C A^k)' C A^k for Schur-stable A, via the Lyapunov equation.
Matrix infinite_observability_gramian(const StateSpace& sys);

struct InputEstimate {
  Vector x0;
  Vector U;        // stacked u(0..T)
  double residual; // weighted cost J at the minimizer
};

/// Weighted least squares for (x0, U_T) from a stacked output window, assuming
/// u(tau) = 0 for tau > T.
InputEstimate least_squares_input_estimate(const StateSpace& sys, const Vector& Y,
                                           int t, int T, const Matrix& Sigma);

/// Orthonormal basis of the orthogonal complement of range([O_t N_{t,T}]);
/// [O N Nbar] is square nonsingular for strongly input observable systems.
Matrix output_null_complement(const StateSpace& sys, int t, int T);

}  // namespace dpc
