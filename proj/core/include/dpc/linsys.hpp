#pragma once

#include <vector>

#include "dpc/types.hpp"

namespace dpc {

/// Discrete-time LTI quadruple  x+ = A x + B u,  y = C x + D u.
struct StateSpace {
  Matrix A, B, C, D;

  StateSpace() = default;
  StateSpace(Matrix a, Matrix b, Matrix c, Matrix d);

  Eigen::Index n() const { return A.rows(); }  // states
  Eigen::Index m() const { return B.cols(); }  // inputs
  Eigen::Index q() const { return C.rows(); }  // outputs
};

/// Continuous-time rates; discretize with zoh_discretize before analysis.
struct ContinuousStateSpace {
  Matrix A, B, C, D;

  ContinuousStateSpace() = default;
  ContinuousStateSpace(Matrix a, Matrix b, Matrix c, Matrix d);

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index q() const { return C.rows(); }
};

struct Trajectory {
  std::vector<Vector> states;   // x(0..T-1)
  std::vector<Vector> inputs;   // u(0..T-1)
  std::vector<Vector> outputs;  // y(0..T-1)

  std::size_t length() const { return outputs.size(); }
};

Trajectory simulate(const StateSpace& sys, const Vector& x0,
                    const std::vector<Vector>& inputs);

/// Matrix exponential, scaling-and-squaring with Pade order 13.
Matrix expm(const Matrix& A);

/// Exact zero-order-hold discretization via the augmented-matrix exponential.
StateSpace zoh_discretize(const ContinuousStateSpace& csys, double dt);

struct DareSolution {
  Matrix P;  // stabilizing solution
  Matrix K;  // gain, u = -K x stabilizes
  double residual = 0.0;
  int iterations = 0;
};

/// Discrete algebraic Riccati equation via the structure-preserving doubling
/// iteration (tolerance 1e-14 on the iterate difference, max 200 rounds).
DareSolution dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

/// Discrete Lyapunov equation A' X A - X + Q = 0 (requires rho(A) < 1).
Matrix dlyap(const Matrix& A, const Matrix& Q);

struct PrivacyController;         // synthesis.hpp
struct ClosedLoop {
  /// States ordered (plant, controller, exosystem). Inputs are the injected
  /// noise channels (w_e on the measured error, then w_u on u_p); outputs are
  /// stacked (y_p, u_p, e).
  StateSpace sys;
  Eigen::Index n_plant = 0, n_ctrl = 0, n_exo = 0;
};

ClosedLoop close_loop(const StateSpace& plant, const PrivacyController& controller,
                      const StateSpace& exo);

}  // namespace dpc
