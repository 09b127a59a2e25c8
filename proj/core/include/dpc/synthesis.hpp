#pragma once

#include <optional>
#include <string>

#include "dpc/linsys.hpp"
#include "dpc/types.hpp"

namespace dpc {

/// Plant (5) stacked with exosystem (6): xbar = [x_p; x_r].
struct CompositeSystem {
  Matrix Abar;  // blkdiag(A_p, A_r)
  Matrix Bbar;  // [B_p; 0]
  Matrix Cbar;  // [C_p, -C_r]
  Matrix Dp;

  static CompositeSystem build(const StateSpace& plant, const StateSpace& exo);
};

struct RegulatorSolution {
  Matrix X;  // n_p x n_r
  Matrix U;  // m_p x n_r
  double residual = 0.0;
};

struct AssumptionReport {
  bool exosystem_antistable = false;  // A_r has no eigenvalue inside the unit circle
  bool stabilizable = false;          // (A_p, B_p)
  bool detectable = false;            // (Cbar, Abar)
  bool regulator_solvable = false;    // regulator equations at the given tolerance
  bool all() const {
    return exosystem_antistable && stabilizable && detectable && regulator_solvable;
  }
  double min_exo_eigenvalue_mag = 0.0;
  std::complex<double> stabilizability_witness{0, 0};  // PBH-deficient eigenvalue
  std::complex<double> detectability_witness{0, 0};
  double regulator_residual = 0.0;
  std::string summary() const;
};

AssumptionReport check_assumptions(const StateSpace& plant, const StateSpace& exo,
                                   double regulator_tol_scale = 1e-9);

/// Least-squares solve of X A_r = A_p X + B_p U, 0 = C_p X + D_p U - C_r.
/// Throws when the residual exceeds tol_scale * max(1, norms of coefficients).
RegulatorSolution solve_regulator_equations(const StateSpace& plant, const StateSpace& exo,
                                            double tol_scale = 1e-9);

/// Observer-based tracking controller (8):
///   u_p = G x_c,  x_c+ = A_c x_c - L e,  A_c = Abar + L Cbar + (Bbar + L D_p) G.
struct TrackingController {
  Matrix G;   // [G1 G2]
  Matrix L;   // [L1; L2]
  Matrix Ac;
};

TrackingController design_observer_tracking_controller(const StateSpace& plant,
                                                       const StateSpace& exo,
                                                       const Matrix& G1, const Matrix& L,
                                                       double regulator_tol_scale = 1e-9);

/// Privacy-preserving tracking controller (16):
///   u_p = G1 xbar_c + G2 x_r,
///   xbar_c+ = Abar_c xbar_c + Abar_r x_r - L1 e,
/// with Abar_c = A_p + B_p G1 + L1 (C_p + D_p G1) and
///      Abar_r = (B_p + L1 D_p) G2 - L1 C_r.
struct PrivacyController {
  Matrix G1;      // m_p x n_p
  Matrix G2;      // m_p x n_r
  Matrix L1;      // n_p x q_p
  Matrix Abar_c;  // n_p x n_p
  Matrix Abar_r;  // n_p x n_r
  double gamma = 0.0;  // certified H-infinity bound of (Abar_c, -L1, G1, 0)

  /// As the system from e to u_p.
  StateSpace as_system() const;
};

PrivacyController assemble_privacy_controller(const StateSpace& plant, const StateSpace& exo,
                                              const Matrix& G1, const Matrix& L1,
                                              double gamma,
                                              double regulator_tol_scale = 1e-9);

struct PrivacyDesignOptions {
  std::optional<Matrix> G1;          // default: LQR with Q = I, R = I
  std::optional<double> gamma_bar;   // also bound the closed-loop norm
  double regulator_tol_scale = 1e-9;
  double variable_bound = 1e5;       // LMI variable box
};

PrivacyController design_privacy_controller(const StateSpace& plant, const StateSpace& exo,
                                            double gamma,
                                            const PrivacyDesignOptions& opts = {});

/// Output-noise floor for the controller mechanism: lambda_min(Sigma) at least
/// (c (lambda_max^{1/2}(O_inf of (Abar_c, G1)) + gamma) R(eps, delta))^2.
struct PrivacyBudget;
double controller_privacy_noise(const PrivacyController& controller,
                                const PrivacyBudget& budget);

/// Observer gain for (Abar, Cbar) via the dual Riccati equation.
Matrix dual_lqr_observer_gain(const Matrix& A, const Matrix& C);

}  // namespace dpc
