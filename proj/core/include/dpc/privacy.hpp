#pragma once

#include <optional>
#include <string>

#include "dpc/linsys.hpp"
#include "dpc/types.hpp"

namespace dpc {

/// (epsilon, delta) target with adjacency bound c under the p norm.
struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 0.01;
  double c = 1.0;
  int p = 2;

  /// Gaussian paths need 0 < delta < 1/2; Laplace paths use delta = 0, p = 1.
  void validate_gaussian() const;
  void validate_laplace() const;
};

struct GaussianNoiseSpec {
  Vector mean;
  Matrix covariance;  // must be positive definite
};

struct LaplaceNoiseSpec {
  double scale = 0.0;  // per-channel i.i.d. scale b
};

struct MechanismReport {
  bool passed = false;
  double achieved_floor = 0.0;   // e.g. lambda_max^{-1/2}(O_Sigma) or lambda_min^{1/2}(Sigma)
  double required_floor = 0.0;   // c R(eps,delta) side
  double margin = 0.0;           // achieved - required; >= 0 iff passed
  double achievable_epsilon = 0.0;
  int horizon_t = 0;
  Vector eigenvalues;            // spectrum the verdict was computed from
  std::string detail;
};

/// Gaussian tail Q(w) and its inverse (Newton on the tail with a rational
/// initial guess, tolerance 1e-12).
double q_function(double w);
double q_inverse(double delta);

/// R(eps,delta) = (Q^{-1}(delta) + sqrt(Q^{-1}(delta)^2 + 2 eps)) / (2 eps).
double r_value(double epsilon, double delta);

/// Smallest eps with R(eps, delta) <= target (R is strictly decreasing).
double r_inverse(double target, double delta);

/// Output-noise Gaussian test (finite-T variant when T is given):
/// pass iff lambda_max^{-1/2}(O_{Sigma,t,T or t}) >= c R(eps,delta).
MechanismReport verify_output_gaussian(const StateSpace& sys, const Matrix& Sigma,
                                       const PrivacyBudget& budget, int t,
                                       std::optional<int> T = std::nullopt);

/// i.i.d. threshold sigma = c lambda_max^{1/2}(O_{I,t}) R(eps,delta).
double min_iid_sigma(const StateSpace& sys, const PrivacyBudget& budget, int t);

enum class StableBoundVariant { full, public_initial_state, public_input };

/// Stable-system test:
/// pass iff lambda_min^{1/2}(Sigma) >= c (lambda_max^{1/2}(O_inf) + gamma) R.
MechanismReport verify_stable_gaussian(const StateSpace& sys, const Matrix& Sigma,
                                       const PrivacyBudget& budget,
                                       StableBoundVariant variant = StableBoundVariant::full);

/// Input-noise floor on lambda_min(Sigma_bar_1); system independent.
double calibrate_input_gaussian(const PrivacyBudget& budget);

/// Sigma_bar_1 = O_{Sigma,t,T}^{-1}: the input-noise covariance whose mechanism
/// has the same privacy level as output noise Sigma.
Matrix equivalent_input_covariance(const StateSpace& sys, const Matrix& Sigma, int t, int T);

/// Laplace threshold b = c |[O_t N_t]|_1 / eps (induced 1-norm).
double laplace_scale(const StateSpace& sys, const PrivacyBudget& budget, int t);

/// Smallest eps at which the output-noise condition holds with the given noise,
/// by bisection on eps in [1e-8, 1e8].
double achievable_epsilon(const StateSpace& sys, const Matrix& Sigma, double delta,
                          double c, int t);
double achievable_epsilon_iid(const StateSpace& sys, double sigma, double delta,
                              double c, int t);

}  // namespace dpc
