#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpc/linsys.hpp"
#include "dpc/privacy.hpp"
#include "dpc/types.hpp"

namespace dpc {

/// x+ = f(x,u), y = h(x,u) with callable maps; Jacobians optional (finite
/// differences otherwise, central step 1e-6 (1+|x|)).
struct NonlinearSystem {
  Eigen::Index n = 0, m = 0, q = 0;
  std::function<Vector(const Vector&, const Vector&)> f;
  std::function<Vector(const Vector&, const Vector&)> h;
  /// Optional analytic Jacobians: returns {d/dx, d/du}.
  std::function<std::pair<Matrix, Matrix>(const Vector&, const Vector&)> jac_f;
  std::function<std::pair<Matrix, Matrix>(const Vector&, const Vector&)> jac_h;
};

/// Logistic-map built-in: x+ = r x (1-x) + u, y = x.
NonlinearSystem logistic_map(double r);
/// Wraps a linear quadruple as a NonlinearSystem (consistency harness).
NonlinearSystem from_linear(const StateSpace& sys);

/// Stacked output H_t(x0, U_t) by forward simulation.
Vector stack_nonlinear_output(const NonlinearSystem& sys, const Vector& x0,
                              const std::vector<Vector>& inputs);

struct SensitivitySearchConfig {
  int sobol_points = 4096;
  int ascent_starts = 8;
  int nelder_mead_iters = 400;
};

struct NonlinearCalibration {
  double sup_deviation = 0.0;     // sampled sup of |H(x+dx,U+dU) - H(x,U)|_2
  double sigma_floor = 0.0;       // sup * R(eps, delta)   (for Sigma = sigma^2 I)
  double lambda_min_floor = 0.0;  // sigma_floor^2
  Vector worst_direction;         // the (dx0; dU) achieving the sampled sup
  /// The sup is estimated by sampling plus local ascent, so the floor is
  /// computed from a lower bound of the true sup and may be optimistic.
  bool sampled_lower_bound = true;
};

/// Input-dependent Gaussian calibration at (x0, U_t) over the c-adjacency ball.
NonlinearCalibration calibrate_nonlinear_gaussian(const NonlinearSystem& sys,
                                                  const Vector& x0,
                                                  const std::vector<Vector>& inputs,
                                                  const PrivacyBudget& budget,
                                                  const SensitivitySearchConfig& cfg = {});

struct DomainBox {
  Vector x_lo, x_hi;  // state box
  Vector u_lo, u_hi;  // per-step input box
};

/// Laplace floor b = (c/eps) * sup over the box of |dH_t/d(x0,U_t)|_1,
/// sampled sup over per-sample Jacobians.
double nonlinear_laplace_scale(const NonlinearSystem& sys, const Vector& x0,
                               const std::vector<Vector>& inputs,
                               const PrivacyBudget& budget, const DomainBox& box,
                               int samples = 512);

/// Jacobian of the stacked map at (x0, U): (t+1)q x (n + (t+1)m).
Matrix stacked_output_jacobian(const NonlinearSystem& sys, const Vector& x0,
                               const std::vector<Vector>& inputs);

struct KFunction {
  std::function<double(double)> value;
  std::string name;
};

struct IosCertificate {
  std::function<double(const Vector&, const Vector&)> V;
  double lambda = 0.0;  // contraction factor in (0,1)
  double c1 = 0.0;      // output comparison constant, positive
  KFunction sigma1, sigma2;  // class-K input gains
  KFunction alpha2;          // class-K-infinity upper bound on V
  int p = 2;                 // norm index
};

struct IosSampleSpec {
  Vector x_lo, x_hi;
  Vector u_lo, u_hi;
  int samples = 10000;
  /// Tensor grid over (x, x', u, u') instead of a low-discrepancy set
  /// (ceil(samples^(1/d)) points per axis); needs 2n+2m <= 8.
  bool tensor_grid = false;
};

struct IosWitness {
  Vector x, x_prime, u, u_prime;
  double margin = 0.0;
  int condition = 0;  // 1, 2, or 3
};

struct IosCheckReport {
  bool holds_on_samples = false;  // sampled evidence, explicitly not a proof
  double worst_margin_output = 0.0;      // c1|h-h'| <= V + sigma1
  double worst_margin_bound = 0.0;       // V <= alpha2
  double worst_margin_contraction = 0.0; // V(f,f') <= lambda V + sigma2
  std::optional<IosWitness> witness;     // most violated sample, if any
};

IosCheckReport check_incremental_ios(const NonlinearSystem& sys, const IosCertificate& cert,
                                     const IosSampleSpec& spec);

/// Gaussian floor ((alpha(c) + (t+1) gamma(c)) R)^2 for incrementally IOS
/// systems; gains must be class K on [0, c].
double calibrate_ios_gaussian(const KFunction& alpha, const KFunction& gamma,
                              const PrivacyBudget& budget, int t);

namespace detail {
/// Digital (Sobol-type) low-discrepancy sequence; direction numbers generated
/// from brute-forced primitive polynomials with a fixed deterministic stream.
class SobolSequence {
 public:
  explicit SobolSequence(int dim);
  Vector next();  // point in [0,1)^dim

 private:
  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::array<std::uint64_t, 64>> dirs_;
  std::vector<std::uint64_t> state_;
};

/// Nelder-Mead maximization of fn over R^d from a start simplex.
Vector nelder_mead_max(const std::function<double(const Vector&)>& fn, const Vector& start,
                       double initial_step, int max_iters);
}  // namespace detail

}  // namespace dpc
