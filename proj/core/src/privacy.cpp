#include "dpc/privacy.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "dpc/hinf.hpp"
#include "dpc/observability.hpp"

namespace dpc {

void PrivacyBudget::validate_gaussian() const {
  if (!(epsilon > 0)) throw_validation("budget: epsilon must be positive");
  if (!(delta > 0.0 && delta < 0.5))
    throw_validation("budget: Gaussian mechanisms need 0 < delta < 1/2");
  if (!(c > 0)) throw_validation("budget: adjacency bound c must be positive");
  if (p != 2) throw_validation("budget: Gaussian bounds use the 2-norm adjacency");
}

void PrivacyBudget::validate_laplace() const {
  if (!(epsilon > 0)) throw_validation("budget: epsilon must be positive");
  if (delta != 0.0) throw_validation("budget: Laplace mechanism is (eps,0)-DP");
  if (!(c > 0)) throw_validation("budget: adjacency bound c must be positive");
  if (p != 1) throw_validation("budget: Laplace bound uses the 1-norm adjacency");
}

double q_function(double w) { return 0.5 * std::erfc(w / std::sqrt(2.0)); }

namespace {

// Acklam's rational approximation of the standard normal quantile.
double norm_quantile_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  const double q = std::sqrt(-2 * std::log(1 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
}

double normal_pdf(double w) {
  return std::exp(-0.5 * w * w) / std::sqrt(2.0 * M_PI);
}

}  // namespace

double q_inverse(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw_validation("q_inverse: delta must be in (0,1)");
  double w = -norm_quantile_approx(delta);  // Q^{-1}(d) = -Phi^{-1}(d)
  for (int it = 0; it < 60; ++it) {
    const double f = q_function(w) - delta;
    const double step = f / normal_pdf(w);
    w += step;
    if (std::abs(step) < 1e-12 * std::max(1.0, std::abs(w))) break;
  }
  return w;
}

double r_value(double epsilon, double delta) {
  if (!(epsilon > 0)) throw_validation("r_value: epsilon must be positive");
  if (!(delta > 0.0 && delta < 0.5)) throw_validation("r_value: delta must be in (0, 1/2)");
  const double qi = q_inverse(delta);
  return (qi + std::sqrt(qi * qi + 2.0 * epsilon)) / (2.0 * epsilon);
}

double r_inverse(double target, double delta) {
  if (!(target > 0)) throw_validation("r_inverse: target must be positive");
  double lo = 1e-8, hi = 1e8;
  if (r_value(lo, delta) < target)
    return lo;  // already below target at the smallest epsilon
  if (r_value(hi, delta) > target)
    throw_infeasible("r_inverse: no epsilon in [1e-8, 1e8] reaches the target R");
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (r_value(mid, delta) > target ? lo : hi) = mid;
    if (hi / lo < 1.0 + 1e-12) break;
  }
  return std::sqrt(lo * hi);
}

namespace {

double lambda_max_weighted(const StateSpace& sys, const Matrix& Sigma, int t, int T,
                           Vector* spectrum) {
  const GramianReport rep = weighted_gramian(sys, t, T, Sigma);
  if (spectrum) *spectrum = rep.eigenvalues;
  return rep.eigenvalues(rep.eigenvalues.size() - 1);
}

}  // namespace

MechanismReport verify_output_gaussian(const StateSpace& sys, const Matrix& Sigma,
                                       const PrivacyBudget& budget, int t,
                                       std::optional<int> T_opt) {
  budget.validate_gaussian();
  const int n = static_cast<int>(sys.n());
  int T = T_opt.value_or(t);
  if (T_opt && (T < n || t < T + n))
    throw_validation("verify_output_gaussian: finite-T variant needs T >= n, t >= T+n");
  MechanismReport rep;
  rep.horizon_t = t;
  const double lmax = lambda_max_weighted(sys, Sigma, t, T, &rep.eigenvalues);
  rep.achieved_floor = (lmax > 0) ? 1.0 / std::sqrt(lmax)
                                  : std::numeric_limits<double>::infinity();
  rep.required_floor = budget.c * r_value(budget.epsilon, budget.delta);
  rep.margin = rep.achieved_floor - rep.required_floor;
  rep.passed = rep.margin >= 0.0;
  rep.achievable_epsilon =
      (lmax > 0) ? r_inverse(rep.achieved_floor / budget.c, budget.delta) : 0.0;
  rep.detail = "output-noise Gaussian test";
  return rep;
}

double min_iid_sigma(const StateSpace& sys, const PrivacyBudget& budget, int t) {
  budget.validate_gaussian();
  const Eigen::Index rows = (t + 1) * sys.q();
  const double lmax = lambda_max_weighted(sys, Matrix::Identity(rows, rows), t, t, nullptr);
  return budget.c * std::sqrt(lmax) * r_value(budget.epsilon, budget.delta);
}

MechanismReport verify_stable_gaussian(const StateSpace& sys, const Matrix& Sigma,
                                       const PrivacyBudget& budget,
                                       StableBoundVariant variant) {
  budget.validate_gaussian();
  if (!is_schur_stable(sys.A))
    throw_validation("verify_stable_gaussian: system must be asymptotically stable");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Sigma + Sigma.transpose()));
  if (es.eigenvalues()(0) <= 0)
    throw_validation("verify_stable_gaussian: Sigma must be positive definite");

  // the O_inf term covers the initial-state difference, the H-infinity term
  // the input difference; a public component drops its term
  double bound = 0.0;
  if (variant != StableBoundVariant::public_initial_state) {
    const Matrix Oinf = infinite_observability_gramian(sys);
    bound += std::sqrt(Eigen::SelfAdjointEigenSolver<Matrix>(Oinf).eigenvalues().maxCoeff());
  }
  if (variant != StableBoundVariant::public_input)
    bound += hinf_norm(sys);

  MechanismReport rep;
  rep.eigenvalues = es.eigenvalues();
  rep.achieved_floor = std::sqrt(es.eigenvalues()(0));
  rep.required_floor = budget.c * bound * r_value(budget.epsilon, budget.delta);
  rep.margin = rep.achieved_floor - rep.required_floor;
  rep.passed = rep.margin >= 0.0;
  rep.achievable_epsilon =
      bound > 0 ? r_inverse(rep.achieved_floor / (budget.c * bound), budget.delta) : 0.0;
  rep.detail = "stable-system bound";
  return rep;
}

double calibrate_input_gaussian(const PrivacyBudget& budget) {
  budget.validate_gaussian();
  const double floor_sqrt = budget.c * r_value(budget.epsilon, budget.delta);
  return floor_sqrt * floor_sqrt;
}

Matrix equivalent_input_covariance(const StateSpace& sys, const Matrix& Sigma, int t, int T) {
  const GramianReport rep = weighted_gramian(sys, t, T, Sigma);
  const double lmin = rep.eigenvalues(0);
  const double lmax = rep.eigenvalues(rep.eigenvalues.size() - 1);
  if (lmin <= default_rank_tol(rep.gramian.rows(), rep.gramian.cols(), lmax))
    throw_infeasible("equivalent_input_covariance: Gramian singular; system not "
                     "strongly input observable at (t,T)");
  Eigen::LLT<Matrix> llt(rep.gramian);
  Matrix inv = llt.solve(Matrix::Identity(rep.gramian.rows(), rep.gramian.cols()));
  return 0.5 * (inv + inv.transpose());
}

double laplace_scale(const StateSpace& sys, const PrivacyBudget& budget, int t) {
  budget.validate_laplace();
  const StackedMaps maps = stack_markov_map(sys, t, t);
  require_nontrivial_maps(maps.O, maps.N_full);
  Matrix ON(maps.O.rows(), maps.O.cols() + maps.N_full.cols());
  ON << maps.O, maps.N_full;
  const double norm1 = ON.cwiseAbs().colwise().sum().maxCoeff();
  return budget.c * norm1 / budget.epsilon;
}

double achievable_epsilon(const StateSpace& sys, const Matrix& Sigma, double delta,
                          double c, int t) {
  if (!(delta > 0.0 && delta < 0.5))
    throw_validation("achievable_epsilon: delta must be in (0, 1/2)");
  const double lmax = lambda_max_weighted(sys, Sigma, t, t, nullptr);
  if (lmax <= 0)
    throw_infeasible("achievable_epsilon: degenerate mechanism, [O N] = 0 direction");
  return r_inverse(1.0 / (c * std::sqrt(lmax)), delta);
}

double achievable_epsilon_iid(const StateSpace& sys, double sigma, double delta,
                              double c, int t) {
  if (!(sigma > 0)) throw_validation("achievable_epsilon_iid: sigma must be positive");
  const Eigen::Index rows = (t + 1) * sys.q();
  return achievable_epsilon(sys, sigma * sigma * Matrix::Identity(rows, rows), delta, c, t);
}

}  // namespace dpc
