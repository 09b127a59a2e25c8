#include "dpc/hinf.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace dpc {

namespace {

double sigma_max_at(const StateSpace& sys, double theta) {
  const Eigen::Index n = sys.n();
  const std::complex<double> z(std::cos(theta), std::sin(theta));
  Eigen::MatrixXcd M = z * Eigen::MatrixXcd::Identity(n, n) -
                       sys.A.cast<std::complex<double>>();
  Eigen::MatrixXcd H = sys.C.cast<std::complex<double>>() *
                           M.partialPivLu().solve(sys.B.cast<std::complex<double>>()) +
                       sys.D.cast<std::complex<double>>();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(H);
  return svd.singularValues()(0);
}

double golden_refine(const StateSpace& sys, double lo, double hi, double tol) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = sigma_max_at(sys, c), fd = sigma_max_at(sys, d);
  for (int it = 0; it < 200 && (b - a) > tol; ++it) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - gr * (b - a);
      fc = sigma_max_at(sys, c);
    } else {
      a = c; c = d; fc = fd;
      d = a + gr * (b - a);
      fd = sigma_max_at(sys, d);
    }
  }
  return std::max(fc, fd);
}

}  // namespace

double hinf_norm(const StateSpace& sys, double tol) {
  if (sys.n() == 0) {
    Eigen::JacobiSVD<Matrix> svd(sys.D);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  }
  if (!is_schur_stable(sys.A))
    throw_validation("hinf_norm: system must be Schur stable");

  std::vector<double> grid;
  const int N = 512;
  grid.reserve(N + 4 * sys.n());
  for (int i = 0; i <= N; ++i) grid.push_back(M_PI * i / N);
  // seed with pole angles: resonances of lightly damped modes live there
  const auto eigs = sys.A.eigenvalues();
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    const double ang = std::abs(std::arg(eigs(i)));
    for (double delta : {0.0, 1e-4, -1e-4}) {
      const double th = ang + delta;
      if (th >= 0.0 && th <= M_PI) grid.push_back(th);
    }
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = sigma_max_at(sys, grid[i]);

  double best = *std::max_element(vals.begin(), vals.end());
  const double theta_tol = std::min(1e-9, tol * 1e-2);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool left_ok = (i == 0) || vals[i] >= vals[i - 1];
    const bool right_ok = (i + 1 == grid.size()) || vals[i] >= vals[i + 1];
    if (!(left_ok && right_ok)) continue;
    const double lo = (i == 0) ? grid[0] : grid[i - 1];
    const double hi = (i + 1 == grid.size()) ? grid.back() : grid[i + 1];
    if (hi - lo < theta_tol) continue;
    best = std::max(best, golden_refine(sys, lo, hi, theta_tol));
  }
  return best;
}

namespace {

bool brl_feasible(const StateSpace& sys, double gamma, const SdpOptions& opts) {
  const Eigen::Index n = sys.n(), m = sys.m();
  LmiProblem prob;
  const auto P = prob.add_symmetric("P", n);

  auto pos = prob.make_constraint({n});
  pos.add_identity_term(0, 0, P);
  prob.add_constraint(std::move(pos));

  // [[P - A'PA - C'C, -(A'PB + C'D)], [sym, g^2 I - D'D - B'PB]] > 0
  auto brl = prob.make_constraint({n, m});
  brl.add_identity_term(0, 0, P);
  brl.add_term(0, 0, P, sys.A.transpose(), sys.A, false, -1.0);
  brl.add_const(0, 0, -sys.C.transpose() * sys.C);
  brl.add_term(0, 1, P, sys.A.transpose(), sys.B, false, -1.0);
  brl.add_const(0, 1, -sys.C.transpose() * sys.D);
  brl.add_const(1, 1, gamma * gamma * Matrix::Identity(m, m) -
                          sys.D.transpose() * sys.D);
  brl.add_term(1, 1, P, sys.B.transpose(), sys.B, false, -1.0);
  prob.add_constraint(std::move(brl));

  const SdpSolution sol = sdp_feasible(prob, opts);
  return sol.status == SdpSolution::Status::feasible;
}

}  // namespace

double hinf_norm_brl(const StateSpace& sys, double tol, const SdpOptions& opts_in) {
  if (!is_schur_stable(sys.A))
    throw_validation("hinf_norm_brl: system must be Schur stable");
  SdpOptions opts = opts_in;
  opts.feasibility_tol_scale = std::min(opts.feasibility_tol_scale, 1e-9);

  Eigen::JacobiSVD<Matrix> svd_d(sys.D);
  double lo = svd_d.singularValues().size() ? svd_d.singularValues()(0) : 0.0;
  // crude stable-system bound: sigma(D) + ||C|| ||B|| sum_k ||A^k||
  double series = 0.0;
  Matrix P = Matrix::Identity(sys.n(), sys.n());
  for (int k = 0; k < 100000; ++k) {
    const double nk = P.norm();
    series += nk;
    if (nk < 1e-12) break;
    P = sys.A * P;
  }
  double hi = lo + sys.C.norm() * sys.B.norm() * series + 1e-12;
  if (!brl_feasible(sys, hi * (1 + 1e-9) + 1e-9, opts))
    throw_numerical("hinf_norm_brl: upper bracket not feasible");
  hi = hi * (1 + 1e-9) + 1e-9;
  for (int it = 0; it < 80; ++it) {
    if (hi - lo <= tol * std::max(1e-12, hi) * 0.5) break;
    const double mid = 0.5 * (lo + hi);
    if (brl_feasible(sys, mid, opts))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

ObserverDesignVars add_observer_design_variables(LmiProblem& problem, const StateSpace& plant,
                                const std::optional<Matrix>& L1_fixed) {
  ObserverDesignVars vars;
  vars.P = problem.add_symmetric("P", plant.n());
  if (L1_fixed) {
    if (L1_fixed->rows() != plant.n() || L1_fixed->cols() != plant.q())
      throw_validation("observer design: fixed L1 must be n_p x q_p");
    vars.L1_fixed = L1_fixed;
  } else {
    vars.Lhat = problem.add_matrix("Lhat", plant.n(), plant.q());
  }
  return vars;
}

namespace {

void require_stabilizing(const StateSpace& plant, const Matrix& G1) {
  if (G1.rows() != plant.m() || G1.cols() != plant.n())
    throw_validation("observer design: G1 must be m_p x n_p");
  if (!is_schur_stable(plant.A + plant.B * G1))
    throw_validation("observer design requires A_p + B_p G1 to be Schur stable");
}

// Adds  block(r,c) += P * Left  (Lhat path)  or  P * L1 * Left (fixed path).
void add_lhat_term(LmiProblem::Constraint& con, int r, int c, const ObserverDesignVars& vars,
                   const StateSpace& plant, const Matrix& left, double coeff = 1.0) {
  if (vars.Lhat) {
    con.add_term(r, c, *vars.Lhat, Matrix::Identity(plant.n(), plant.n()), left, false,
                 coeff);
  } else {
    con.add_term(r, c, vars.P, Matrix::Identity(plant.n(), plant.n()),
                 (*vars.L1_fixed) * left, false, coeff);
  }
}

}  // namespace

void add_observer_lmi(LmiProblem& problem, const StateSpace& plant, const Matrix& G1,
                      const ObserverDesignVars& vars) {
  require_stabilizing(plant, G1);
  const Eigen::Index n = plant.n();
  auto con = problem.make_constraint({n, n});
  con.add_identity_term(0, 0, vars.P);
  con.add_identity_term(1, 1, vars.P);
  con.add_term(0, 1, vars.P, Matrix::Identity(n, n), plant.A);
  add_lhat_term(con, 0, 1, vars, plant, plant.C);
  problem.add_constraint(std::move(con));
}

void add_controller_hinf_lmi(LmiProblem& problem, const StateSpace& plant,
                             const Matrix& G1, double gamma, const ObserverDesignVars& vars) {
  require_stabilizing(plant, G1);
  if (!(gamma > 0)) throw_validation("controller H-infinity LMI: gamma must be positive");
  const Eigen::Index n = plant.n(), q = plant.q(), m = plant.m();
  const Matrix AG = plant.A + plant.B * G1;
  const Matrix CDG = plant.C + plant.D * G1;
  // blocks (n, q, n, m):
  // [[P, 0, P13, G1'], [0, g^2 I, -Lhat', 0], [P13', -Lhat, P, 0], [G1, 0, 0, I]]
  // with P13' := P (A_p + B_p G1) + Lhat (C_p + D_p G1).
  auto con = problem.make_constraint({n, q, n, m});
  con.add_identity_term(0, 0, vars.P);
  con.add_const(1, 1, gamma * gamma * Matrix::Identity(q, q));
  con.add_identity_term(2, 2, vars.P);
  con.add_const(3, 3, Matrix::Identity(m, m));
  con.add_const(0, 3, G1.transpose());
  // block (2,0) = P13' = P AG + Lhat CDG; mirrored to (0,2)
  con.add_term(2, 0, vars.P, Matrix::Identity(n, n), AG);
  add_lhat_term(con, 2, 0, vars, plant, CDG);
  // block (2,1) = -Lhat
  add_lhat_term(con, 2, 1, vars, plant, Matrix::Identity(q, q), -1.0);
  problem.add_constraint(std::move(con));
}

void add_strong_stabilizability_lmi(LmiProblem& problem, const StateSpace& plant,
                                    const Matrix& G1, const ObserverDesignVars& vars) {
  require_stabilizing(plant, G1);
  const Eigen::Index n = plant.n();
  const Matrix AG = plant.A + plant.B * G1;
  const Matrix CDG = plant.C + plant.D * G1;
  auto con = problem.make_constraint({n, n});
  con.add_identity_term(0, 0, vars.P);
  con.add_identity_term(1, 1, vars.P);
  // block (1,0) = P13' = P AG + Lhat CDG
  con.add_term(1, 0, vars.P, Matrix::Identity(n, n), AG);
  add_lhat_term(con, 1, 0, vars, plant, CDG);
  problem.add_constraint(std::move(con));
}

void add_closed_loop_hinf_lmi(LmiProblem& problem, const StateSpace& plant,
                              const Matrix& G1, double gamma_bar, const ObserverDesignVars& vars,
                              LmiProblem::VarId Q) {
  require_stabilizing(plant, G1);
  if (!(gamma_bar > 0)) throw_validation("closed-loop LMI: gamma_bar must be positive");
  const Eigen::Index n = plant.n(), q = plant.q(), m = plant.m();
  const Matrix In = Matrix::Identity(n, n);
  const Matrix AG = plant.A + plant.B * G1;
  // blocks (n, n, m, n, n, q); noise input w has dimension m, output y_p has q.
  auto con = problem.make_constraint({n, n, m, n, n, q});
  con.add_identity_term(0, 0, Q);
  con.add_identity_term(1, 1, vars.P);
  con.add_const(2, 2, gamma_bar * gamma_bar * Matrix::Identity(m, m));
  con.add_identity_term(3, 3, Q);
  con.add_identity_term(4, 4, vars.P);
  con.add_const(5, 5, Matrix::Identity(q, q));
  // row 4: [Q A_p, Q B_p G1, Q B_p]
  con.add_term(3, 0, Q, In, plant.A);
  con.add_term(3, 1, Q, In, plant.B * G1);
  con.add_term(3, 2, Q, In, plant.B);
  // row 5: [-Lhat C_p, P25', -Lhat D_p], P25' = P(A_p + B_p G1) + Lhat C_p
  add_lhat_term(con, 4, 0, vars, plant, plant.C, -1.0);
  con.add_term(4, 1, vars.P, In, AG);
  add_lhat_term(con, 4, 1, vars, plant, plant.C);
  add_lhat_term(con, 4, 2, vars, plant, plant.D, -1.0);
  // row 6: [C_p, D_p G1, D_p]
  con.add_const(5, 0, plant.C);
  con.add_const(5, 1, plant.D * G1);
  con.add_const(5, 2, plant.D);
  problem.add_constraint(std::move(con));
}

ObserverDesignResult solve_observer_hinf_design(const StateSpace& plant, const Matrix& G1, double gamma,
                          const std::optional<Matrix>& L1_fixed,
                          std::optional<double> gamma_bar, const SdpOptions& opts) {
  LmiProblem prob;
  ObserverDesignVars vars = add_observer_design_variables(prob, plant, L1_fixed);
  add_observer_lmi(prob, plant, G1, vars);
  add_controller_hinf_lmi(prob, plant, G1, gamma, vars);
  std::optional<LmiProblem::VarId> Q;
  if (gamma_bar) {
    Q = prob.add_symmetric("Q", plant.n());
    add_closed_loop_hinf_lmi(prob, plant, G1, *gamma_bar, vars, *Q);
  }
  ObserverDesignResult result;
  result.solution = sdp_feasible(prob, opts);
  if (result.solution.status == SdpSolution::Status::feasible) {
    result.P = result.solution.value("P");
    if (L1_fixed)
      result.L1 = *L1_fixed;
    else
      result.L1 = result.P.llt().solve(result.solution.value("Lhat"));
  }
  return result;
}

bool strong_stabilizability_feasible(const StateSpace& plant, const Matrix& G1,
                                     const SdpOptions& opts) {
  LmiProblem prob;
  ObserverDesignVars vars = add_observer_design_variables(prob, plant);
  add_observer_lmi(prob, plant, G1, vars);
  add_strong_stabilizability_lmi(prob, plant, G1, vars);
  return sdp_feasible(prob, opts).status == SdpSolution::Status::feasible;
}

double min_feasible_gamma(const StateSpace& plant, const Matrix& G1, double gamma_lo,
                          double gamma_hi, const SdpOptions& opts) {
  if (!(gamma_lo >= 0) || !(gamma_hi > gamma_lo))
    throw_validation("min_feasible_gamma: need 0 <= gamma_lo < gamma_hi");
  auto feasible = [&](double g) {
    return solve_observer_hinf_design(plant, G1, g, std::nullopt, std::nullopt, opts)
               .solution.status == SdpSolution::Status::feasible;
  };
  if (!feasible(gamma_hi))
    throw_infeasible("min_feasible_gamma: LMIs infeasible at the bracket upper end");
  double lo = gamma_lo, hi = gamma_hi;
  while (hi - lo > 1e-3 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace dpc
