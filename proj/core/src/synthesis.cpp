#include "dpc/synthesis.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

#include "dpc/hinf.hpp"
#include "dpc/privacy.hpp"
#include "dpc/observability.hpp"

namespace dpc {

CompositeSystem CompositeSystem::build(const StateSpace& plant, const StateSpace& exo) {
  if (exo.q() != plant.q())
    throw_validation("composite system: exosystem output dim must match plant output dim");
  const Eigen::Index np = plant.n(), nr = exo.n();
  CompositeSystem cs;
  cs.Abar = Matrix::Zero(np + nr, np + nr);
  cs.Abar.topLeftCorner(np, np) = plant.A;
  cs.Abar.bottomRightCorner(nr, nr) = exo.A;
  cs.Bbar = Matrix::Zero(np + nr, plant.m());
  cs.Bbar.topRows(np) = plant.B;
  cs.Cbar = Matrix::Zero(plant.q(), np + nr);
  cs.Cbar.leftCols(np) = plant.C;
  cs.Cbar.rightCols(nr) = -exo.C;
  cs.Dp = plant.D;
  return cs;
}

namespace {

bool pbh_ok(const Matrix& A, const Matrix& B_or_Ct, bool dual,
            std::complex<double>* witness) {
  // stabilizability: rank [lambda I - A, B] = n at |lambda| >= 1
  // detectability:   dual test on (A', C')
  const Matrix At = dual ? Matrix(A.transpose()) : A;
  const Eigen::Index n = At.rows();
  Eigen::EigenSolver<Matrix> es(At);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam) < 1.0 - 1e-9) continue;
    Eigen::MatrixXcd M(n, n + B_or_Ct.cols());
    M.leftCols(n) = lam * Eigen::MatrixXcd::Identity(n, n) -
                    At.cast<std::complex<double>>();
    M.rightCols(B_or_Ct.cols()) = B_or_Ct.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) <= default_rank_tol(M.rows(), M.cols(), sv(0))) {
      if (witness) *witness = lam;
      return false;
    }
  }
  return true;
}

struct RegulatorLsq {
  Matrix X, U;
  double residual;
  double scale;
};

RegulatorLsq regulator_least_squares(const StateSpace& plant, const StateSpace& exo) {
  const Eigen::Index np = plant.n(), mp = plant.m(), qp = plant.q(), nr = exo.n();
  if (exo.q() != qp)
    throw_validation("regulator equations: C_r rows must match plant outputs");
  // unknowns vec(X) (col-major), vec(U); equations
  //   X A_r - A_p X - B_p U = 0
  //   C_p X + D_p U = C_r
  const Eigen::Index nx = np * nr, nu = mp * nr;
  Matrix M = Matrix::Zero(np * nr + qp * nr, nx + nu);
  Vector rhs = Vector::Zero(M.rows());
  // vec(X A_r) = (A_r' kron I) vec X ; vec(A_p X) = (I kron A_p) vec X
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nr; ++j) {
      M.block(i * np, j * np, np, np) +=
          exo.A(j, i) * Matrix::Identity(np, np);
      if (i == j) M.block(i * np, j * np, np, np) -= plant.A;
    }
  for (Eigen::Index i = 0; i < nr; ++i)
    M.block(i * np, nx + i * mp, np, mp) = -plant.B;
  for (Eigen::Index i = 0; i < nr; ++i) {
    M.block(np * nr + i * qp, i * np, qp, np) = plant.C;
    M.block(np * nr + i * qp, nx + i * mp, qp, mp) = plant.D;
    rhs.segment(np * nr + i * qp, qp) = exo.C.col(i);
  }
  const Vector sol = M.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
  RegulatorLsq out;
  out.X = Matrix(np, nr);
  out.U = Matrix(mp, nr);
  for (Eigen::Index c = 0; c < nr; ++c) {
    out.X.col(c) = sol.segment(c * np, np);
    out.U.col(c) = sol.segment(nx + c * mp, mp);
  }
  out.residual = (M * sol - rhs).cwiseAbs().maxCoeff();
  out.scale = std::max({1.0, plant.A.cwiseAbs().maxCoeff(), plant.B.cwiseAbs().maxCoeff(),
                        plant.C.cwiseAbs().maxCoeff(), exo.C.cwiseAbs().maxCoeff()});
  return out;
}

}  // namespace

std::string AssumptionReport::summary() const {
  std::ostringstream os;
  os << "exosystem antistable: " << (exosystem_antistable ? "yes" : "no")
     << " (min |eig| = " << min_exo_eigenvalue_mag << ")\n"
     << "(A_p,B_p) stabilizable: " << (stabilizable ? "yes" : "no") << "\n"
     << "(Cbar,Abar) detectable: " << (detectable ? "yes" : "no") << "\n"
     << "regulator equations solvable: " << (regulator_solvable ? "yes" : "no")
     << " (residual = " << regulator_residual << ")";
  return os.str();
}

AssumptionReport check_assumptions(const StateSpace& plant, const StateSpace& exo,
                                   double regulator_tol_scale) {
  AssumptionReport rep;
  rep.min_exo_eigenvalue_mag =
      exo.n() ? exo.A.eigenvalues().cwiseAbs().minCoeff() : 1.0;
  rep.exosystem_antistable = rep.min_exo_eigenvalue_mag >= 1.0 - 1e-9;
  rep.stabilizable = pbh_ok(plant.A, plant.B, false, &rep.stabilizability_witness);
  const CompositeSystem cs = CompositeSystem::build(plant, exo);
  rep.detectable =
      pbh_ok(cs.Abar, cs.Cbar.transpose(), true, &rep.detectability_witness);
  const RegulatorLsq reg = regulator_least_squares(plant, exo);
  rep.regulator_residual = reg.residual;
  rep.regulator_solvable = reg.residual <= regulator_tol_scale * reg.scale;
  return rep;
}

RegulatorSolution solve_regulator_equations(const StateSpace& plant, const StateSpace& exo,
                                            double tol_scale) {
  const RegulatorLsq reg = regulator_least_squares(plant, exo);
  if (reg.residual > tol_scale * reg.scale) {
    std::ostringstream os;
    os << "regulator equations unsolvable: least-squares residual " << reg.residual
       << " exceeds " << tol_scale * reg.scale;
    throw_infeasible(os.str());
  }
  return RegulatorSolution{reg.X, reg.U, reg.residual};
}

TrackingController design_observer_tracking_controller(const StateSpace& plant,
                                                       const StateSpace& exo,
                                                       const Matrix& G1, const Matrix& L,
                                                       double regulator_tol_scale) {
  const Eigen::Index np = plant.n(), nr = exo.n();
  const AssumptionReport rep = check_assumptions(plant, exo, regulator_tol_scale);
  if (!rep.exosystem_antistable || !rep.stabilizable || !rep.detectable)
    throw_validation("tracking controller: tracking prerequisites fail:\n" +
                     rep.summary());
  if (!is_schur_stable(plant.A + plant.B * G1))
    throw_validation("tracking controller: A_p + B_p G1 is not Schur stable");
  const CompositeSystem cs = CompositeSystem::build(plant, exo);
  if (L.rows() != np + nr || L.cols() != plant.q())
    throw_validation("tracking controller: L must be (n_p+n_r) x q_p");
  if (!is_schur_stable(cs.Abar + L * cs.Cbar))
    throw_validation("tracking controller: Abar + L Cbar is not Schur stable");
  const RegulatorSolution reg = solve_regulator_equations(plant, exo, regulator_tol_scale);
  TrackingController tc;
  tc.G = Matrix(plant.m(), np + nr);
  tc.G.leftCols(np) = G1;
  tc.G.rightCols(nr) = reg.U - G1 * reg.X;
  tc.L = L;
  tc.Ac = cs.Abar + L * cs.Cbar + (cs.Bbar + L * cs.Dp) * tc.G;
  return tc;
}

StateSpace PrivacyController::as_system() const {
  return StateSpace(Abar_c, -L1, G1, Matrix::Zero(G1.rows(), L1.cols()));
}

PrivacyController assemble_privacy_controller(const StateSpace& plant, const StateSpace& exo,
                                              const Matrix& G1, const Matrix& L1,
                                              double gamma, double regulator_tol_scale) {
  const RegulatorSolution reg = solve_regulator_equations(plant, exo, regulator_tol_scale);
  PrivacyController pc;
  pc.G1 = G1;
  pc.G2 = reg.U - G1 * reg.X;
  pc.L1 = L1;
  pc.Abar_c = plant.A + plant.B * G1 + L1 * (plant.C + plant.D * G1);
  pc.Abar_r = (plant.B + L1 * plant.D) * pc.G2 - L1 * exo.C;
  pc.gamma = gamma;
  if (!is_schur_stable(pc.Abar_c))
    throw_numerical("privacy controller: Abar_c is not Schur stable");
  const double achieved = hinf_norm(pc.as_system());
  if (achieved > gamma * (1.0 + 1e-6))
    throw_numerical("privacy controller: H-infinity " + std::to_string(achieved) +
                    " exceeds certified gamma " + std::to_string(gamma));
  return pc;
}

PrivacyController design_privacy_controller(const StateSpace& plant, const StateSpace& exo,
                                            double gamma, const PrivacyDesignOptions& opts) {
  const AssumptionReport rep = check_assumptions(plant, exo, opts.regulator_tol_scale);
  if (!rep.exosystem_antistable || !rep.stabilizable || !rep.detectable)
    throw_validation("privacy controller: assumptions 1-3 do not hold:\n" + rep.summary());
  Matrix G1;
  if (opts.G1) {
    G1 = *opts.G1;
  } else {
    const Eigen::Index np = plant.n(), mp = plant.m();
    const DareSolution lqr = dare(plant.A, plant.B, Matrix::Identity(np, np),
                                  Matrix::Identity(mp, mp));
    G1 = -lqr.K;
  }
  SdpOptions sdp;
  sdp.variable_bound = opts.variable_bound;
  const ObserverDesignResult res =
      solve_observer_hinf_design(plant, G1, gamma, std::nullopt, opts.gamma_bar, sdp);
  if (res.solution.status != SdpSolution::Status::feasible) {
    double lower = 0.0;
    try {
      lower = min_feasible_gamma(plant, G1, 0.0, std::max(1.0, 100.0 * gamma), sdp);
    } catch (const Error&) {
      lower = -1.0;
    }
    std::ostringstream os;
    os << "privacy controller: design LMIs infeasible at gamma = " << gamma;
    if (lower >= 0.0) os << "; smallest feasible gamma is approximately " << lower;
    throw_infeasible(os.str());
  }
  return assemble_privacy_controller(plant, exo, G1, res.L1, gamma,
                                     opts.regulator_tol_scale);
}

double controller_privacy_noise(const PrivacyController& controller,
                                const PrivacyBudget& budget) {
  budget.validate_gaussian();
  if (!is_schur_stable(controller.Abar_c))
    throw_validation("controller_privacy_noise: Abar_c must be Schur stable");
  // O_inf of (Abar_c, G1): observability Gramian of the controller output map
  StateSpace sys(controller.Abar_c, -controller.L1, controller.G1,
                 Matrix::Zero(controller.G1.rows(), controller.L1.cols()));
  const Matrix Oinf = infinite_observability_gramian(sys);
  const double lmax =
      Eigen::SelfAdjointEigenSolver<Matrix>(Oinf).eigenvalues().maxCoeff();
  const double floor_sqrt = budget.c * (std::sqrt(lmax) + controller.gamma) *
                            r_value(budget.epsilon, budget.delta);
  return floor_sqrt * floor_sqrt;
}

Matrix dual_lqr_observer_gain(const Matrix& A, const Matrix& C) {
  const DareSolution sol = dare(A.transpose(), C.transpose(),
                                Matrix::Identity(A.rows(), A.rows()),
                                Matrix::Identity(C.rows(), C.rows()));
  return Matrix(-sol.K.transpose());
}

}  // namespace dpc
