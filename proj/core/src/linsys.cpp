#include "dpc/linsys.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "dpc/synthesis.hpp"

namespace dpc {

namespace {

void require_dims(bool ok, const std::string& what) {
  if (!ok) throw_validation("dimension mismatch: " + what);
}

}  // namespace

StateSpace::StateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
  require_dims(A.rows() == A.cols(), "A must be square");
  require_dims(B.rows() == A.rows(), "B rows must match A");
  require_dims(C.cols() == A.rows(), "C cols must match A");
  require_dims(D.rows() == C.rows() && D.cols() == B.cols(), "D must be q x m");
}

ContinuousStateSpace::ContinuousStateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
  require_dims(A.rows() == A.cols(), "A must be square");
  require_dims(B.rows() == A.rows(), "B rows must match A");
  require_dims(C.cols() == A.rows(), "C cols must match A");
  require_dims(D.rows() == C.rows() && D.cols() == B.cols(), "D must be q x m");
}

Trajectory simulate(const StateSpace& sys, const Vector& x0,
                    const std::vector<Vector>& inputs) {
  if (x0.size() != sys.n())
    throw_validation("simulate: x0 has length " + std::to_string(x0.size()) +
                     ", expected " + std::to_string(sys.n()));
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].size() != sys.m())
      throw_validation("simulate: input at step " + std::to_string(k) + " has length " +
                       std::to_string(inputs[k].size()) + ", expected " +
                       std::to_string(sys.m()));
  }
  Trajectory traj;
  traj.states.reserve(inputs.size());
  traj.inputs = inputs;
  traj.outputs.reserve(inputs.size());
  Vector x = x0;
  for (const Vector& u : inputs) {
    traj.states.push_back(x);
    traj.outputs.push_back(sys.C * x + sys.D * u);
    x = sys.A * x + sys.B * u;
  }
  return traj;
}

// Scaling-and-squaring with the order-13 Pade approximant (Higham 2005
// coefficients). Section IV needs a bit-stable discretization, so this is
// pinned rather than left to a library choice.
Matrix expm(const Matrix& A) {
  static const double theta13 = 5.371920351148152;
  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  const Eigen::Index n = A.rows();
  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13)
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  const Matrix As = A / std::pow(2.0, squarings);

  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = As * As;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;
  const Matrix U = As * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) +
                         b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  const Matrix V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) +
                   b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
  Matrix F = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < squarings; ++i) F = F * F;
  return F;
}

StateSpace zoh_discretize(const ContinuousStateSpace& csys, double dt) {
  if (!(dt > 0.0)) throw_validation("zoh_discretize: dt must be positive");
  const Eigen::Index n = csys.n();
  const Eigen::Index m = csys.m();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = csys.A * dt;
  aug.topRightCorner(n, m) = csys.B * dt;
  const Matrix E = expm(aug);
  return StateSpace(E.topLeftCorner(n, n), E.topRightCorner(n, m), csys.C, csys.D);
}

namespace {

// PBH test: rank [lambda I - A, B] = n for every eigenvalue with |lambda| >= 1.
bool pbh_stabilizable(const Matrix& A, const Matrix& B, std::complex<double>* witness) {
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Matrix> es(A);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam) < 1.0 - 1e-9) continue;
    Eigen::MatrixXcd M(n, n + B.cols());
    M.leftCols(n) = lam * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    M.rightCols(B.cols()) = B.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) <= default_rank_tol(M.rows(), M.cols(), sv(0))) {
      if (witness) *witness = lam;
      return false;
    }
  }
  return true;
}

}  // namespace

DareSolution dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const Eigen::Index n = A.rows();
  if (B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols())
    throw_validation("dare: inconsistent dimensions");
  {
    Eigen::LLT<Matrix> llt(R);
    if (llt.info() != Eigen::Success)
      throw_validation("dare: R is not positive definite");
  }
  std::complex<double> witness;
  if (!pbh_stabilizable(A, B, &witness))
    throw_numerical("dare: (A,B) not stabilizable, PBH deficiency at eigenvalue |" +
                    std::to_string(std::abs(witness)) + "|");

  // Structure-preserving doubling: Ak -> Ak (I + Gk Hk)^-1 Ak, etc. Hk -> P.
  Matrix Ak = A;
  Matrix Gk = B * R.llt().solve(B.transpose());
  Matrix Hk = Q;
  const int max_iter = 200;
  int it = 0;
  for (; it < max_iter; ++it) {
    const Matrix W = Matrix::Identity(n, n) + Gk * Hk;
    Eigen::PartialPivLU<Matrix> lu(W);
    const Matrix WiA = lu.solve(Ak);
    const Matrix WiG = lu.solve(Gk);
    const Matrix Hn = Hk + Ak.transpose() * Hk * WiA;
    const Matrix Gn = Gk + Ak * WiG * Ak.transpose();
    const Matrix An = Ak * WiA;
    const double diff = (Hn - Hk).cwiseAbs().maxCoeff();
    Ak = An;
    Gk = Gn;
    Hk = 0.5 * (Hn + Hn.transpose());
    if (diff < 1e-14 * std::max(1.0, Hk.cwiseAbs().maxCoeff())) break;
  }
  if (it == max_iter)
    throw_numerical("dare: doubling iteration did not converge in 200 rounds");

  DareSolution sol;
  sol.P = Hk;
  sol.K = (R + B.transpose() * Hk * B).llt().solve(B.transpose() * Hk * A);
  sol.iterations = it + 1;
  const Matrix res = A.transpose() * Hk * A - Hk -
                     A.transpose() * Hk * B * sol.K + Q;
  sol.residual = res.cwiseAbs().maxCoeff() / std::max(1.0, Hk.cwiseAbs().maxCoeff());
  if (sol.residual > 1e-10)
    throw_numerical("dare: residual " + std::to_string(sol.residual) +
                    " exceeds 1e-10 after convergence");
  if (!is_schur_stable(A - B * sol.K))
    throw_numerical("dare: closed loop A - B K not Schur stable");
  return sol;
}

Matrix dlyap(const Matrix& A, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  if (Q.rows() != n || Q.cols() != n) throw_validation("dlyap: Q must match A");
  if (!is_schur_stable(A))
    throw_validation("dlyap: A must be Schur stable");
  // vec(A' X A) = (A' kron A') vec(X); solve (I - A' kron A') vec(X) = vec(Q).
  Matrix M = Matrix::Identity(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      M.block(i * n, j * n, n, n) -= A.transpose()(i, j) * A.transpose();
  Vector q(n * n);
  for (Eigen::Index c = 0; c < n; ++c) q.segment(c * n, n) = Q.col(c);
  const Vector x = M.partialPivLu().solve(q);
  Matrix X(n, n);
  for (Eigen::Index c = 0; c < n; ++c) X.col(c) = x.segment(c * n, n);
  return 0.5 * (X + X.transpose());
}

ClosedLoop close_loop(const StateSpace& plant, const PrivacyController& controller,
                      const StateSpace& exo) {
  const Eigen::Index np = plant.n(), mp = plant.m(), qp = plant.q();
  const Eigen::Index nr = exo.n();
  if (controller.G1.cols() != np || controller.G1.rows() != mp)
    throw_validation("close_loop: G1 must be m_p x n_p");
  if (controller.G2.cols() != nr || controller.L1.rows() != np ||
      controller.L1.cols() != qp)
    throw_validation("close_loop: controller/exosystem dimensions inconsistent");
  if (exo.q() != qp) throw_validation("close_loop: exosystem output must match plant output");

  // state (x_p, xbar_c, x_r); inputs (w_e in R^q, w_u in R^m);
  // outputs (y_p, u_p, e). u_p = G1 xbar_c + G2 x_r + w_u,
  // e = C_p x_p + D_p u_p - C_r x_r, controller sees e + w_e.
  const Eigen::Index n = np + np + nr;
  const Eigen::Index m = qp + mp;
  const Eigen::Index q = qp + mp + qp;
  Matrix A = Matrix::Zero(n, n), B = Matrix::Zero(n, m);
  Matrix C = Matrix::Zero(q, n), D = Matrix::Zero(q, m);
  const auto& G1 = controller.G1;
  const auto& G2 = controller.G2;
  const auto& L1 = controller.L1;
  const Matrix& Ap = plant.A;
  const Matrix& Bp = plant.B;
  const Matrix& Cp = plant.C;
  const Matrix& Dp = plant.D;
  const Matrix& Cr = exo.C;

  // plant row: x_p+ = Ap x_p + Bp (G1 xc + G2 xr + w_u)
  A.block(0, 0, np, np) = Ap;
  A.block(0, np, np, np) = Bp * G1;
  A.block(0, 2 * np, np, nr) = Bp * G2;
  B.block(0, qp, np, mp) = Bp;
  // controller row: xc+ = Abar_c xc + Abar_r xr - L1 (e + w_e),
  //   e = Cp x_p + Dp (G1 xc + G2 xr + w_u) - Cr xr
  A.block(np, 0, np, np) = -L1 * Cp;
  A.block(np, np, np, np) = controller.Abar_c - L1 * Dp * G1;
  A.block(np, 2 * np, np, nr) = controller.Abar_r - L1 * (Dp * G2 - Cr);
  B.block(np, 0, np, qp) = -L1;
  B.block(np, qp, np, mp) = -L1 * Dp;
  // exosystem row
  A.block(2 * np, 2 * np, nr, nr) = exo.A;

  // outputs
  C.block(0, 0, qp, np) = Cp;                       // y_p
  C.block(0, np, qp, np) = Dp * G1;
  C.block(0, 2 * np, qp, nr) = Dp * G2;
  D.block(0, qp, qp, mp) = Dp;
  C.block(qp, np, mp, np) = G1;                     // u_p
  C.block(qp, 2 * np, mp, nr) = G2;
  D.block(qp, qp, mp, mp) = Matrix::Identity(mp, mp);
  C.block(qp + mp, 0, qp, np) = Cp;                 // e = y_p - y_r
  C.block(qp + mp, np, qp, np) = Dp * G1;
  C.block(qp + mp, 2 * np, qp, nr) = Dp * G2 - Cr;
  D.block(qp + mp, qp, qp, mp) = Dp;

  ClosedLoop cl;
  cl.sys = StateSpace(A, B, C, D);
  cl.n_plant = np;
  cl.n_ctrl = np;
  cl.n_exo = nr;
  return cl;
}

}  // namespace dpc
