#include "dpc/observability.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace dpc {

Matrix stack_output_map(const StateSpace& sys, int t) {
  if (t < 0) throw_validation("stack_output_map: horizon must be nonnegative");
  const Eigen::Index q = sys.q(), n = sys.n();
  Matrix O((t + 1) * q, n);
  Matrix P = Matrix::Identity(n, n);
  for (int k = 0; k <= t; ++k) {
    O.middleRows(k * q, q) = sys.C * P;
    P = P * sys.A;
  }
  return O;
}

StackedMaps stack_markov_map(const StateSpace& sys, int t, int T) {
  if (t < 0 || T < 0) throw_validation("stack_markov_map: horizons must be nonnegative");
  if (T > t) throw_validation("stack_markov_map: T must not exceed t");
  const Eigen::Index q = sys.q(), m = sys.m();
  StackedMaps maps;
  maps.t = t;
  maps.T = T;
  maps.N_full = Matrix::Zero((t + 1) * q, (t + 1) * m);
  // block column 0 holds [D; CB; CAB; ...]; later columns are shifted copies
  std::vector<Matrix> col(static_cast<std::size_t>(t) + 1);
  col[0] = sys.D;
  Matrix P = sys.B;
  for (int k = 1; k <= t; ++k) {
    col[k] = sys.C * P;
    P = sys.A * P;
  }
  for (int c = 0; c <= t; ++c)
    for (int r = c; r <= t; ++r)
      maps.N_full.block(r * q, c * m, q, m) = col[r - c];
  maps.N_sub = maps.N_full.leftCols((T + 1) * m);
  maps.O = stack_output_map(sys, t);
  return maps;
}

void require_nontrivial_maps(const Matrix& O, const Matrix& N) {
  if (O.cwiseAbs().maxCoeff() == 0.0 && N.cwiseAbs().maxCoeff() == 0.0)
    throw_validation("[O_t N_t] is identically zero; privacy analysis is vacuous");
}

namespace {

Matrix whiten(const Matrix& Sigma, const Matrix& M) {
  Eigen::LLT<Matrix> llt(Sigma);
  if (llt.info() != Eigen::Success)
    throw_validation("weighting Sigma is not positive definite");
  // L L' = Sigma; returns L^{-1} M so that (L^{-1}M)'(L^{-1}M) = M' Sigma^{-1} M
  return llt.matrixL().solve(M);
}

}  // namespace

GramianReport weighted_gramian(const StateSpace& sys, int t, int T, const Matrix& Sigma) {
  const StackedMaps maps = stack_markov_map(sys, t, T);
  require_nontrivial_maps(maps.O, maps.N_full);
  const Eigen::Index rows = maps.O.rows();
  if (Sigma.rows() != rows || Sigma.cols() != rows)
    throw_validation("weighted_gramian: Sigma must be (t+1)q x (t+1)q");
  Matrix ON(rows, maps.O.cols() + maps.N_sub.cols());
  ON << maps.O, maps.N_sub;
  const Matrix W = whiten(Sigma, ON);
  GramianReport rep;
  rep.t = t;
  rep.T = T;
  rep.gramian = W.transpose() * W;
  rep.gramian = 0.5 * (rep.gramian + rep.gramian.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(rep.gramian);
  rep.eigenvalues = es.eigenvalues();
  rep.eigenvectors = es.eigenvectors();
  const Eigen::Index n = sys.n(), m = sys.m();
  rep.block_projections = Matrix::Zero(rep.eigenvalues.size(), T + 2);
  for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i) {
    const Vector v = rep.eigenvectors.col(i);
    rep.block_projections(i, 0) = v.head(n).norm();
    for (int k = 0; k <= T; ++k)
      rep.block_projections(i, k + 1) = v.segment(n + k * m, m).norm();
  }
  return rep;
}

GramianReport weighted_gramian_iid(const StateSpace& sys, int t, int T, double sigma) {
  if (!(sigma > 0)) throw_validation("weighted_gramian_iid: sigma must be positive");
  const Eigen::Index rows = (t + 1) * sys.q();
  return weighted_gramian(sys, t, T, sigma * sigma * Matrix::Identity(rows, rows));
}

SioReport is_strongly_input_observable(const StateSpace& sys, std::optional<int> T_opt,
                                       std::optional<int> t_opt,
                                       std::optional<double> rank_tol) {
  const int n = static_cast<int>(sys.n());
  const int T = T_opt.value_or(n);
  const int t = t_opt.value_or(T + n);
  if (T < n || t < T + n)
    throw_validation("is_strongly_input_observable: need T >= n and t >= T+n");
  const StackedMaps maps = stack_markov_map(sys, t, T);
  Matrix ON(maps.O.rows(), maps.O.cols() + maps.N_sub.cols());
  ON << maps.O, maps.N_sub;
  SioReport rep;
  rep.required = sys.n() + (T + 1) * sys.m();
  Eigen::JacobiSVD<Matrix> svd(ON);
  const Vector sv = svd.singularValues();
  rep.singular_values.assign(sv.data(), sv.data() + sv.size());
  const double tol = rank_tol.value_or(
      sv.size() > 0 ? default_rank_tol(ON.rows(), ON.cols(), sv(0)) : 0.0);
  rep.rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rep.rank;
  rep.observable = (rep.rank == rep.required);
  return rep;
}

Matrix infinite_observability_gramian(const StateSpace& sys) {
  if (!is_schur_stable(sys.A))
    throw_validation("Gramian undefined for unstable system");
  return dlyap(sys.A, sys.C.transpose() * sys.C);
}

InputEstimate least_squares_input_estimate(const StateSpace& sys, const Vector& Y,
                                           int t, int T, const Matrix& Sigma) {
  const StackedMaps maps = stack_markov_map(sys, t, T);
  if (Y.size() != maps.O.rows())
    throw_validation("least_squares_input_estimate: Y must have length (t+1)q");
  Matrix ON(maps.O.rows(), maps.O.cols() + maps.N_sub.cols());
  ON << maps.O, maps.N_sub;
  const Matrix W = whiten(Sigma, ON);
  const Vector Yw = whiten(Sigma, Y);
  Eigen::ColPivHouseholderQR<Matrix> qr(W);
  qr.setThreshold(default_rank_tol(W.rows(), W.cols(), 1.0));
  if (qr.rank() < ON.cols())
    throw_infeasible("input estimate not unique: strong input observability "
                     "Gramian is singular at these horizons");
  const Vector z = qr.solve(Yw);
  InputEstimate est;
  est.x0 = z.head(sys.n());
  est.U = z.tail((T + 1) * sys.m());
  est.residual = (Yw - W * z).squaredNorm();
  return est;
}

Matrix output_null_complement(const StateSpace& sys, int t, int T) {
  const StackedMaps maps = stack_markov_map(sys, t, T);
  Matrix ON(maps.O.rows(), maps.O.cols() + maps.N_sub.cols());
  ON << maps.O, maps.N_sub;
  const Eigen::Index rows = ON.rows(), cols = ON.cols();
  if (rows < cols)
    throw_validation("output_null_complement: requires (t+1)q >= n + (T+1)m");
  Eigen::JacobiSVD<Matrix> svd(ON, Eigen::ComputeFullU);
  const Vector sv = svd.singularValues();
  const double tol = default_rank_tol(rows, cols, sv.size() ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  if (rank < cols)
    throw_infeasible("output_null_complement: [O N] is rank deficient (" +
                     std::to_string(rank) + " < " + std::to_string(cols) +
                     "); system not strongly input observable at these horizons");
  // left singular vectors beyond the range form the orthonormal complement
  return svd.matrixU().rightCols(rows - cols);
}

}  // namespace dpc
