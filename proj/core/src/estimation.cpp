#include "dpc/estimation.hpp"

#include <Eigen/SVD>

#include "dpc/observability.hpp"

namespace dpc {

namespace {

Matrix pinv(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector sv = svd.singularValues();
  const double tol = sv.size() ? default_rank_tol(M.rows(), M.cols(), sv(0)) : 0.0;
  Vector inv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

LeftInverseGain left_inverse_gain(const StateSpace& sys) {
  const Eigen::Index n = sys.n(), m = sys.m(), q = sys.q();
  const int t2n = 2 * static_cast<int>(n);
  const SioReport sio = is_strongly_input_observable(sys);
  if (!sio.observable)
    throw_infeasible("left_inverse_gain: system not strongly input observable (rank " +
                     std::to_string(sio.rank) + " of " + std::to_string(sio.required) +
                     ")");
  const StackedMaps maps = stack_markov_map(sys, t2n, t2n);
  Matrix M(maps.O.rows(), n + (n + 1) * m);
  M << maps.O, maps.N_full.leftCols((n + 1) * m);
  Matrix Mfull(maps.O.rows(), n + (t2n + 1) * m);
  Mfull << maps.O, maps.N_full;

  LeftInverseGain gain;
  gain.n = n;
  gain.m = m;
  gain.q = q;
  gain.K = pinv(M);
  // The (x, u(0)) rows must also be blind to inputs beyond the window's first
  // block; strong input observability puts the selector in the row space of
  // [O N_full], so these rows exist and are taken from its pseudoinverse.
  const Matrix Kf = pinv(Mfull);
  gain.K.topRows(n + m) = Kf.topRows(n + m);
  const Matrix resid = gain.K * M - Matrix::Identity(M.cols(), M.cols());
  if (resid.cwiseAbs().maxCoeff() > 1e-9)
    throw_numerical("left_inverse_gain: K [O N] deviates from identity by " +
                    std::to_string(resid.cwiseAbs().maxCoeff()));
  gain.K_x = gain.K.topRows(n);
  gain.K_u = gain.K.middleRows(n, m);
  return gain;
}

LeftInverseGain left_inverse_gain(const PrivacyController& controller) {
  return left_inverse_gain(controller.as_system());
}

ErrorEstimate estimate_private_errors(const PrivacyController& controller,
                                      const std::vector<Vector>& published_up,
                                      const std::vector<Vector>& exo_trace,
                                      const std::optional<EstimationNoiseModel>& noise) {
  const StateSpace sys = controller.as_system();
  const Eigen::Index n = sys.n(), m = sys.m(), q = sys.q();
  const int t2n = 2 * static_cast<int>(n);
  const std::size_t window = static_cast<std::size_t>(t2n) + 1;
  if (published_up.size() < window)
    throw_validation("estimate_private_errors: trajectory too short, need at least " +
                     std::to_string(window) + " samples of u_p");
  if (exo_trace.size() < published_up.size())
    throw_validation("estimate_private_errors: exosystem trace shorter than u_p trace");

  const LeftInverseGain gain = left_inverse_gain(controller);
  // exogenous drive map: N_r for (Abar_c, Abar_r, G1, G2)
  StateSpace drive(controller.Abar_c, controller.Abar_r, controller.G1, controller.G2);
  const StackedMaps nr = stack_markov_map(drive, t2n, t2n);

  // Ridge smoother operator, built once. The regression uses the full-window
  // model [O N_2n] (all inputs in the window as unknowns); restricting to the
  // (n+1)-block submatrix would leave the trailing inputs unmodeled and bias
  // the estimate by O(|e|) even without noise.
  Matrix smoother;
  if (noise) {
    const StackedMaps maps = stack_markov_map(sys, t2n, t2n);
    Matrix M(maps.O.rows(), n + (t2n + 1) * m);
    M << maps.O, maps.N_full;
    const Matrix MtM = M.transpose() * M;
    const double scale = MtM.cwiseAbs().maxCoeff();
    const Matrix reg =
        MtM + noise->ridge_scale * std::max(scale, 1.0) *
                  Matrix::Identity(MtM.rows(), MtM.cols());
    smoother = reg.ldlt().solve(M.transpose()).middleRows(n, m);
  }

  ErrorEstimate est;
  est.lag = t2n;
  const std::size_t count = published_up.size() - window + 1;
  est.e_hat.reserve(count);
  Vector w((t2n + 1) * q), xw((t2n + 1) * drive.m());
  for (std::size_t t = 0; t < count; ++t) {
    for (int k = 0; k <= t2n; ++k) {
      w.segment(k * q, q) = published_up[t + k];
      xw.segment(k * drive.m(), drive.m()) = exo_trace[t + k];
    }
    const Vector z = w - nr.N_full * xw;
    est.e_hat.push_back(noise ? Vector(smoother * z) : Vector(gain.K_u * z));
  }
  return est;
}

}  // namespace dpc
