#include <doctest.h>

#include <Eigen/SVD>

#include "dpc/estimation.hpp"
#include "dpc/observability.hpp"
#include "test_support.hpp"

using namespace dpc;
using testsup::random_matrix;
using testsup::random_stable;

namespace {

/// A strongly input observable controller-shaped system: one error channel,
/// two published channels. Returned as a PrivacyController whose fields are
/// the realization itself (estimation consumes only the realization).
PrivacyController sio_controller(Rng& rng, Eigen::Index n = 2) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    PrivacyController pc;
    pc.Abar_c = random_stable(rng, n, 0.7);
    pc.L1 = random_matrix(rng, n, 1);
    pc.G1 = random_matrix(rng, 2, n);
    pc.G2 = random_matrix(rng, 2, 3);
    pc.Abar_r = random_matrix(rng, n, 3);
    pc.gamma = 1e6;
    if (is_strongly_input_observable(pc.as_system()).observable) return pc;
  }
  throw std::runtime_error("no SIO instance found");
}

struct ControllerRun {
  std::vector<Vector> up;
  std::vector<Vector> xr;
  std::vector<Vector> e;
};

/// Drive the controller realization with an arbitrary error sequence and a
/// constant-ish exosystem trace; independent of the estimation code paths.
ControllerRun drive_controller(const PrivacyController& pc, Rng& rng, int steps,
                               double e_scale = 1.0) {
  ControllerRun run;
  Vector xc = random_matrix(rng, pc.Abar_c.rows(), 1);
  Vector xr = random_matrix(rng, pc.G2.cols(), 1);
  for (int t = 0; t < steps; ++t) {
    Vector e = e_scale * random_matrix(rng, pc.L1.cols(), 1);
    run.e.push_back(e);
    run.xr.push_back(xr);
    run.up.push_back(pc.G1 * xc + pc.G2 * xr);
    xc = pc.Abar_c * xc + pc.Abar_r * xr - pc.L1 * e;
  }
  return run;
}

}  // namespace

TEST_CASE("left_inverse_gain: defining identity and tail annihilation") {
  Rng rng(71);
  for (int trial = 0; trial < 6; ++trial) {
    const auto pc = sio_controller(rng, 2 + trial % 2);
    const auto gain = left_inverse_gain(pc);
    const StateSpace sys = pc.as_system();
    const int t2n = 2 * static_cast<int>(sys.n());
    const StackedMaps maps = stack_markov_map(sys, t2n, t2n);
    Matrix M(maps.O.rows(), sys.n() + (sys.n() + 1) * sys.m());
    M << maps.O, maps.N_full.leftCols((sys.n() + 1) * sys.m());
    CHECK((gain.K * M - Matrix::Identity(M.cols(), M.cols())).cwiseAbs().maxCoeff() <
          1e-9);
    const Matrix tail = maps.N_full.rightCols(maps.N_full.cols() - (sys.n() + 1) * sys.m());
    CHECK((gain.K_u * tail).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((gain.K_x * tail).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("left_inverse_gain: tail rows match the normal-equations pseudoinverse") {
  Rng rng(72);
  const auto pc = sio_controller(rng);
  const StateSpace sys = pc.as_system();
  const auto gain = left_inverse_gain(pc);
  const int n = static_cast<int>(sys.n()), m = static_cast<int>(sys.m());
  const StackedMaps maps = stack_markov_map(sys, 2 * n, 2 * n);
  Matrix M(maps.O.rows(), n + (n + 1) * m);
  M << maps.O, maps.N_full.leftCols((n + 1) * m);
  // full-column-rank pseudoinverse via the normal equations
  const Matrix Kpinv = (M.transpose() * M).ldlt().solve(M.transpose());
  CHECK((gain.K.bottomRows(M.cols() - n - m) - Kpinv.bottomRows(M.cols() - n - m))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
  // the (x, u(0)) rows are the selector rows of the full-window pseudoinverse
  Matrix Mfull(maps.O.rows(), n + (2 * n + 1) * m);
  Mfull << maps.O, maps.N_full;
  Eigen::JacobiSVD<Matrix> svd(Mfull, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix head = Matrix::Zero(n + m, Mfull.rows());
  {
    const Vector sv = svd.singularValues();
    Vector inv = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > default_rank_tol(Mfull.rows(), Mfull.cols(), sv(0)))
        inv(i) = 1.0 / sv(i);
    const Matrix P = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    head = P.topRows(n + m);
  }
  CHECK((gain.K.topRows(n + m) - head).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("left_inverse_gain: rank-deficient controller raises") {
  Rng rng(73);
  PrivacyController pc;
  pc.Abar_c = random_stable(rng, 2, 0.7);
  pc.L1 = random_matrix(rng, 2, 3);  // three error channels, one output: m > q
  pc.G1 = random_matrix(rng, 1, 2);
  pc.G2 = random_matrix(rng, 1, 2);
  pc.Abar_r = random_matrix(rng, 2, 2);
  try {
    left_inverse_gain(pc);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("not strongly input observable") !=
          std::string::npos);
  }
}

TEST_CASE("estimate_private_errors: exact noiseless reconstruction") {
  Rng rng(74);
  const auto pc = sio_controller(rng);
  Rng drive(1001);
  const auto run = drive_controller(pc, drive, 60);
  const auto est = estimate_private_errors(pc, run.up, run.xr);
  REQUIRE(est.lag == 2 * pc.Abar_c.rows());
  REQUIRE(est.e_hat.size() == run.up.size() - est.lag);
  double max_err = 0.0;
  for (std::size_t t = 0; t < est.e_hat.size(); ++t)
    max_err = std::max(max_err, (est.e_hat[t] - run.e[t]).cwiseAbs().maxCoeff());
  CHECK(max_err < 1e-10);
}

TEST_CASE("estimate_private_errors: zero error sequence reconstructs to zero") {
  Rng rng(75);
  const auto pc = sio_controller(rng);
  Rng drive(1002);
  auto run = drive_controller(pc, drive, 40, /*e_scale=*/0.0);
  const auto est = estimate_private_errors(pc, run.up, run.xr);
  for (const auto& e : est.e_hat) CHECK(e.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("estimate_private_errors: reconstruction lag is exactly 2n") {
  Rng rng(76);
  const auto pc = sio_controller(rng);
  const int n = static_cast<int>(pc.Abar_c.rows());
  const int t0 = 30;

  // same seed twice: identical trajectories except an e-bump at t0
  auto run_with_bump = [&](bool bump) {
    Rng drive(1003);
    ControllerRun run;
    Vector xc = random_matrix(drive, n, 1);
    Vector xr = random_matrix(drive, pc.G2.cols(), 1);
    for (int t = 0; t < 50; ++t) {
      Vector e = random_matrix(drive, pc.L1.cols(), 1);
      if (bump && t == t0) e(0) += 1.0;
      run.e.push_back(e);
      run.xr.push_back(xr);
      run.up.push_back(pc.G1 * xc + pc.G2 * xr);
      xc = pc.Abar_c * xc + pc.Abar_r * xr - pc.L1 * e;
    }
    return run;
  };
  const auto base = run_with_bump(false);
  const auto perturbed = run_with_bump(true);
  const auto est_base = estimate_private_errors(pc, base.up, base.xr);
  const auto est_pert = estimate_private_errors(pc, perturbed.up, perturbed.xr);
  for (int t = 0; t < t0 - 2 * n; ++t)
    CHECK((est_base.e_hat[t] - est_pert.e_hat[t]).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("estimate_private_errors: trajectory too short names the window") {
  Rng rng(77);
  const auto pc = sio_controller(rng);
  std::vector<Vector> up(3, Vector::Zero(2)), xr(3, Vector::Zero(3));
  try {
    estimate_private_errors(pc, up, xr);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("trajectory too short") != std::string::npos);
  }
}

TEST_CASE("reconstruction RMSE grows monotonically with published-noise scale") {
  Rng rng(78);
  const auto pc = sio_controller(rng);
  const std::vector<double> scales = {0.0125, 0.025, 0.05, 0.1, 0.2};
  std::vector<double> rmse;
  for (std::size_t si = 0; si < scales.size(); ++si) {
    double acc = 0.0;
    int count = 0;
    for (int rep = 0; rep < 4; ++rep) {
      Rng drive(3000 + rep);  // same trajectories across scales
      auto run = drive_controller(pc, drive, 120);
      Rng noise(4000 + rep);
      auto noisy = run.up;
      for (auto& u : noisy) u += scales[si] * noise.normal_vector(u.size());
      const auto est = estimate_private_errors(pc, noisy, run.xr,
                                               EstimationNoiseModel{1e-8});
      for (std::size_t t = 0; t < est.e_hat.size(); ++t) {
        acc += (est.e_hat[t] - run.e[t]).squaredNorm();
        ++count;
      }
    }
    rmse.push_back(std::sqrt(acc / count));
  }
  std::vector<double> order(scales.begin(), scales.end());
  CHECK(testsup::spearman_rho(order, rmse) == doctest::Approx(1.0));
}
