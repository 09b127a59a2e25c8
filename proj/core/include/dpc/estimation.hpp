#pragma once

#include <optional>
#include <vector>

#include "dpc/linsys.hpp"
#include "dpc/synthesis.hpp"
#include "dpc/types.hpp"

namespace dpc {

/// Left-inverse gain for a strongly input observable system: K recovers
/// (x(t), u(t)) from the output window Y_{2n}(t). The rows delivering x(t)
/// and u(t) also annihilate the window's trailing-input columns, so the
/// recovery is exact on running data, not only under the zero-tail assumption.
struct LeftInverseGain {
  Matrix K;    // (n + (n+1)m) x (2n+1)q, K [O_2n N_{2n,n}] = I
  Matrix K_x;  // first n rows
  Matrix K_u;  // next m rows
  Eigen::Index n = 0, m = 0, q = 0;
};

LeftInverseGain left_inverse_gain(const StateSpace& sys);
/// Controller viewed as the system (Abar_c, -L1, G1, 0) from e to u_p.
LeftInverseGain left_inverse_gain(const PrivacyController& controller);

struct EstimationNoiseModel {
  double ridge_scale = 1e-8;  // regularization relative to ||[O N]||^2
};

struct ErrorEstimate {
  std::vector<Vector> e_hat;  // estimates for t = 0 .. len - (2n+1)
  int lag = 0;                // estimation at t consumes data up to t + lag
};

/// Reconstruction of the controller input e from published u_p and the public
/// exosystem trace (left-inverse realization, smoothing with lag 2n).
/// With a noise model, a ridge-regularized windowed least squares replaces the
/// exact left inverse.
ErrorEstimate estimate_private_errors(const PrivacyController& controller,
                                      const std::vector<Vector>& published_up,
                                      const std::vector<Vector>& exo_trace,
                                      const std::optional<EstimationNoiseModel>& noise =
                                          std::nullopt);

}  // namespace dpc
