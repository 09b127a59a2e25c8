#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace dpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Error taxonomy mirrored by the CLI exit codes:
/// validation -> 2, infeasible -> 3, numerical -> 4.
class Error : public std::runtime_error {
 public:
  enum class Kind { validation, infeasible, numerical };

  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

[[noreturn]] inline void throw_validation(const std::string& msg) {
  throw Error(Error::Kind::validation, msg);
}
[[noreturn]] inline void throw_infeasible(const std::string& msg) {
  throw Error(Error::Kind::infeasible, msg);
}
[[noreturn]] inline void throw_numerical(const std::string& msg) {
  throw Error(Error::Kind::numerical, msg);
}

inline double spectral_radius(const Matrix& A) {
  if (A.rows() == 0) return 0.0;
  return A.eigenvalues().cwiseAbs().maxCoeff();
}

inline bool is_schur_stable(const Matrix& A, double tol = 0.0) {
  return spectral_radius(A) < 1.0 - tol;
}

/// Default numerical-rank threshold: sigma_i > max(rows,cols) * eps * sigma_max.
inline double default_rank_tol(Eigen::Index rows, Eigen::Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) *
         std::numeric_limits<double>::epsilon() * sigma_max;
}

}  // namespace dpc
