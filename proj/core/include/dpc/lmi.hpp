#pragma once

#include <map>
#include <string>
#include <vector>

#include "dpc/types.hpp"

namespace dpc {

struct SdpOptions;
struct SdpSolution;

/// Affine semidefinite feasibility problems: named matrix variables, block
/// structured constraints F(y) that must be positive definite. Symmetric
/// variables have only their upper triangle free.
class LmiProblem {
 public:
  using VarId = std::size_t;

  VarId add_symmetric(const std::string& name, Eigen::Index n);
  VarId add_matrix(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  /// One symmetric block constraint; terms added at block (r,c) with r < c are
  /// mirrored transposed into (c,r); diagonal-block terms are symmetrized.
  class Constraint {
   public:
    explicit Constraint(std::vector<Eigen::Index> block_sizes);

    void add_const(int r, int c, const Matrix& M);
    /// block(r,c) += coeff * left * V * right   (V' instead of V when transpose_var)
    void add_term(int r, int c, VarId v, const Matrix& left, const Matrix& right,
                  bool transpose_var = false, double coeff = 1.0);
    void add_identity_term(int r, int c, VarId v, double coeff = 1.0);

    Eigen::Index dim() const { return dim_; }

   private:
    friend class LmiProblem;
    friend SdpSolution sdp_feasible(const LmiProblem&, const SdpOptions&);
    struct Term {
      int r, c;
      VarId var;
      Matrix left, right;
      bool transpose_var;
      double coeff;
    };
    std::vector<Eigen::Index> sizes_, offsets_;
    Eigen::Index dim_ = 0;
    Matrix F0_;
    std::vector<Term> terms_;
  };

  Constraint make_constraint(std::vector<Eigen::Index> block_sizes) const {
    return Constraint(std::move(block_sizes));
  }
  void add_constraint(Constraint c) { constraints_.push_back(std::move(c)); }

  Eigen::Index num_scalar_vars() const { return total_coords_; }
  std::size_t num_constraints() const { return constraints_.size(); }

  /// Structure dump (variables, block sizes) for reproducing solver failures.
  std::string debug_json() const;

 private:
  friend SdpSolution sdp_feasible(const LmiProblem&, const SdpOptions&);

  struct Var {
    std::string name;
    Eigen::Index rows, cols;
    bool symmetric;
    Eigen::Index offset;  // first scalar coordinate
    Eigen::Index dim;     // number of scalar coordinates
  };
  std::vector<Var> vars_;
  std::vector<Constraint> constraints_;
  Eigen::Index total_coords_ = 0;
};

struct SdpOptions {
  double variable_bound = 1e5;  // box |y_i| <= bound keeps max-slack finite
  /// tol = this * min over constraints of max(1, ||F_k0||_inf), so one
  /// large benign constant block cannot inflate the verdict threshold.
  double feasibility_tol_scale = 1e-7;
  double mu_final = 1e-10;
  int max_newton_per_stage = 60;
};

struct SdpSolution {
  enum class Status { feasible, infeasible, indeterminate };
  Status status = Status::indeterminate;
  double slack = 0.0;              // maximized t with every constraint >= t I
  double certified_min_eig = 0.0;  // min eigenvalue over constraints at the assignment
  double tolerance = 0.0;
  std::map<std::string, Matrix> assignments;
  std::string diagnostics;

  const Matrix& value(const std::string& name) const;
};

/// max t such that every constraint F_k(y) >= t I, |y_i| <= bound.
/// Log-det barrier with Newton path following; verdicts are certified by
/// re-substitution (never trusted from the iteration alone).
SdpSolution sdp_feasible(const LmiProblem& problem, const SdpOptions& opts = {});

}  // namespace dpc
