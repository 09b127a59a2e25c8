#include "dpc/lmi.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace dpc {

LmiProblem::VarId LmiProblem::add_symmetric(const std::string& name, Eigen::Index n) {
  Var v{name, n, n, true, total_coords_, n * (n + 1) / 2};
  total_coords_ += v.dim;
  vars_.push_back(v);
  return vars_.size() - 1;
}

LmiProblem::VarId LmiProblem::add_matrix(const std::string& name, Eigen::Index rows,
                                         Eigen::Index cols) {
  Var v{name, rows, cols, false, total_coords_, rows * cols};
  total_coords_ += v.dim;
  vars_.push_back(v);
  return vars_.size() - 1;
}

LmiProblem::Constraint::Constraint(std::vector<Eigen::Index> block_sizes)
    : sizes_(std::move(block_sizes)) {
  offsets_.resize(sizes_.size());
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    offsets_[i] = dim_;
    dim_ += sizes_[i];
  }
  F0_ = Matrix::Zero(dim_, dim_);
}

void LmiProblem::Constraint::add_const(int r, int c, const Matrix& M) {
  if (M.rows() != sizes_[r] || M.cols() != sizes_[c])
    throw_validation("LMI constraint: constant block has wrong size");
  if (r == c) {
    F0_.block(offsets_[r], offsets_[c], sizes_[r], sizes_[c]) +=
        0.5 * (M + M.transpose());
  } else {
    F0_.block(offsets_[r], offsets_[c], sizes_[r], sizes_[c]) += M;
    F0_.block(offsets_[c], offsets_[r], sizes_[c], sizes_[r]) += M.transpose();
  }
}

void LmiProblem::Constraint::add_term(int r, int c, VarId v, const Matrix& left,
                                      const Matrix& right, bool transpose_var,
                                      double coeff) {
  if (left.rows() != sizes_[r] || right.cols() != sizes_[c])
    throw_validation("LMI constraint: term block has wrong outer dimensions");
  terms_.push_back(Term{r, c, v, left, right, transpose_var, coeff});
}

void LmiProblem::Constraint::add_identity_term(int r, int c, VarId v, double coeff) {
  terms_.push_back(Term{r, c, v, Matrix(), Matrix(), false, coeff});
}

std::string LmiProblem::debug_json() const {
  std::ostringstream os;
  os << "{\"variables\":[";
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const auto& v = vars_[i];
    os << (i ? "," : "") << "{\"name\":\"" << v.name << "\",\"rows\":" << v.rows
       << ",\"cols\":" << v.cols << ",\"symmetric\":" << (v.symmetric ? "true" : "false")
       << "}";
  }
  os << "],\"constraints\":[";
  for (std::size_t k = 0; k < constraints_.size(); ++k) {
    os << (k ? "," : "") << "{\"blocks\":[";
    for (std::size_t b = 0; b < constraints_[k].sizes_.size(); ++b)
      os << (b ? "," : "") << constraints_[k].sizes_[b];
    os << "],\"terms\":" << constraints_[k].terms_.size() << "}";
  }
  os << "],\"scalar_variables\":" << total_coords_ << "}";
  return os.str();
}

const Matrix& SdpSolution::value(const std::string& name) const {
  auto it = assignments.find(name);
  if (it == assignments.end())
    throw_validation("SdpSolution: no variable named '" + name + "'");
  return it->second;
}

namespace {

// Scalar-coordinate basis matrix k of a variable (upper triangle for symmetric).
Matrix coord_basis(Eigen::Index rows, Eigen::Index cols, bool symmetric, Eigen::Index k) {
  Matrix E = Matrix::Zero(rows, cols);
  if (!symmetric) {
    E(k / cols, k % cols) = 1.0;
    return E;
  }
  Eigen::Index i = 0, j = 0, count = 0;
  for (i = 0; i < rows; ++i) {
    const Eigen::Index row_len = rows - i;
    if (k < count + row_len) {
      j = i + (k - count);
      break;
    }
    count += row_len;
  }
  E(i, j) = 1.0;
  E(j, i) = 1.0;
  return E;
}

struct DenseBlock {
  Matrix F0;
  // coordinate index -> dense coefficient matrix
  std::map<Eigen::Index, Matrix> coeff;
};

}  // namespace

SdpSolution sdp_feasible(const LmiProblem& problem, const SdpOptions& opts) {
  const Eigen::Index p = problem.total_coords_;
  const Eigen::Index t_idx = p;           // slack coordinate appended last
  const Eigen::Index nv = p + 1;

  // Expand constraints to per-coordinate dense matrices. The feasibility
  // tolerance is anchored to the best-scaled constraint: a huge benign
  // constant in one block (a vacuous gamma^2 I, say) must not inflate it.
  std::vector<DenseBlock> blocks;
  double const_scale = std::numeric_limits<double>::infinity();
  for (const auto& con : problem.constraints_) {
    DenseBlock blk;
    blk.F0 = con.F0_;
    const_scale = std::min(const_scale, std::max(1.0, con.F0_.cwiseAbs().maxCoeff()));
    for (const auto& term : con.terms_) {
      const auto& var = problem.vars_[term.var];
      const Eigen::Index r0 = con.offsets_[term.r], c0 = con.offsets_[term.c];
      const Eigen::Index rs = con.sizes_[term.r], cs = con.sizes_[term.c];
      for (Eigen::Index k = 0; k < var.dim; ++k) {
        Matrix E = coord_basis(var.rows, var.cols, var.symmetric, k);
        if (term.transpose_var) E.transposeInPlace();
        Matrix M;
        if (term.left.size() == 0)
          M = term.coeff * E;  // identity term
        else
          M = term.coeff * term.left * E * term.right;
        auto [it, fresh] = blk.coeff.try_emplace(var.offset + k,
                                                 Matrix::Zero(con.dim_, con.dim_));
        Matrix& tgt = it->second;
        if (term.r == term.c) {
          tgt.block(r0, c0, rs, cs) += 0.5 * (M + M.transpose());
        } else {
          tgt.block(r0, c0, rs, cs) += M;
          tgt.block(c0, r0, cs, rs) += M.transpose();
        }
      }
    }
    // slack: F(y) - t I
    blk.coeff[t_idx] = -Matrix::Identity(con.dim_, con.dim_);
    blocks.push_back(std::move(blk));
  }

  SdpSolution sol;
  if (blocks.empty()) {
    sol.tolerance = opts.feasibility_tol_scale;
    sol.status = SdpSolution::Status::feasible;
    sol.slack = opts.variable_bound;
    return sol;
  }
  sol.tolerance = opts.feasibility_tol_scale * const_scale;

  // Strictly feasible start: y = 0, t below every lambda_min(F0).
  double tmin = std::numeric_limits<double>::infinity();
  for (const auto& blk : blocks) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(blk.F0);
    tmin = std::min(tmin, es.eigenvalues()(0));
  }
  Vector y = Vector::Zero(nv);
  y(t_idx) = tmin - std::max(1.0, 0.1 * std::abs(tmin));
  const double bound = std::max(opts.variable_bound, 2.0 * std::abs(y(t_idx)));

  // Box blocks (1x1) for every coordinate including the slack.
  struct BoxBlock { Eigen::Index idx; double sign; };
  std::vector<BoxBlock> boxes;
  for (Eigen::Index i = 0; i < nv; ++i) {
    boxes.push_back({i, +1.0});
    boxes.push_back({i, -1.0});
  }

  auto eval_blocks = [&](const Vector& yv, std::vector<Matrix>& out) {
    out.resize(blocks.size());
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      out[k] = blocks[k].F0;
      for (const auto& [i, Fi] : blocks[k].coeff) out[k] += yv(i) * Fi;
    }
  };

  auto strictly_feasible = [&](const std::vector<Matrix>& mats, const Vector& yv) {
    for (const auto& F : mats) {
      Eigen::LLT<Matrix> llt(F);
      if (llt.info() != Eigen::Success) return false;
    }
    for (const auto& b : boxes)
      if (bound + b.sign * yv(b.idx) <= 0) return false;
    return true;
  };

  auto barrier_value = [&](const std::vector<Matrix>& mats, const Vector& yv) {
    double val = 0.0;
    for (const auto& F : mats) {
      Eigen::LLT<Matrix> llt(F);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const Matrix& L = llt.matrixLLT();
      for (Eigen::Index i = 0; i < L.rows(); ++i) val -= 2.0 * std::log(L(i, i));
    }
    for (const auto& b : boxes) val -= std::log(bound + b.sign * yv(b.idx));
    return val;
  };

  std::vector<Matrix> mats;
  eval_blocks(y, mats);
  if (!strictly_feasible(mats, y)) {
    sol.status = SdpSolution::Status::indeterminate;
    sol.diagnostics = "could not construct a strictly feasible starting point";
    return sol;
  }

  const double t_scale = std::max(1.0, std::abs(y(t_idx)));
  double mu = t_scale;
  const double mu_final = opts.mu_final * std::max(1.0, const_scale);
  bool newton_trouble = false;

  while (mu > mu_final) {
    for (int it = 0; it < opts.max_newton_per_stage; ++it) {
      eval_blocks(y, mats);
      Vector g = Vector::Zero(nv);
      g(t_idx) = -1.0 / mu;  // maximize t
      Matrix H = Matrix::Zero(nv, nv);
      bool bad = false;
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        Eigen::LLT<Matrix> llt(mats[k]);
        if (llt.info() != Eigen::Success) { bad = true; break; }
        const Matrix I = Matrix::Identity(mats[k].rows(), mats[k].cols());
        const Matrix Finv = llt.solve(I);
        std::vector<std::pair<Eigen::Index, Matrix>> S;
        S.reserve(blocks[k].coeff.size());
        for (const auto& [i, Fi] : blocks[k].coeff) {
          Matrix Si = Finv * Fi;
          g(i) -= Si.trace();
          S.emplace_back(i, std::move(Si));
        }
        for (std::size_t a = 0; a < S.size(); ++a)
          for (std::size_t b = a; b < S.size(); ++b) {
            const double v = (S[a].second.array() * S[b].second.transpose().array()).sum();
            H(S[a].first, S[b].first) += v;
            if (a != b) H(S[b].first, S[a].first) += v;
          }
      }
      if (bad) { newton_trouble = true; break; }
      for (const auto& b : boxes) {
        const double d = bound + b.sign * y(b.idx);
        g(b.idx) -= b.sign / d;
        H(b.idx, b.idx) += 1.0 / (d * d);
      }
      Eigen::LDLT<Matrix> ldlt(H);
      Vector dy = ldlt.solve(-g);
      if (!dy.allFinite()) { newton_trouble = true; break; }
      const double lambda2 = -g.dot(dy);
      if (lambda2 < 1e-14) break;  // centered
      // backtracking, keeping strict feasibility
      const double f0 = -y(t_idx) / mu + barrier_value(mats, y);
      double step = 1.0;
      bool moved = false;
      std::vector<Matrix> mtrial;
      while (step > 1e-13) {
        const Vector yt = y + step * dy;
        eval_blocks(yt, mtrial);
        if (strictly_feasible(mtrial, yt)) {
          const double ft = -yt(t_idx) / mu + barrier_value(mtrial, yt);
          if (ft <= f0 - 1e-4 * step * lambda2) {
            y = yt;
            moved = true;
            break;
          }
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    mu /= 8.0;
  }

  sol.slack = y(t_idx);
  // Certify by re-substitution: minimum eigenvalue of every constraint F_k(y)
  // itself (slack term excluded), never trusted from the iteration.
  {
    Vector y_no_slack = y;
    y_no_slack(t_idx) = 0.0;
    eval_blocks(y_no_slack, mats);
  }
  double min_eig = std::numeric_limits<double>::infinity();
  for (const auto& F : mats) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(F);
    min_eig = std::min(min_eig, es.eigenvalues()(0));
  }
  sol.certified_min_eig = min_eig;

  for (const auto& var : problem.vars_) {
    Matrix V = Matrix::Zero(var.rows, var.cols);
    for (Eigen::Index k = 0; k < var.dim; ++k)
      V += y(var.offset + k) * coord_basis(var.rows, var.cols, var.symmetric, k);
    sol.assignments[var.name] = V;
  }

  if (newton_trouble && sol.slack <= sol.tolerance) {
    sol.status = SdpSolution::Status::indeterminate;
    sol.diagnostics = "Newton iteration stalled before reaching a verdict; " +
                      problem.debug_json();
  } else if (sol.slack > sol.tolerance && min_eig >= sol.slack * (1.0 - 1e-9)) {
    sol.status = SdpSolution::Status::feasible;
  } else {
    sol.status = SdpSolution::Status::infeasible;
    sol.diagnostics = "max slack " + std::to_string(sol.slack) + " below tolerance " +
                      std::to_string(sol.tolerance);
  }
  return sol;
}

}  // namespace dpc
