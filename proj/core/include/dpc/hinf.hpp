#pragma once

#include <optional>

#include "dpc/linsys.hpp"
#include "dpc/lmi.hpp"
#include "dpc/types.hpp"

namespace dpc {

/// H-infinity norm of a Schur-stable discrete-time system: the peak of
/// sigma_max(C (zI - A)^{-1} B + D) over the unit circle. Adaptive sweep:
/// 512-point grid seeded with the pole angles, then golden-section refinement
/// of every local peak down to the requested relative tolerance.
double hinf_norm(const StateSpace& sys, double tol = 1e-6);

/// Independent route: bisection on the bounded-real-lemma LMI feasibility.
double hinf_norm_brl(const StateSpace& sys, double tol = 1e-6,
                     const SdpOptions& opts = {});

/// Decision variables shared by the observer and controller LMIs. When
/// L1_fixed is set, Lhat is
/// eliminated as P * L1 and only P remains free.
struct ObserverDesignVars {
  LmiProblem::VarId P = 0;
  std::optional<LmiProblem::VarId> Lhat;
  std::optional<Matrix> L1_fixed;
};

ObserverDesignVars add_observer_design_variables(LmiProblem& problem, const StateSpace& plant,
                                const std::optional<Matrix>& L1_fixed = std::nullopt);

/// Observer LMI: [[P, P A_p + Lhat C_p], [sym, P]] > 0.
void add_observer_lmi(LmiProblem& problem, const StateSpace& plant, const Matrix& G1,
                      const ObserverDesignVars& vars);

/// Controller H-infinity LMI (the 4x4 block matrix with gamma^2 I).
void add_controller_hinf_lmi(LmiProblem& problem, const StateSpace& plant,
                             const Matrix& G1, double gamma, const ObserverDesignVars& vars);

/// Strong-stabilizability certificate: [[P, P13],[P13', P]] > 0.
void add_strong_stabilizability_lmi(LmiProblem& problem, const StateSpace& plant,
                                    const Matrix& G1, const ObserverDesignVars& vars);

/// Closed-loop H-infinity LMI (6x6 blocks, extra variable Q).
void add_closed_loop_hinf_lmi(LmiProblem& problem, const StateSpace& plant,
                              const Matrix& G1, double gamma_bar, const ObserverDesignVars& vars,
                              LmiProblem::VarId Q);

struct ObserverDesignResult {
  SdpSolution solution;
  Matrix P;
  Matrix L1;
};

/// Joint feasibility of the observer and controller LMIs at the given gamma
/// (plus the closed-loop LMI when gamma_bar is set); L1 = P^{-1} Lhat.
ObserverDesignResult solve_observer_hinf_design(const StateSpace& plant, const Matrix& G1, double gamma,
                          const std::optional<Matrix>& L1_fixed = std::nullopt,
                          std::optional<double> gamma_bar = std::nullopt,
                          const SdpOptions& opts = {});

/// Feasibility of {observer LMI, strong-stabilizability LMI} for the given G1.
bool strong_stabilizability_feasible(const StateSpace& plant, const Matrix& G1,
                                     const SdpOptions& opts = {});

/// Bisection for the smallest gamma with feasible design LMIs, relative
/// width 1e-3; requires feasibility at the bracket's upper end.
double min_feasible_gamma(const StateSpace& plant, const Matrix& G1, double gamma_lo,
                          double gamma_hi, const SdpOptions& opts = {});

}  // namespace dpc
