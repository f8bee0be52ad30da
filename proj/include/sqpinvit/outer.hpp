#pragma once

#include "sqpinvit/pinvit.hpp"

namespace sqpinvit {

/// Derived constants of the rank-controlled outer loop; ncuts = K - 1
/// matricizations enter the quasi-optimality constant (also for joint
/// stacks, whose extra cut carries at most D values and is handled by the
/// worst-case column accounting).
struct OuterConfig {
  Real alpha = 1.0;
  Real kappa = 0.0;
  Real theta = 0.0;
  Real eta0 = 0.0;

  static OuterConfig derive(Real c, int ncuts, Real alpha, int D,
                            Real eta0_override = 0.0);
  Real tau_m(Real eta) const { return eta / (2.0 * (1.0 + (1.0 + alpha) * kappa)); }
};

struct OuterResult {
  SolveStatus status = SolveStatus::Converged;
  Real lambda = 0.0;
  BlockMps y;
  Real rho = 0.0;
  std::vector<IterationRecord> trace;
  std::vector<int> inner_counts;   // inner steps per outer step
  std::vector<Real> eta_schedule;  // eta_outer^m per outer step
};

/// Tolerance-halving outer iteration with post-inner rank truncation;
/// terminates when the relative eigenvalue bound drops below tau.
OuterResult outer_iterate(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                          const BlockMps& y0, Real tau, const SolverConfig& cfg,
                          Real eta0_override = 0.0, const IterationObserver& observer = {});

/// Ranks of the TT-SVD truncation of the dense eigenvector at A-norm
/// tolerance eps_a (an upper-bound surrogate for the best-approximation
/// rank). u1_full is the eigenvector embedded in the full 2^K space.
RankVector rank_reference(const Vector& u1_full, int order, Real eps_a, Real c);

}  // namespace sqpinvit
