#pragma once

#include "sqpinvit/outer.hpp"

namespace sqpinvit {

struct SubspaceRecord {
  int n = 0;
  int m = -1;
  Vector lambdas;
  Vector rhos;
  ErrorBounds bounds_col1;
  std::vector<Real> rel_eig_heuristic;  // per column, same delta, not certified
  RankVector ranks;
  RankVector residual_ranks;
  Real eta_res = 0.0;
  Real eta_inner = 0.0;
  Real wall_ms = 0.0;
  bool ritz_fallback = false;
};

using SubspaceObserver = std::function<void(const BlockMps& X, const SubspaceRecord&)>;

/// Transforms the columns so that X^T A X = I with ascending Rayleigh
/// quotients on the diagonal of X^T E X inverse; returns them.
std::pair<BlockMps, Vector> joint_orthonormalize(const CoefficientSet& coeffs,
                                                 const ExpSumPrecond& p, const BlockMps& X);

struct JointResidualResult {
  BlockMps res;
  Real eta_res = 0.0;
  Vector column_norms;
  bool at_roundoff = false;
  int roundoff_column = -1;
};

JointResidualResult joint_residual(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                                   const BlockMps& X, const Vector& lambdas, Real zeta_res,
                                   Real eta_warm, Real round_tol = Tolerances::roundoff);

struct RitzResult {
  BlockMps x_star;     // A-orthonormal columns
  Vector lambda_star;  // ascending
  bool fallback = false;
  int dropped_columns = 0;
};

/// Lowest-D Ritz step on span{X, R} with the norm rescalings of the
/// stabilized 2D x 2D pencil.
RitzResult ritz_update(const CoefficientSet& coeffs, const ExpSumPrecond& p, const BlockMps& X,
                       const BlockMps& R, Real round_tol = Tolerances::roundoff);

struct JointTruncateResult {
  BlockMps x_next;
  Real eta_inner = 0.0;
};

/// Single worst-case tolerance over columns, re-verified per column.
JointTruncateResult joint_truncate(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                                   const BlockMps& x_star, const Vector& lambda_star,
                                   const Vector& lambda_prev, const Vector& rhos,
                                   const SolverConfig& cfg);

struct SubspaceResult {
  SolveStatus status = SolveStatus::Converged;
  Vector lambdas;
  BlockMps x;
  Vector rhos;
  std::vector<SubspaceRecord> trace;
  std::vector<int> inner_counts;
  std::vector<Real> eta_schedule;
};

/// Joint inner iteration; terminates on the certified column-1 bound.
SubspaceResult subspace_inner(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                              const BlockMps& X0, Real tau1, const SolverConfig& cfg,
                              const SubspaceObserver& observer = {}, int n_offset = 0,
                              int outer_index = -1);

/// Outer wrapper; the heuristic secondary criterion also requires every
/// column's (uncertified) relative eigenvalue estimate below tau.
SubspaceResult subspace_outer(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                              const BlockMps& Y0, Real tau, const SolverConfig& cfg,
                              Real eta0_override = 0.0, const SubspaceObserver& observer = {});

}  // namespace sqpinvit
