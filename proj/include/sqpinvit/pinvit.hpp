#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sqpinvit/precond.hpp"

namespace sqpinvit {

/// Constants and tolerances of the inner iteration. c is the spectral
/// constant of the preconditioned operator, delta bounds
/// lambda_2 / (lambda_2 - lambda_1) from above.
struct SolverConfig {
  Real c = 0.0;
  Real delta = 0.0;
  Real eps_num = -1.0;  // defaults to (1 - c) / 2
  Real t_eig = 0.5;
  Real lambda1_lower = 0.0;  // rough lower estimate, enables the bounds
  int max_inner = 500;
  int max_outer = 64;
  Real alpha = 1.0;           // rank-slack parameter of the outer loop
  bool assume_res_rho = false;  // optimistic rho for the iterate truncation
  Real round_tol = Tolerances::roundoff;

  Real eps_iter() const { return c; }
  Real eps_num_eff() const { return eps_num > 0.0 ? eps_num : 0.5 * (1.0 - c); }
  Real zeta_res() const { return eps_num_eff() / (1.0 + c); }
};

struct ErrorBounds {
  bool available = false;
  Real rel_eig = 0.0;   // (lambda(x) - lambda_1) / lambda_1
  Real sin_bound = 0.0;  // sin of the A-angle to the eigenvector
  Real vec_err = 0.0;    // |u_1 - x/|x|_A|_A
};

struct IterationRecord {
  int n = 0;
  int m = -1;  // outer index, -1 for inner-only runs
  Real lambda = 0.0;
  Real rho = 0.0;
  Real eta_res = 0.0;
  Real eta_inner = 0.0;
  ErrorBounds bounds;
  RankVector ranks;
  RankVector residual_ranks;
  Real wall_ms = 0.0;
  bool step_fallback = false;  // degenerate 2x2 pencil, fixed step taken
};

enum class SolveStatus { Converged, MaxIterations, ConvergedAtRoundoff };

/// Exact Rayleigh quotient <A x, x> / <E x, x> evaluated term by term.
Real rayleigh(const CoefficientSet& coeffs, const ExpSumPrecond& p, const BlockMps& x);

/// |x|_A; sx_out, when given, receives the recompressed S x for reuse.
Real a_norm_block(const CoefficientSet& coeffs, const ExpSumPrecond& p, const BlockMps& x,
                  BlockMps* sx_out = nullptr);

struct ResidualResult {
  BlockMps res;
  Real eta_res = 0.0;
  Real term_norm_sum = 0.0;
  bool at_roundoff = false;
  int retries = 0;
};

/// Adaptive assembly of res ~ sum_{k,k'} S_k (H_gamma - lambda I) S_{k'} x
/// with |res - r(x)| <= eta_res <= zeta_res |r(x)|. eta_warm carries the
/// accepted value of the previous step (infinity initially).
ResidualResult assemble_residual(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                                 const BlockMps& x, Real lambda_x, Real zeta_res,
                                 Real eta_warm, Real round_tol = Tolerances::roundoff);

struct StepResult {
  BlockMps x_star;  // x - omega_star * res, not truncated
  Real lambda_star = 0.0;
  Real omega_star = 0.0;
  bool fallback = false;
};

/// Optimal step from the 2x2 reduced pencil on span{x, res}.
StepResult optimal_step(const CoefficientSet& coeffs, const ExpSumPrecond& p, const BlockMps& x,
                        const BlockMps& res, Real lambda_x,
                        Real round_tol = Tolerances::roundoff);

struct TruncateIterateResult {
  BlockMps x_next;
  Real eta_inner = 0.0;
  int retries = 0;
};

/// Rank truncation of the updated iterate, certified a posteriori by the
/// Rayleigh-quotient condition with parameter t_eig.
TruncateIterateResult truncate_iterate(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                                       const BlockMps& x_star, Real lambda_star, Real lambda_prev,
                                       Real rho_bound, const SolverConfig& cfg);

/// Upper bound (1-c)^{-1/2} (|res| + eta_res) / |x|_A on rho(x).
Real residual_rho_bound(Real res_norm, Real eta_res, Real xnorm_a, Real c);

/// b_delta(rho) = 2 delta / (1 + 2 delta rho^2 + sqrt(1 - 4 (delta-1) delta rho^2));
/// empty when rho^2 > 1 / (4 delta (delta - 1)).
std::optional<Real> b_delta(Real rho, Real delta);

/// A posteriori bounds from (lambda(x), rho, delta); requires the rough
/// lower estimate of lambda_1 for the admissibility check.
ErrorBounds aposteriori_bounds(Real lambda_x, Real rho, Real delta, Real lambda1_lower);

/// Smallest n with the guaranteed error reduction by 1/u (the a priori
/// inner-step bound).
int apriori_step_count(Real delta, Real eps, Real t_eig, Real u);

using IterationObserver = std::function<void(const BlockMps& iterate, const IterationRecord&)>;

struct InnerResult {
  SolveStatus status = SolveStatus::Converged;
  Real lambda = 0.0;
  BlockMps x;
  Real rho = 0.0;
  std::vector<IterationRecord> trace;
};

/// Perturbed preconditioned inverse iteration until the a posteriori
/// eigenvector bound drops below tau (A-norm error target).
InnerResult inner_iterate(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                          const BlockMps& x0, Real tau, const SolverConfig& cfg,
                          const IterationObserver& observer = {}, int n_offset = 0,
                          int outer_index = -1);

}  // namespace sqpinvit
