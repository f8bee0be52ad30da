#pragma once

#include <vector>

#include "sqpinvit/second_quant.hpp"

namespace sqpinvit {

/// Sinc-quadrature parameters for the exponential-sum approximation of
/// t^{-1/2} with relative accuracy c0 on [1, T].
struct ExpSumParams {
  Real c0 = 0.0;
  Real T = 1.0;
  Real h = 0.0;
  int m_minus = 0;
  int m_plus = 0;

  int num_terms() const { return m_plus - m_minus + 1; }
};

ExpSumParams build_params(Real c0, Real T);

/// Scalar evaluation of the truncated exponential sum S(t).
Real expsum_eval(const ExpSumParams& p, Real t);

/// Low-rank approximate inverse square root S = sum_m S_m of the diagonal
/// one-particle operator D = sum_i d_i a_i* a_i, rescaled so that the
/// spectrum of S H_gamma S lies in [1-c, 1+c]. Each S_m acts as a product
/// of per-orbital diagonal 2x2 factors and never increases ranks.
struct ExpSumPrecond {
  ExpSumParams params;
  Real t_min = 0.0;
  Real t_max = 0.0;
  Real alpha0 = 0.0;
  Real c = 0.0;  // spectral constant per the coefficient combination
  std::vector<Real> alpha;          // term weights
  std::vector<Real> beta;           // term exponents
  std::vector<Vector> occ_factor;   // per term: occupied-state factor per orbital
  std::vector<Real> site_scale;     // per term: alpha_m^(1/K)
  int dropped_terms = 0;

  int num_terms() const { return static_cast<int>(alpha.size()); }
};

/// Sector-restricted spectral bounds of D: sums of the N smallest/largest d_i.
std::pair<Real, Real> sector_diag_bounds(const Vector& d, int N);

ExpSumPrecond build_precond(const CoefficientSet& coeffs, Real c0, Real c_lower, Real c_upper,
                            const SectorShape& shape);

/// Applies one rank-one term S_m; ranks and sector are unchanged.
BlockMps apply_precond_term(const ExpSumPrecond& p, int m, const BlockMps& x);

/// S x = sum_m S_m x, recompressed at round-off level when round_tol > 0.
BlockMps apply_precond(const ExpSumPrecond& p, const BlockMps& x,
                       Real round_tol = Tolerances::roundoff);

/// Per-orbital diagonal factors of term m as a TermPlan (for contractions).
TermPlan precond_term_plan(const ExpSumPrecond& p, int m, int K);

/// Spectral constants estimated from dense solves at small orbital counts and
/// geometric extrapolation to the target K.
struct ConstantEstimates {
  Real c_lower = 0.0;
  Real c_upper = 0.0;
  Real c = 0.0;       // from c0 and the bounds
  Real delta = 0.0;   // >= lambda_2 / (lambda_2 - lambda_1)
  Real lambda1_lower = 0.0;  // rough lower estimate of lambda_1
  bool exact = false;        // true when computed directly at the target K
};

ConstantEstimates estimate_constants(const CoefficientSet& coeffs, const SectorShape& shape,
                                     const std::vector<int>& k_low, Real c0,
                                     Index oracle_cap = 4000);

}  // namespace sqpinvit
