#include "sqpinvit/precond.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sqpinvit/oracle.hpp"

namespace sqpinvit {

ExpSumParams build_params(Real c0, Real T) {
  if (!(c0 > 0.0 && c0 < 1.0)) throw DimensionError("c0 must lie in (0, 1)");
  if (!(T >= 1.0)) throw DimensionError("T must be at least 1");
  ExpSumParams p;
  p.c0 = c0;
  p.T = T;
  const Real pi = M_PI;
  p.h = pi * pi / std::log(8.0 * std::sqrt(2.0) / c0 + 1.0);
  const Real l = std::abs(std::log(std::sqrt(pi) * c0 / 4.0));
  p.m_plus = static_cast<int>(std::ceil(std::log(l) / p.h));
  p.m_minus = -static_cast<int>(std::ceil((2.0 * l + std::log(T)) / p.h));
  return p;
}

Real expsum_eval(const ExpSumParams& p, Real t) {
  Real s = 0.0;
  for (int m = p.m_minus; m <= p.m_plus; ++m)
    s += std::exp(0.5 * m * p.h) * std::exp(-std::exp(m * p.h) * t);
  return p.h / std::sqrt(M_PI) * s;
}

std::pair<Real, Real> sector_diag_bounds(const Vector& d, int N) {
  if (N < 1) throw DimensionError("sector spectral bounds need N >= 1");
  std::vector<Real> v(d.data(), d.data() + d.size());
  std::sort(v.begin(), v.end());
  Real lo = std::accumulate(v.begin(), v.begin() + N, 0.0);
  Real hi = std::accumulate(v.end() - N, v.end(), 0.0);
  return {lo, hi};
}

ExpSumPrecond build_precond(const CoefficientSet& coeffs, Real c0, Real c_lower, Real c_upper,
                            const SectorShape& shape) {
  coeffs.validate();
  ExpSumPrecond p;
  auto [tmin, tmax] = sector_diag_bounds(coeffs.d, shape.N);
  p.t_min = tmin;
  p.t_max = tmax;
  p.params = build_params(c0, std::max(1.0, tmax / tmin));
  const Real lo = c_lower * (1.0 - c0) * (1.0 - c0);
  const Real hi = c_upper * (1.0 + c0) * (1.0 + c0);
  p.alpha0 = std::sqrt(2.0 / (tmin * (lo + hi)));
  p.c = (hi - lo) / (hi + lo);

  const int K = coeffs.K;
  const Real log_min_positive = std::log(std::numeric_limits<Real>::min());
  for (int m = p.params.m_minus; m <= p.params.m_plus; ++m) {
    const Real log_alpha =
        std::log(p.params.h * p.alpha0 / std::sqrt(M_PI)) + 0.5 * m * p.params.h;
    const Real beta = std::exp(m * p.params.h) / tmin;
    // the largest scalar this term contributes on the sector
    if (log_alpha - beta * tmin < log_min_positive) {
      ++p.dropped_terms;
      continue;
    }
    p.alpha.push_back(std::exp(log_alpha));
    p.beta.push_back(beta);
    p.site_scale.push_back(std::exp(log_alpha / K));
    Vector occ(K);
    for (int i = 0; i < K; ++i) {
      const Real log_f = log_alpha / K - beta * coeffs.d(i);
      occ(i) = std::max(std::exp(log_f), std::numeric_limits<Real>::min());
    }
    p.occ_factor.push_back(std::move(occ));
  }
  return p;
}

TermPlan precond_term_plan(const ExpSumPrecond& p, int m, int K) {
  TermPlan plan;
  plan.factors.resize(K);
  for (int i = 0; i < K; ++i) {
    plan.factors[i].kind = SiteFactor::Diag;
    plan.factors[i].a = p.site_scale[m];
    plan.factors[i].b = p.occ_factor[m](i);
  }
  return plan;
}

BlockMps apply_precond_term(const ExpSumPrecond& p, int m, const BlockMps& x) {
  if (m < 0 || m >= p.num_terms()) throw DimensionError("term index out of range");
  return apply_term(precond_term_plan(p, m, x.shape.K), x);
}

BlockMps apply_precond(const ExpSumPrecond& p, const BlockMps& x, Real round_tol) {
  BlockMps sum = apply_precond_term(p, 0, x);
  for (int m = 1; m < p.num_terms(); ++m) {
    sum = block_add(sum, apply_precond_term(p, m, x));
    if (round_tol > 0.0 && (m % 8 == 0)) sum = block_round(sum, round_tol);
  }
  return round_tol > 0.0 ? block_round(sum, round_tol) : sum;
}

ConstantEstimates estimate_constants(const CoefficientSet& coeffs, const SectorShape& shape,
                                     const std::vector<int>& k_low, Real c0, Index oracle_cap) {
  struct Exact {
    Real c_lower, c_upper, delta, lambda1;
  };
  auto exact_at = [&](int k) -> Exact {
    CoefficientSet r = k == coeffs.K ? coeffs : restrict_coefficients(coeffs, k);
    SectorBasis basis = make_sector_basis(k, shape.N, oracle_cap);
    Matrix h = dense_h_gamma(r, basis);
    Matrix d = dense_diag_operator(r.d, basis);
    Vector dinv = d.diagonal().array().rsqrt();
    Matrix w = dinv.asDiagonal() * h * dinv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> ew(0.5 * (w + w.transpose()));
    Eigen::SelfAdjointEigenSolver<Matrix> eh(0.5 * (h + h.transpose()));
    const Vector& lam = eh.eigenvalues();
    Real delta = lam(1) / (lam(1) - lam(0));
    return {ew.eigenvalues().minCoeff(), ew.eigenvalues().maxCoeff(), delta, lam(0)};
  };

  ConstantEstimates out;
  std::vector<int> ks = k_low;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.empty()) throw DimensionError("need at least one reference size");

  if (coeffs.K <= ks.back() || ks.size() == 1) {
    // small enough (or single reference): compute directly
    const int k = std::min(coeffs.K, ks.back());
    Exact e = exact_at(coeffs.K <= ks.back() ? coeffs.K : k);
    out.c_lower = e.c_lower;
    out.c_upper = e.c_upper;
    out.delta = e.delta;
    out.lambda1_lower = e.lambda1 * (1.0 - 1e-10);
    out.exact = coeffs.K <= ks.back();
  } else {
    const int k1 = ks[ks.size() - 2], k2 = ks.back();
    Exact e1 = exact_at(k1);
    Exact e2 = exact_at(k2);
    const Real k = Real(coeffs.K - k2) / Real(k2 - k1);
    auto extrap = [&](Real a1, Real a2) { return std::pow(a2, 1.0 + k) * std::pow(a1, -k); };
    out.c_lower = extrap(e1.c_lower, e2.c_lower);
    out.c_upper = extrap(e1.c_upper, e2.c_upper);
    out.delta = std::max(e2.delta, extrap(e1.delta, e2.delta));
    out.lambda1_lower = std::min(e2.lambda1, extrap(e1.lambda1, e2.lambda1)) * 0.9;
    out.exact = false;
  }
  const Real lo = out.c_lower * (1.0 - c0) * (1.0 - c0);
  const Real hi = out.c_upper * (1.0 + c0) * (1.0 + c0);
  out.c = (hi - lo) / (hi + lo);
  return out;
}

}  // namespace sqpinvit
