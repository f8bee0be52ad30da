#include "sqpinvit/outer.hpp"

#include <cmath>

namespace sqpinvit {

OuterConfig OuterConfig::derive(Real c, int ncuts, Real alpha, int D, Real eta0_override) {
  OuterConfig cfg;
  cfg.alpha = alpha;
  cfg.kappa = std::sqrt((1.0 + c) / (1.0 - c)) * std::sqrt(static_cast<Real>(ncuts));
  cfg.theta = (1.0 + alpha) * cfg.kappa / (2.0 * (1.0 + (1.0 + alpha) * cfg.kappa));
  cfg.eta0 = eta0_override > 0.0 ? eta0_override
                                 : 1.0 / (2.0 * cfg.theta * std::sqrt(static_cast<Real>(D)));
  return cfg;
}

OuterResult outer_iterate(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                          const BlockMps& y0, Real tau, const SolverConfig& cfg,
                          Real eta0_override, const IterationObserver& observer) {
  OuterConfig oc = OuterConfig::derive(cfg.c, y0.shape.K - 1, cfg.alpha, 1, eta0_override);
  OuterResult out;
  BlockMps y = block_scale(y0, 1.0 / a_norm_block(coeffs, p, y0));
  Real eta = oc.eta0;
  int n_total = 0;
  for (int m = 0; m < cfg.max_outer; ++m) {
    out.eta_schedule.push_back(eta);
    InnerResult inner =
        inner_iterate(coeffs, p, y, oc.tau_m(eta), cfg, observer, n_total, m);
    out.inner_counts.push_back(static_cast<int>(inner.trace.size()));
    n_total += static_cast<int>(inner.trace.size());
    out.trace.insert(out.trace.end(), inner.trace.begin(), inner.trace.end());
    if (inner.status == SolveStatus::MaxIterations) {
      out.status = SolveStatus::MaxIterations;
      out.lambda = inner.lambda;
      out.y = std::move(inner.x);
      out.rho = inner.rho;
      return out;
    }
    auto bounds = aposteriori_bounds(inner.lambda, inner.rho, cfg.delta, cfg.lambda1_lower);
    if ((bounds.available && bounds.rel_eig < tau) ||
        inner.status == SolveStatus::ConvergedAtRoundoff) {
      out.status = inner.status;
      out.lambda = inner.lambda;
      out.y = std::move(inner.x);
      out.rho = inner.rho;
      return out;
    }
    // complexity reduction: certified A-norm truncation at theta * eta
    BlockMps trunc = truncate_block(inner.x, oc.theta * eta / std::sqrt(1.0 + cfg.c)).mps;
    y = block_scale(trunc, 1.0 / a_norm_block(coeffs, p, trunc));
    eta *= 0.5;
  }
  out.status = SolveStatus::MaxIterations;
  out.y = y;
  out.lambda = rayleigh(coeffs, p, y);
  return out;
}

RankVector rank_reference(const Vector& u1_full, int order, Real eps_a, Real c) {
  const Real eps = eps_a / std::sqrt(1.0 + c);
  if (eps >= u1_full.norm()) return RankVector(order - 1, 0);  // zero tensor admissible
  TTSvdResult svd = tt_from_full(u1_full, order);
  TruncationResult tr = tt_truncate(svd.tt, eps);
  return tr.kept;
}

}  // namespace sqpinvit
