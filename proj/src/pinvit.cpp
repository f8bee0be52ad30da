#include "sqpinvit/pinvit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace sqpinvit {

Real a_norm_block(const CoefficientSet& coeffs, const ExpSumPrecond& p, const BlockMps& x,
                  BlockMps* sx_out) {
  BlockMps sx = apply_precond(p, x);
  const Real num = h_form(coeffs, sx, sx);
  if (sx_out) *sx_out = std::move(sx);
  return std::sqrt(std::max(0.0, num));
}

Real rayleigh(const CoefficientSet& coeffs, const ExpSumPrecond& p, const BlockMps& x) {
  BlockMps sx = apply_precond(p, x);
  const Real den = block_inner(sx, sx);
  if (den <= 0.0) throw DimensionError("Rayleigh quotient of the zero vector");
  return h_form(coeffs, sx, sx) / den;
}

ResidualResult assemble_residual(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                                 const BlockMps& x, Real lambda_x, Real zeta_res,
                                 Real eta_warm, Real round_tol) {
  const int M = p.num_terms();
  // w_k' = (H_gamma - lambda I) S_k' x, then s_{k,k'} = S_k w_k'
  std::vector<BlockMps> terms;
  terms.reserve(M * M);
  for (int kp = 0; kp < M; ++kp) {
    BlockMps skx = apply_precond_term(p, kp, x);
    BlockMps w = apply_shifted_hamiltonian(coeffs, skx, -lambda_x, round_tol);
    for (int k = 0; k < M; ++k) terms.push_back(apply_precond_term(p, k, w));
  }
  std::vector<Real> norms(terms.size());
  for (size_t j = 0; j < terms.size(); ++j) norms[j] = block_norm(terms[j]);
  std::vector<size_t> order(terms.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return norms[a] < norms[b]; });

  ResidualResult out;
  out.term_norm_sum = std::accumulate(norms.begin(), norms.end(), 0.0);
  Real eta = std::min(eta_warm * 2.0, 0.8 * zeta_res * out.term_norm_sum);
  const Real floor = 64.0 * std::numeric_limits<Real>::epsilon() * out.term_norm_sum;

  BlockMps last_res = block_scale(x, 0.0);
  while (true) {
    if (eta <= floor || out.term_norm_sum == 0.0) {
      // the unperturbed residual is zero to working precision; the last
      // attempt still certifies |r(x)| <= |res| + eta
      out.at_roundoff = true;
      out.eta_res = eta;
      out.res = std::move(last_res);
      return out;
    }
    // omit the smallest-prefix terms worth at most eta/3
    size_t j0 = 0;
    Real prefix = 0.0;
    while (j0 < order.size() && prefix + norms[order[j0]] <= eta / 3.0)
      prefix += norms[order[j0++]];
    Real tail = 0.0;
    for (size_t j = j0; j < order.size(); ++j) tail += norms[order[j]];
    BlockMps acc;
    bool has = false;
    for (size_t j = j0; j < order.size(); ++j) {
      const Real eps_j = tail > 0.0 ? eta * norms[order[j]] / (3.0 * tail) : 0.0;
      if (!has) {
        acc = terms[order[j]];
        has = true;
      } else {
        acc = block_add(acc, terms[order[j]]);
      }
      acc = truncate_block(acc, eps_j).mps;
    }
    BlockMps res = has ? truncate_block(acc, eta / 3.0).mps : block_scale(x, 0.0);
    const Real res_norm = block_norm(res);
    if (res_norm >= (1.0 + 1.0 / zeta_res) * eta) {
      out.res = std::move(res);
      out.eta_res = eta;
      return out;
    }
    last_res = std::move(res);
    eta *= 0.8;
    ++out.retries;
  }
}

Real residual_rho_bound(Real res_norm, Real eta_res, Real xnorm_a, Real c) {
  if (res_norm < 0.0 || eta_res < 0.0 || xnorm_a <= 0.0 || c >= 1.0)
    throw DimensionError("invalid arguments for the rho bound");
  return (res_norm + eta_res) / (std::sqrt(1.0 - c) * xnorm_a);
}

std::optional<Real> b_delta(Real rho, Real delta) {
  if (delta <= 1.0) throw DimensionError("delta must exceed 1");
  Real disc = 1.0 - 4.0 * (delta - 1.0) * delta * rho * rho;
  if (disc < 0.0 && disc > -1e-12) disc = 0.0;  // admissibility boundary
  if (disc < 0.0) return std::nullopt;
  return 2.0 * delta / (1.0 + 2.0 * delta * rho * rho + std::sqrt(disc));
}

ErrorBounds aposteriori_bounds(Real lambda_x, Real rho, Real delta, Real lambda1_lower) {
  ErrorBounds out;
  auto b = b_delta(rho, delta);
  if (!b) return out;
  // admissibility of the angle condition via the rough lower estimate
  if (!(lambda1_lower > 0.0) ||
      lambda1_lower / lambda_x < (2.0 * delta - 2.0) / (2.0 * delta - 1.0))
    return out;
  const Real brho2 = *b * rho * rho;
  if (brho2 >= 1.0) return out;
  out.available = true;
  out.rel_eig = brho2 / (1.0 - brho2);
  out.sin_bound = std::sqrt(delta * *b) * rho;
  out.vec_err = 2.0 * std::sin(0.5 * std::asin(std::clamp(out.sin_bound, 0.0, 1.0)));
  return out;
}

int apriori_step_count(Real delta, Real eps, Real t_eig, Real u) {
  if (!(eps < 1.0) || !(delta > 1.0) || !(t_eig > 0.0 && t_eig < 1.0) || !(u >= 1.0))
    throw DimensionError("invalid a priori step-count arguments");
  const Real q = 1.0 - (1.0 - eps) / delta;
  const Real qt2 = (1.0 - t_eig) * q * q + t_eig;
  const Real n = std::log(1.0 / (4.0 * u * u * delta - 1.0)) / std::log(qt2);
  return std::max(0, static_cast<int>(std::ceil(n)));
}

StepResult optimal_step(const CoefficientSet& coeffs, const ExpSumPrecond& p, const BlockMps& x,
                        const BlockMps& res, Real lambda_x, Real round_tol) {
  BlockMps sx = apply_precond(p, x, round_tol);
  BlockMps sr = apply_precond(p, res, round_tol);
  const Real nx = block_norm(sx);
  const Real nr = block_norm(sr);
  if (nr == 0.0) throw DimensionError("optimal step with a zero residual");
  BlockMps z1 = block_scale(sx, 1.0 / nx);
  BlockMps z2 = block_scale(sr, 1.0 / nr);
  const Real b11 = lambda_x;
  const Real b12 = h_form(coeffs, z1, z2);
  const Real b22 = h_form(coeffs, z2, z2);
  const Real g = block_inner(z1, z2);

  StepResult out;
  if (std::abs(g) >= 1.0 - 1e-12) {
    // collinear basis: fixed step omega = 1
    out.fallback = true;
    out.omega_star = 1.0;
    out.x_star = block_add(x, block_scale(res, -1.0));
    out.lambda_star = rayleigh(coeffs, p, out.x_star);
    return out;
  }
  // lower eigenvalue of the 2x2 pencil ([b11 b12; b12 b22], [1 g; g 1])
  const Real a2 = 1.0 - g * g;
  const Real a1 = -(b11 + b22 - 2.0 * g * b12);
  const Real a0 = b11 * b22 - b12 * b12;
  const Real disc = std::sqrt(std::max(0.0, a1 * a1 - 4.0 * a2 * a0));
  const Real lam = (-a1 - disc) / (2.0 * a2);
  // eigenvector from the better-conditioned row
  const Real r1a = b11 - lam, r1b = b12 - lam * g;
  const Real r2a = b12 - lam * g, r2b = b22 - lam;
  Real v1, v2;
  if (std::max(std::abs(r1a), std::abs(r1b)) >= std::max(std::abs(r2a), std::abs(r2b))) {
    v1 = -r1b;
    v2 = r1a;
  } else {
    v1 = -r2b;
    v2 = r2a;
  }
  if (v1 == 0.0) {
    out.fallback = true;
    out.omega_star = 1.0;
    out.x_star = block_add(x, block_scale(res, -1.0));
    out.lambda_star = rayleigh(coeffs, p, out.x_star);
    return out;
  }
  out.omega_star = -(v2 * nx) / (v1 * nr);
  out.lambda_star = lam;
  out.x_star = block_add(x, block_scale(res, -out.omega_star));
  return out;
}

TruncateIterateResult truncate_iterate(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                                       const BlockMps& x_star, Real lambda_star, Real lambda_prev,
                                       Real rho_bound, const SolverConfig& cfg) {
  TruncateIterateResult out;
  const Real gain = lambda_prev - lambda_star;
  const Real slack = 1e-12 * std::abs(lambda_prev);
  if (gain <= slack) {
    out.x_next = x_star;
    return out;
  }
  const Real target = lambda_star + cfg.t_eig * gain;
  const Real rhs = std::sqrt(lambda_star / target);
  if (rhs >= 1.0) {
    out.x_next = x_star;
    return out;
  }
  // safeguarded bisection for sqrt(1 - D^2) - rho D = rhs on (0, 1/sqrt(1+rho^2))
  auto g = [&](Real dd) { return std::sqrt(std::max(0.0, 1.0 - dd * dd)) - rho_bound * dd - rhs; };
  Real lo = 0.0, hi = 1.0 / std::sqrt(1.0 + rho_bound * rho_bound);
  if (g(hi) > 0.0) {
    lo = hi;
  } else {
    while (hi - lo > Tolerances::bisection) {
      const Real mid = 0.5 * (lo + hi);
      (g(mid) >= 0.0 ? lo : hi) = mid;
    }
  }
  const Real delta_a = lo;
  if (delta_a <= 0.0) {
    out.x_next = x_star;
    return out;
  }
  const Real xnorm_a = a_norm_block(coeffs, p, x_star);
  Real eta = delta_a * xnorm_a / std::sqrt(1.0 + cfg.c);
  for (int attempt = 0; attempt < 60; ++attempt) {
    BlockMps cand = truncate_block(x_star, eta).mps;
    if (block_norm(cand) > 0.0 &&
        rayleigh(coeffs, p, cand) <= target + slack) {
      out.x_next = std::move(cand);
      out.eta_inner = eta;
      return out;
    }
    eta *= 0.5;
    ++out.retries;
  }
  out.x_next = x_star;
  out.eta_inner = 0.0;
  return out;
}

InnerResult inner_iterate(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                          const BlockMps& x0, Real tau, const SolverConfig& cfg,
                          const IterationObserver& observer, int n_offset, int outer_index) {
  InnerResult out;
  if (block_norm(x0) == 0.0) throw DimensionError("zero starting vector");
  const Real zeta = cfg.zeta_res();
  BlockMps x = x0;
  Real eta_warm = std::numeric_limits<Real>::infinity();
  const auto t0 = std::chrono::steady_clock::now();
  for (int n = 0; n < cfg.max_inner; ++n) {
    BlockMps sx;
    const Real an = a_norm_block(coeffs, p, x, &sx);
    x = block_scale(x, 1.0 / an);
    sx = block_scale(sx, 1.0 / an);
    const Real lambda = h_form(coeffs, sx, sx) / block_inner(sx, sx);

    ResidualResult rr =
        assemble_residual(coeffs, p, x, lambda, zeta, eta_warm, cfg.round_tol);
    eta_warm = rr.eta_res;

    IterationRecord rec;
    rec.n = n_offset + n;
    rec.m = outer_index;
    rec.lambda = lambda;
    rec.ranks = block_ranks(x);
    rec.residual_ranks = block_ranks(rr.res);
    rec.eta_res = rr.eta_res;
    rec.wall_ms = std::chrono::duration<Real, std::milli>(
                      std::chrono::steady_clock::now() - t0).count();

    if (rr.at_roundoff) {
      rec.rho = residual_rho_bound(block_norm(rr.res), rr.eta_res, 1.0, cfg.c);
      rec.bounds = aposteriori_bounds(lambda, rec.rho, cfg.delta, cfg.lambda1_lower);
      if (observer) observer(x, rec);
      out.trace.push_back(rec);
      out.status = SolveStatus::ConvergedAtRoundoff;
      out.lambda = lambda;
      out.x = std::move(x);
      out.rho = rec.rho;
      return out;
    }

    const Real rho = residual_rho_bound(block_norm(rr.res), rr.eta_res, 1.0, cfg.c);
    rec.rho = rho;
    rec.bounds = aposteriori_bounds(lambda, rho, cfg.delta, cfg.lambda1_lower);

    if (rec.bounds.available && rec.bounds.vec_err <= tau) {
      if (observer) observer(x, rec);
      out.trace.push_back(rec);
      out.status = SolveStatus::Converged;
      out.lambda = lambda;
      out.x = std::move(x);
      out.rho = rho;
      return out;
    }

    StepResult step = optimal_step(coeffs, p, x, rr.res, lambda, cfg.round_tol);
    rec.step_fallback = step.fallback;
    const Real rho_for_trunc =
        cfg.assume_res_rho ? std::min(rho, block_norm(rr.res)) : rho;
    TruncateIterateResult tr = truncate_iterate(coeffs, p, step.x_star, step.lambda_star,
                                                lambda, rho_for_trunc, cfg);
    rec.eta_inner = tr.eta_inner;
    if (observer) observer(x, rec);
    out.trace.push_back(rec);
    x = std::move(tr.x_next);
  }
  out.status = SolveStatus::MaxIterations;
  BlockMps sx;
  const Real an = a_norm_block(coeffs, p, x, &sx);
  out.x = block_scale(x, 1.0 / an);
  out.lambda = rayleigh(coeffs, p, out.x);
  out.rho = out.trace.empty() ? 0.0 : out.trace.back().rho;
  return out;
}

}  // namespace sqpinvit
