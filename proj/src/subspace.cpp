#include "sqpinvit/subspace.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace sqpinvit {

namespace {


void orient_columns(Matrix& v) {
  for (Index j = 0; j < v.cols(); ++j) {
    Index imax = 0;
    v.col(j).cwiseAbs().maxCoeff(&imax);
    if (v(imax, j) < 0.0) v.col(j) = -v.col(j);
  }
}

}  // namespace

std::pair<BlockMps, Vector> joint_orthonormalize(const CoefficientSet& coeffs,
                                                 const ExpSumPrecond& p, const BlockMps& X) {
  BlockMps sx = apply_precond(p, X);
  Matrix ag = h_form_gram(coeffs, sx, sx);
  Matrix eg = joint_gram(sx, sx);
  Eigen::SelfAdjointEigenSolver<Matrix> mass(0.5 * (eg + eg.transpose()));
  if (mass.eigenvalues().minCoeff() < 1e-12 * mass.eigenvalues().maxCoeff())
    throw DimensionError("columns are numerically dependent");
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(0.5 * (ag + ag.transpose()),
                                                      0.5 * (eg + eg.transpose()));
  Matrix v = es.eigenvectors();  // v^T E v = I, v^T A v = diag(lambda)
  Vector lam = es.eigenvalues();
  for (Index j = 0; j < v.cols(); ++j) v.col(j) /= std::sqrt(lam(j));
  orient_columns(v);
  return {joint_transform(X, v), lam};
}

JointResidualResult joint_residual(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                                   const BlockMps& X, const Vector& lambdas, Real zeta_res,
                                   Real eta_warm, Real round_tol) {
  const int M = p.num_terms();
  const int D = X.joint_dim();
  Matrix neg_lambda = Matrix((-lambdas).asDiagonal());
  std::vector<BlockMps> terms;
  terms.reserve(M * M);
  for (int kp = 0; kp < M; ++kp) {
    BlockMps skx = apply_precond_term(p, kp, X);
    BlockMps w = block_add(apply_shifted_hamiltonian(coeffs, skx, 0.0, round_tol),
                           joint_transform(skx, neg_lambda));
    w = block_round(w, round_tol);
    for (int k = 0; k < M; ++k) terms.push_back(apply_precond_term(p, k, w));
  }
  std::vector<Real> norms(terms.size());
  for (size_t j = 0; j < terms.size(); ++j) norms[j] = block_norm(terms[j]);
  std::vector<size_t> order(terms.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return norms[a] < norms[b]; });

  JointResidualResult out;
  const Real total = std::accumulate(norms.begin(), norms.end(), 0.0);
  Real eta = std::min(eta_warm * 2.0, 0.8 * zeta_res * total);
  const Real floor = 64.0 * std::numeric_limits<Real>::epsilon() * total;

  while (true) {
    if (eta <= floor || total == 0.0) {
      out.at_roundoff = true;
      out.eta_res = eta;
      out.res = joint_transform(X, Matrix::Zero(D, D));
      out.column_norms = Vector::Zero(D);
      return out;
    }
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
    BlockMps res = has ? truncate_block(acc, eta / 3.0).mps : joint_transform(X, Matrix::Zero(D, D));
    Vector col = joint_gram(res, res).diagonal().cwiseMax(0.0).cwiseSqrt();
    if (col.minCoeff() >= (1.0 + 1.0 / zeta_res) * eta) {
      out.res = std::move(res);
      out.eta_res = eta;
      out.column_norms = std::move(col);
      return out;
    }
    eta *= 0.8;
  }
}

RitzResult ritz_update(const CoefficientSet& coeffs, const ExpSumPrecond& p, const BlockMps& X,
                       const BlockMps& R, Real round_tol) {
  const int D = X.joint_dim();
  BlockMps sx = apply_precond(p, X, round_tol);
  BlockMps sr = apply_precond(p, R, round_tol);
  Vector xi_x = joint_gram(sx, sx).diagonal().cwiseMax(0.0).cwiseSqrt();
  Vector xi_r = joint_gram(sr, sr).diagonal().cwiseMax(0.0).cwiseSqrt();

  // residual columns with negligible mass carry no update information
  std::vector<int> keep;
  const Real scale = std::max(xi_r.maxCoeff(), 1e-300);
  for (int i = 0; i < D; ++i)
    if (xi_r(i) > 1e-12 * scale) keep.push_back(i);

  RitzResult out;
  while (true) {
    const int Dr = static_cast<int>(keep.size());
    Matrix sel = Matrix::Zero(D, Dr);
    for (int q = 0; q < Dr; ++q) sel(keep[q], q) = 1.0 / xi_r(keep[q]);
    Matrix wx = Matrix(xi_x.cwiseInverse().asDiagonal());

    BlockMps zx = joint_transform(sx, wx);
    Matrix b(D + Dr, D + Dr), m(D + Dr, D + Dr);
    if (Dr > 0) {
      BlockMps zr = joint_transform(sr, sel);
      b.topLeftCorner(D, D) = h_form_gram(coeffs, zx, zx);
      b.topRightCorner(D, Dr) = h_form_gram(coeffs, zx, zr);
      b.bottomLeftCorner(Dr, D) = b.topRightCorner(D, Dr).transpose();
      b.bottomRightCorner(Dr, Dr) = h_form_gram(coeffs, zr, zr);
      m.topLeftCorner(D, D) = joint_gram(zx, zx);
      m.topRightCorner(D, Dr) = joint_gram(zx, zr);
      m.bottomLeftCorner(Dr, D) = m.topRightCorner(D, Dr).transpose();
      m.bottomRightCorner(Dr, Dr) = joint_gram(zr, zr);
    } else {
      b = h_form_gram(coeffs, zx, zx);
      m = joint_gram(zx, zx);
    }
    b = 0.5 * (b + b.transpose()).eval();
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> mass(m);
    const Real cond = mass.eigenvalues().maxCoeff() /
                      std::max(mass.eigenvalues().minCoeff(), 1e-300);
    if (cond > 1e14 && Dr > 0) {
      // drop the weakest residual column and retry
      int worst = 0;
      for (int q = 1; q < Dr; ++q)
        if (xi_r(keep[q]) < xi_r(keep[worst])) worst = q;
      keep.erase(keep.begin() + worst);
      out.fallback = true;
      ++out.dropped_columns;
      continue;
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(b, m);
    Matrix w = es.eigenvectors().leftCols(D);
    Vector lam = es.eigenvalues().head(D);
    for (int j = 0; j < D; ++j) w.col(j) /= std::sqrt(lam(j));  // A-orthonormal columns
    orient_columns(w);
    Matrix w1 = Matrix(xi_x.cwiseInverse().asDiagonal()) * w.topRows(D);
    out.x_star = joint_transform(X, w1);
    if (Dr > 0) {
      Matrix w2 = sel * w.bottomRows(Dr);
      out.x_star = block_add(out.x_star, joint_transform(R, w2));
    }
    out.lambda_star = lam;
    return out;
  }
}

JointTruncateResult joint_truncate(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                                   const BlockMps& x_star, const Vector& lambda_star,
                                   const Vector& lambda_prev, const Vector& rhos,
                                   const SolverConfig& cfg) {
  const int D = x_star.joint_dim();
  const Real slack = 1e-12 * lambda_prev.cwiseAbs().maxCoeff();
  Real delta_min = std::numeric_limits<Real>::infinity();
  Vector target(D);
  for (int i = 0; i < D; ++i) {
    const Real gain = lambda_prev(i) - lambda_star(i);
    target(i) = lambda_star(i) + cfg.t_eig * std::max(gain, 0.0);
    if (gain <= slack) {
      delta_min = 0.0;
      continue;
    }
    const Real rhs = std::sqrt(lambda_star(i) / target(i));
    if (rhs >= 1.0) {
      delta_min = 0.0;
      continue;
    }
    auto g = [&](Real dd) {
      return std::sqrt(std::max(0.0, 1.0 - dd * dd)) - rhos(i) * dd - rhs;
    };
    Real lo = 0.0, hi = 1.0 / std::sqrt(1.0 + rhos(i) * rhos(i));
    if (g(hi) > 0.0) {
      lo = hi;
    } else {
      while (hi - lo > Tolerances::bisection) {
        const Real mid = 0.5 * (lo + hi);
        (g(mid) >= 0.0 ? lo : hi) = mid;
      }
    }
    delta_min = std::min(delta_min, lo);
  }

  JointTruncateResult out;
  if (!(delta_min > 0.0) || !std::isfinite(delta_min)) {
    out.x_next = block_round(x_star, cfg.round_tol);
    return out;
  }
  // columns are A-orthonormal, so |X*_i|_A = 1
  Real eta = delta_min / std::sqrt(1.0 + cfg.c);
  for (int attempt = 0; attempt < 60; ++attempt) {
    BlockMps cand = truncate_block(x_star, eta).mps;
    BlockMps sc = apply_precond(p, cand, cfg.round_tol);
    Vector num = h_form_gram(coeffs, sc, sc).diagonal();
    Vector den = joint_gram(sc, sc).diagonal();
    bool ok = den.minCoeff() > 0.0;
    for (int i = 0; ok && i < D; ++i)
      if (num(i) / den(i) > target(i) + slack) ok = false;
    if (ok) {
      out.x_next = std::move(cand);
      out.eta_inner = eta;
      return out;
    }
    eta *= 0.5;
  }
  out.x_next = block_round(x_star, cfg.round_tol);
  return out;
}

SubspaceResult subspace_inner(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                              const BlockMps& X0, Real tau1, const SolverConfig& cfg,
                              const SubspaceObserver& observer, int n_offset, int outer_index) {
  SubspaceResult out;
  const int D = X0.joint_dim();
  const Real zeta = cfg.zeta_res();
  BlockMps X = X0;
  Real eta_warm = std::numeric_limits<Real>::infinity();
  const auto t0 = std::chrono::steady_clock::now();
  for (int n = 0; n < cfg.max_inner; ++n) {
    Vector lambdas;
    std::tie(X, lambdas) = joint_orthonormalize(coeffs, p, X);
    JointResidualResult jr = joint_residual(coeffs, p, X, lambdas, zeta, eta_warm, cfg.round_tol);
    eta_warm = jr.eta_res;

    SubspaceRecord rec;
    rec.n = n_offset + n;
    rec.m = outer_index;
    rec.lambdas = lambdas;
    rec.eta_res = jr.eta_res;
    rec.ranks = block_ranks(X);
    rec.residual_ranks = block_ranks(jr.res);
    rec.wall_ms = std::chrono::duration<Real, std::milli>(
                      std::chrono::steady_clock::now() - t0).count();
    rec.rhos = Vector(D);
    for (int i = 0; i < D; ++i)
      rec.rhos(i) = residual_rho_bound(jr.column_norms(i), jr.eta_res, 1.0, cfg.c);
    rec.bounds_col1 = aposteriori_bounds(lambdas(0), rec.rhos(0), cfg.delta, cfg.lambda1_lower);
    rec.rel_eig_heuristic.resize(D, std::numeric_limits<Real>::quiet_NaN());
    for (int i = 0; i < D; ++i) {
      // columns beyond the first have no certified lower estimate; the
      // same-delta formula is reported as a heuristic only
      auto b = b_delta(rec.rhos(i), cfg.delta);
      if (b && *b * rec.rhos(i) * rec.rhos(i) < 1.0) {
        const Real brho2 = *b * rec.rhos(i) * rec.rhos(i);
        rec.rel_eig_heuristic[i] = brho2 / (1.0 - brho2);
      }
    }

    const bool done = jr.at_roundoff ||
                      (rec.bounds_col1.available && rec.bounds_col1.vec_err <= tau1);
    if (done) {
      if (observer) observer(X, rec);
      out.trace.push_back(rec);
      out.status = jr.at_roundoff ? SolveStatus::ConvergedAtRoundoff : SolveStatus::Converged;
      out.lambdas = lambdas;
      out.x = std::move(X);
      out.rhos = rec.rhos;
      return out;
    }
    RitzResult ritz = ritz_update(coeffs, p, X, jr.res, cfg.round_tol);
    rec.ritz_fallback = ritz.fallback;
    JointTruncateResult tr =
        joint_truncate(coeffs, p, ritz.x_star, ritz.lambda_star, lambdas, rec.rhos, cfg);
    rec.eta_inner = tr.eta_inner;
    if (observer) observer(X, rec);
    out.trace.push_back(rec);
    X = std::move(tr.x_next);
  }
  out.status = SolveStatus::MaxIterations;
  std::tie(out.x, out.lambdas) = joint_orthonormalize(coeffs, p, X);
  out.rhos = out.trace.empty() ? Vector::Zero(D) : out.trace.back().rhos;
  return out;
}

SubspaceResult subspace_outer(const CoefficientSet& coeffs, const ExpSumPrecond& p,
                              const BlockMps& Y0, Real tau, const SolverConfig& cfg,
                              Real eta0_override, const SubspaceObserver& observer) {
  const int D = Y0.joint_dim();
  OuterConfig oc = OuterConfig::derive(cfg.c, Y0.shape.K - 1, cfg.alpha, D, eta0_override);
  SubspaceResult out;
  BlockMps Y = Y0;
  Real eta = oc.eta0;
  int n_total = 0;
  for (int m = 0; m < cfg.max_outer; ++m) {
    out.eta_schedule.push_back(eta);
    SubspaceResult inner =
        subspace_inner(coeffs, p, Y, oc.tau_m(eta), cfg, observer, n_total, m);
    out.inner_counts.push_back(static_cast<int>(inner.trace.size()));
    n_total += static_cast<int>(inner.trace.size());
    out.trace.insert(out.trace.end(), inner.trace.begin(), inner.trace.end());
    if (inner.status == SolveStatus::MaxIterations) {
      out.status = inner.status;
      out.lambdas = inner.lambdas;
      out.x = std::move(inner.x);
      out.rhos = inner.rhos;
      return out;
    }
    auto b1 = aposteriori_bounds(inner.lambdas(0), inner.rhos(0), cfg.delta, cfg.lambda1_lower);
    bool all_below = b1.available && b1.rel_eig < tau;
    for (int i = 1; all_below && i < D; ++i) {
      // heuristic secondary criterion for the remaining columns
      auto bi = b_delta(inner.rhos(i), cfg.delta);
      const Real brho2 = bi ? *bi * inner.rhos(i) * inner.rhos(i) : 1.0;
      all_below = bi.has_value() && brho2 < 1.0 && brho2 / (1.0 - brho2) < tau;
    }
    if (all_below || inner.status == SolveStatus::ConvergedAtRoundoff) {
      out.status = inner.status;
      out.lambdas = inner.lambdas;
      out.x = std::move(inner.x);
      out.rhos = inner.rhos;
      return out;
    }
    Y = truncate_block(inner.x, oc.theta * eta / std::sqrt(1.0 + cfg.c)).mps;
    eta *= 0.5;
  }
  out.status = SolveStatus::MaxIterations;
  std::tie(out.x, out.lambdas) = joint_orthonormalize(coeffs, p, Y);
  return out;
}

}  // namespace sqpinvit
