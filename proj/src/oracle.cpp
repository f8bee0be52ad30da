#include "sqpinvit/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>

#include "sqpinvit/precond.hpp"

namespace sqpinvit {

namespace {

int parity_below(std::uint32_t state, int orbital) {
  // number of occupied orbitals strictly below `orbital` (1-based)
  const std::uint32_t mask = (1u << (orbital - 1)) - 1u;
  return std::popcount(state & mask) & 1;
}

/// In-place action of a_i (dagger = false) or a_i* on a basis state with the
/// Jordan-Wigner sign; returns false when the state is annihilated.
bool ladder(std::uint32_t& state, int i, bool dagger, Real& sign) {
  const std::uint32_t bit = 1u << (i - 1);
  if (dagger ? (state & bit) : !(state & bit)) return false;
  if (parity_below(state, i)) sign = -sign;
  state ^= bit;
  return true;
}

}  // namespace

Index SectorBasis::index_of(std::uint32_t state) const {
  auto it = std::lower_bound(lookup.begin(), lookup.end(), state,
                             [](const auto& p, std::uint32_t s) { return p.first < s; });
  if (it == lookup.end() || it->first != state) throw DimensionError("state not in sector");
  return it->second;
}

SectorBasis make_sector_basis(int K, int N, Index cap) {
  if (N < 0 || N > K || K > 31) throw DimensionError("invalid sector");
  SectorBasis b;
  b.K = K;
  b.N = N;
  std::vector<int> tuple(N);
  for (int i = 0; i < N; ++i) tuple[i] = i + 1;
  auto push = [&](const std::vector<int>& t) {
    std::uint32_t m = 0;
    for (int i : t) m |= 1u << (i - 1);
    b.states.push_back(m);
  };
  if (N == 0) {
    b.states.push_back(0);
  } else {
    while (true) {
      push(tuple);
      if (static_cast<Index>(b.states.size()) > cap)
        throw CapacityError("sector dimension exceeds the dense-oracle cap");
      int p = N - 1;
      while (p >= 0 && tuple[p] == K - (N - 1 - p)) --p;
      if (p < 0) break;
      ++tuple[p];
      for (int q = p + 1; q < N; ++q) tuple[q] = tuple[q - 1] + 1;
    }
  }
  if (static_cast<Index>(b.states.size()) > cap)
    throw CapacityError("sector dimension exceeds the dense-oracle cap");
  b.lookup.reserve(b.states.size());
  for (Index i = 0; i < b.size(); ++i) b.lookup.emplace_back(b.states[i], i);
  std::sort(b.lookup.begin(), b.lookup.end());
  return b;
}

Matrix dense_h_gamma(const CoefficientSet& coeffs, const SectorBasis& basis) {
  const Index n = basis.size();
  Matrix h = Matrix::Zero(n, n);
  for (Index col = 0; col < n; ++col) {
    const std::uint32_t beta = basis.states[col];
    for (int i = 1; i <= coeffs.K; ++i)
      for (int j = 1; j <= coeffs.K; ++j) {
        const Real t = coeffs.t(i - 1, j - 1);
        if (t == 0.0) continue;
        std::uint32_t s = beta;
        Real sign = 1.0;
        if (!ladder(s, j, false, sign)) continue;
        if (!ladder(s, i, true, sign)) continue;
        h(basis.index_of(s), col) += t * sign;
      }
    for (const VTerm& w : coeffs.v) {
      if (w.value == 0.0) continue;
      std::uint32_t s = beta;
      Real sign = 1.0;
      if (!ladder(s, w.l, false, sign)) continue;
      if (!ladder(s, w.k, false, sign)) continue;
      if (!ladder(s, w.j, true, sign)) continue;
      if (!ladder(s, w.i, true, sign)) continue;
      h(basis.index_of(s), col) += w.value * sign;
    }
    h(col, col) += coeffs.gamma;
  }
  return h;
}

Matrix dense_diag_operator(const Vector& d, const SectorBasis& basis) {
  Vector diag = Vector::Zero(basis.size());
  for (Index q = 0; q < basis.size(); ++q) {
    Real s = 0.0;
    for (int i = 1; i <= basis.K; ++i)
      if (basis.states[q] & (1u << (i - 1))) s += d(i - 1);
    diag(q) = s;
  }
  return diag.asDiagonal();
}

DenseOperators build_dense(const CoefficientSet& coeffs, const SectorShape& shape,
                           const ExpSumPrecond& p, Index cap) {
  DenseOperators ops;
  ops.basis = make_sector_basis(shape.K, shape.N, cap);
  ops.h_gamma = dense_h_gamma(coeffs, ops.basis);
  ops.d = dense_diag_operator(coeffs.d, ops.basis);
  const Index n = ops.basis.size();
  Vector sdiag = Vector::Zero(n);
  for (Index q = 0; q < n; ++q) {
    const Real sum_d = ops.d(q, q);
    Real s = 0.0;
    for (int m = 0; m < p.num_terms(); ++m) s += p.alpha[m] * std::exp(-p.beta[m] * sum_d);
    sdiag(q) = s;
  }
  ops.s = sdiag.asDiagonal();
  ops.a = ops.s * ops.h_gamma * ops.s;
  ops.e = Matrix(sdiag.array().square().matrix().asDiagonal());
  ops.p = Matrix::Zero(n, n);
  for (Index q = 0; q < n; ++q) ops.p(q, q) = std::popcount(ops.basis.states[q]);
  return ops;
}

DenseEigs dense_eigs(const DenseOperators& ops, int count) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(
      0.5 * (ops.a + ops.a.transpose()), 0.5 * (ops.e + ops.e.transpose()));
  DenseEigs out;
  const int n = static_cast<int>(ops.basis.size());
  count = std::min(count, n);
  out.values = es.eigenvalues().head(count);
  out.vectors.resize(n, count);
  for (int q = 0; q < count; ++q) {
    Vector u = es.eigenvectors().col(q);
    const Real an = std::sqrt(u.dot(ops.a * u));
    u /= an;
    // deterministic orientation: first nonzero coefficient positive
    const Real tol = 1e-10 * u.cwiseAbs().maxCoeff();
    for (Index r = 0; r < u.size(); ++r) {
      if (std::abs(u(r)) > tol) {
        if (u(r) < 0.0) u = -u;
        break;
      }
    }
    out.vectors.col(q) = u;
  }
  return out;
}

Real a_norm(const DenseOperators& ops, const Vector& x) {
  return std::sqrt(std::max(0.0, x.dot(ops.a * x)));
}

Real exact_rho(const DenseOperators& ops, const Vector& x) {
  if (x.norm() == 0.0) throw DimensionError("rho of the zero vector");
  const Real lambda = x.dot(ops.a * x) / x.dot(ops.e * x);
  Vector r = ops.a * x - lambda * (ops.e * x);
  Vector y = ops.a.ldlt().solve(r);
  return std::sqrt(std::max(0.0, r.dot(y))) / a_norm(ops, x);
}

Real exact_angle(const DenseOperators& ops, const Vector& u, const Vector& x) {
  const Real c = u.dot(ops.a * x) / (a_norm(ops, u) * a_norm(ops, x));
  return std::acos(std::clamp(std::abs(c), 0.0, 1.0));
}

Vector block_to_sector(const SectorBasis& basis, const BlockMps& x) {
  if (x.shape.K != basis.K || x.shape.N != basis.N)
    throw DimensionError("sector mismatch in block_to_sector");
  Vector full = tt_to_full(to_dense_tt(x));
  Vector out(basis.size());
  for (Index q = 0; q < basis.size(); ++q) {
    Index idx = 0;
    for (int i = 1; i <= basis.K; ++i)
      if (basis.states[q] & (1u << (i - 1))) idx += Index(1) << (basis.K - i);
    out(q) = full(idx);
  }
  return out;
}

BlockMps sector_to_block(const SectorBasis& basis, const Vector& coeffs) {
  if (coeffs.size() != basis.size()) throw DimensionError("coefficient length mismatch");
  SectorShape shape{basis.K, basis.N};
  BlockMps acc = block_zero(shape);
  int pending = 0;
  for (Index q = 0; q < basis.size(); ++q) {
    if (coeffs(q) == 0.0) continue;
    std::vector<int> occ;
    for (int i = 1; i <= basis.K; ++i)
      if (basis.states[q] & (1u << (i - 1))) occ.push_back(i);
    acc = block_add(acc, block_scale(from_slater(shape, occ), coeffs(q)));
    if (++pending % 16 == 0) acc = block_round(acc);
  }
  return block_round(acc);
}

Vector sector_to_full(const SectorBasis& basis, const Vector& coeffs) {
  Vector full = Vector::Zero(Index(1) << basis.K);
  for (Index q = 0; q < basis.size(); ++q) {
    Index idx = 0;
    for (int i = 1; i <= basis.K; ++i)
      if (basis.states[q] & (1u << (i - 1))) idx += Index(1) << (basis.K - i);
    full(idx) = coeffs(q);
  }
  return full;
}

}  // namespace sqpinvit
