#pragma once

#include <random>
#include <vector>

#include "sqpinvit/block_mps.hpp"
#include "sqpinvit/second_quant.hpp"
#include "sqpinvit/tensor_train.hpp"

namespace testsup {

using namespace sqpinvit;

using Rng = std::mt19937_64;

inline Real uniform(Rng& rng, Real lo = -1.0, Real hi = 1.0) {
  return std::uniform_real_distribution<Real>(lo, hi)(rng);
}

inline Matrix random_matrix(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = uniform(rng);
  return m;
}

inline TensorTrain random_tt(Rng& rng, int order, Index max_rank) {
  TensorTrain t;
  std::vector<Index> ranks(order + 1, 1);
  for (int k = 1; k < order; ++k)
    ranks[k] = std::uniform_int_distribution<Index>(1, max_rank)(rng);
  for (int k = 0; k < order; ++k) {
    Core c;
    c.slices.push_back(random_matrix(rng, ranks[k], ranks[k + 1]));
    c.slices.push_back(random_matrix(rng, ranks[k], ranks[k + 1]));
    t.cores.push_back(std::move(c));
  }
  return t;
}

/// Entry of the represented tensor by direct evaluation of the MPS sum over
/// all bond indices (independent of the library contraction order).
inline Real direct_entry(const TensorTrain& t, const std::vector<int>& alpha) {
  const int K = t.order();
  std::vector<Index> ranks(K + 1, 1);
  for (int k = 0; k < K; ++k) ranks[k + 1] = t.cores[k].right_rank();
  std::vector<Real> acc(1, 1.0);
  for (int k = 0; k < K; ++k) {
    const Matrix& s = t.cores[k].slices[alpha[k]];
    std::vector<Real> next(s.cols(), 0.0);
    for (Index j = 0; j < s.cols(); ++j)
      for (Index i = 0; i < s.rows(); ++i) next[j] += acc[i] * s(i, j);
    acc = std::move(next);
  }
  return acc[0];
}

inline Vector direct_full(const TensorTrain& t) {
  const int K = t.order();
  Vector full(Index(1) << K);
  std::vector<int> alpha(K);
  for (Index idx = 0; idx < full.size(); ++idx) {
    for (int k = 0; k < K; ++k) alpha[k] = (idx >> (K - 1 - k)) & 1;
    full(idx) = direct_entry(t, alpha);
  }
  return full;
}

/// k-th matricization (k = 1..K-1) of a full tensor, first index most
/// significant.
inline Matrix matricization(const Vector& full, int order, int k) {
  const Index rows = Index(1) << k;
  const Index cols = Index(1) << (order - k);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = full(i * cols + j);
  return m;
}

/// Random block-sparse vector of the sector with block sizes up to max_rho.
inline BlockMps random_block(Rng& rng, const SectorShape& shape, Index max_rho) {
  BlockMps x;
  x.shape = shape;
  x.cut.resize(shape.K + 1);
  x.cut[0][0] = 1;
  for (int c = 1; c < shape.K; ++c)
    for (int n = shape.count_lo(c); n <= shape.count_hi(c); ++n)
      x.cut[c][n] = std::uniform_int_distribution<Index>(1, max_rho)(rng);
  x.cut[shape.K][shape.N] = 1;
  for (int k = 1; k <= shape.K; ++k) {
    BlockedCore core;
    core.shift = {0, 1};
    core.blocks.resize(2);
    for (auto& [n, rows] : x.cut[k - 1]) {
      if (x.cut[k].count(n))
        core.blocks[0][n] = random_matrix(rng, rows, x.cut[k].at(n));
      if (x.cut[k].count(n + 1))
        core.blocks[1][n] = random_matrix(rng, rows, x.cut[k].at(n + 1));
    }
    x.cores.push_back(std::move(core));
  }
  block_check(x);
  return x;
}

/// Well-conditioned solver test problem: diagonal-dominant one-particle part,
/// density-density couplings plus genuinely off-diagonal pair hops.
inline CoefficientSet solver_test_problem(int K) {
  CoefficientSet c;
  c.K = K;
  Vector om(K);
  for (int i = 0; i < K; ++i) om(i) = 0.4 + 0.3 * i * i;
  c.t = om.asDiagonal();
  for (int i = 0; i + 1 < K; ++i) {
    c.t(i, i + 1) = 0.05 / (1 + i);
    c.t(i + 1, i) = c.t(i, i + 1);
  }
  c.gamma = 1.0;
  for (int i = 1; i <= K; ++i)
    for (int j = 1; j <= K; ++j)
      if (i != j) c.v.push_back({i, j, j, i, 0.04 / (1.0 + std::abs(i - j))});
  for (int i = 1; i + 2 <= K; ++i) {
    const Real w = 0.06 / i;
    c.v.push_back({i, i + 1, i + 1, i + 2, w});
    c.v.push_back({i + 2, i + 1, i + 1, i, w});
  }
  std::sort(c.v.begin(), c.v.end(), [](const VTerm& a, const VTerm& b) {
    return std::tie(a.i, a.j, a.k, a.l) < std::tie(b.i, b.j, b.k, b.l);
  });
  c.d = Vector(K);
  for (int i = 0; i < K; ++i) c.d(i) = c.gamma / 2.0 + om(i) + 0.05;
  return c;
}

/// Random symmetric t and sparse v coefficient set with positive diagonal d.
inline CoefficientSet random_coeffs(Rng& rng, int K, int v_terms) {
  CoefficientSet c;
  c.K = K;
  Matrix m = random_matrix(rng, K, K);
  c.t = 0.5 * (m + m.transpose());
  c.gamma = uniform(rng, 1.0, 3.0);
  c.d = Vector(K);
  for (int i = 0; i < K; ++i) c.d(i) = uniform(rng, 0.5, 3.0);
  std::uniform_int_distribution<int> pick(1, K);
  for (int q = 0; q < v_terms; ++q)
    c.v.push_back({pick(rng), pick(rng), pick(rng), pick(rng), uniform(rng, -0.5, 0.5)});
  std::sort(c.v.begin(), c.v.end(), [](const VTerm& a, const VTerm& b) {
    return std::tie(a.i, a.j, a.k, a.l) < std::tie(b.i, b.j, b.k, b.l);
  });
  return c;
}

}  // namespace testsup
