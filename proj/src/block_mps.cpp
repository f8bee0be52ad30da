#include "sqpinvit/block_mps.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace sqpinvit {

namespace {

const Matrix* find_block(const BlockedCore& c, int a, int n) {
  auto it = c.blocks[a].find(n);
  return it == c.blocks[a].end() ? nullptr : &it->second;
}

Index cut_size(const std::map<int, Index>& cut, int n) {
  auto it = cut.find(n);
  return it == cut.end() ? 0 : it->second;
}

BlockedCore make_site_core() {
  BlockedCore c;
  c.shift = {0, 1};
  c.blocks.resize(2);
  return c;
}

/// Zero element in the layout of x (same joint structure).
BlockMps zero_like(const BlockMps& x) {
  if (!x.has_joint()) return block_zero(x.shape);
  std::vector<BlockMps> cols(x.joint_dim(), block_zero(x.shape));
  int p = x.joint_pos + 1;
  return stack_columns(cols, p);
}

struct ThinQr {
  Matrix q;
  Matrix r;
};

ThinQr thin_qr(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  const Index r = std::min(m.rows(), m.cols());
  ThinQr out;
  out.q = qr.householderQ() * Matrix::Identity(m.rows(), r);
  out.r = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  return out;
}

// Stacks the blocks feeding right-label n of cut c+1 (rows grouped by slice
// in ascending slice order). Returns contributing (slice, left label, rows).
struct LeftStack {
  Matrix g;
  std::vector<std::tuple<int, int, Index>> parts;
};

LeftStack left_stack(const BlockMps& t, int c, int n) {
  const BlockedCore& cur = t.cores[c];
  LeftStack st;
  Index rows = 0;
  for (int a = 0; a < cur.phys_dim(); ++a) {
    const int m = n - cur.shift[a];
    if (const Matrix* b = find_block(cur, a, m)) {
      st.parts.emplace_back(a, m, b->rows());
      rows += b->rows();
    }
  }
  st.g.resize(rows, cut_size(t.cut[c + 1], n));
  Index off = 0;
  for (auto& [a, m, r] : st.parts) {
    st.g.middleRows(off, r) = cur.blocks[a].at(m);
    off += r;
  }
  return st;
}

void scatter_left(BlockMps& t, int c, const LeftStack& st, const Matrix& q) {
  Index off = 0;
  for (auto& [a, m, r] : st.parts) {
    t.cores[c].blocks[a][m] = q.middleRows(off, r);
    off += r;
  }
}

// Horizontal concatenation of the blocks leaving left-label n of cut c.
struct RightStack {
  Matrix w;
  std::vector<std::tuple<int, Index>> parts;  // (slice, cols)
};

RightStack right_stack(const BlockMps& t, int c, int n) {
  const BlockedCore& cur = t.cores[c];
  RightStack st;
  Index cols = 0;
  for (int a = 0; a < cur.phys_dim(); ++a) {
    if (const Matrix* b = find_block(cur, a, n)) {
      st.parts.emplace_back(a, b->cols());
      cols += b->cols();
    }
  }
  st.w.resize(cut_size(t.cut[c], n), cols);
  Index off = 0;
  for (auto& [a, w] : st.parts) {
    st.w.middleCols(off, w) = cur.blocks[a].at(n);
    off += w;
  }
  return st;
}

void scatter_right(BlockMps& t, int c, int n, const RightStack& st, const Matrix& qt) {
  Index off = 0;
  for (auto& [a, w] : st.parts) {
    t.cores[c].blocks[a][n] = qt.middleCols(off, w);
    off += w;
  }
}

void drop_right_label(BlockMps& t, int c, int n) {
  // removes label n from cut c+1 and all blocks incident to it in core c+1
  t.cut[c + 1].erase(n);
  if (c + 1 < t.num_cores()) {
    BlockedCore& nxt = t.cores[c + 1];
    for (int a = 0; a < nxt.phys_dim(); ++a) nxt.blocks[a].erase(n);
  }
}

void drop_left_label(BlockMps& t, int c, int n) {
  // removes label n from cut c and all blocks of core c-1 pointing at it
  t.cut[c].erase(n);
  if (c >= 1) {
    BlockedCore& prv = t.cores[c - 1];
    for (int a = 0; a < prv.phys_dim(); ++a) prv.blocks[a].erase(n - prv.shift[a]);
  }
}

// Core c becomes left-orthogonal per label; the factor moves into core c+1.
void left_orth_step_block(BlockMps& t, int c) {
  std::vector<int> labels;
  for (auto& [n, s] : t.cut[c + 1]) labels.push_back(n);
  for (int n : labels) {
    LeftStack st = left_stack(t, c, n);
    if (st.g.rows() == 0) {
      drop_right_label(t, c, n);
      continue;
    }
    ThinQr qr = thin_qr(st.g);
    scatter_left(t, c, st, qr.q);
    t.cut[c + 1][n] = qr.q.cols();
    BlockedCore& nxt = t.cores[c + 1];
    for (int a = 0; a < nxt.phys_dim(); ++a) {
      auto it = nxt.blocks[a].find(n);
      if (it != nxt.blocks[a].end()) it->second = qr.r * it->second;
    }
  }
}

// Core c becomes right-orthogonal per label; the factor moves into core c-1.
void right_orth_step_block(BlockMps& t, int c) {
  std::vector<int> labels;
  for (auto& [n, s] : t.cut[c]) labels.push_back(n);
  for (int n : labels) {
    RightStack st = right_stack(t, c, n);
    if (st.w.cols() == 0) {
      drop_left_label(t, c, n);
      continue;
    }
    ThinQr qr = thin_qr(st.w.transpose());
    scatter_right(t, c, n, st, qr.q.transpose());
    t.cut[c][n] = qr.q.cols();
    Matrix l = qr.r.transpose();
    BlockedCore& prv = t.cores[c - 1];
    for (int a = 0; a < prv.phys_dim(); ++a) {
      auto it = prv.blocks[a].find(n - prv.shift[a]);
      if (it != prv.blocks[a].end()) it->second = it->second * l;
    }
  }
}

bool any_cut_empty(const BlockMps& t) {
  for (const auto& m : t.cut)
    if (m.empty()) return true;
  return false;
}

// Right-to-left sweep after full left-orthogonalization. Records the per
// (cut, label) singular values and leaves cores 1.. right-orthogonal.
std::vector<std::map<int, std::vector<Real>>> svd_sweep(BlockMps& t) {
  const int C = t.num_cores();
  std::vector<std::map<int, std::vector<Real>>> sigma(t.cut.size());
  for (int c = 0; c + 1 < C; ++c) left_orth_step_block(t, c);
  for (int c = C - 1; c >= 1; --c) {
    std::vector<int> labels;
    for (auto& [n, s] : t.cut[c]) labels.push_back(n);
    for (int n : labels) {
      RightStack st = right_stack(t, c, n);
      if (st.w.cols() == 0) {
        drop_left_label(t, c, n);
        continue;
      }
      Eigen::JacobiSVD<Matrix> svd(st.w, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      sigma[c][n] = std::vector<Real>(sv.data(), sv.data() + sv.size());
      const Real cutoff = Tolerances::rank_cutoff * sv(0);
      Index keep = 0;
      while (keep < sv.size() && sv(keep) > cutoff) ++keep;
      keep = std::max<Index>(keep, 1);
      scatter_right(t, c, n, st, Matrix(svd.matrixV().leftCols(keep).transpose()));
      t.cut[c][n] = keep;
      Matrix carry = svd.matrixU().leftCols(keep) * sv.head(keep).asDiagonal();
      BlockedCore& prv = t.cores[c - 1];
      for (int a = 0; a < prv.phys_dim(); ++a) {
        auto it = prv.blocks[a].find(n - prv.shift[a]);
        if (it != prv.blocks[a].end()) it->second = it->second * carry;
      }
    }
  }
  return sigma;
}

// Left-to-right truncating sweep; keep[c][n] bounds the rank kept at
// (cut c, label n). Assumes the svd_sweep state (cores 1.. right-orthogonal).
void truncating_sweep(BlockMps& t, const std::vector<std::map<int, Index>>& keep) {
  const int C = t.num_cores();
  for (int c = 0; c + 1 < C; ++c) {
    std::vector<int> labels;
    for (auto& [n, s] : t.cut[c + 1]) labels.push_back(n);
    for (int n : labels) {
      LeftStack st = left_stack(t, c, n);
      Index want = cut_size(keep[c + 1], n);
      if (st.g.rows() == 0 || want == 0) {
        for (auto& [a, m, r] : st.parts) t.cores[c].blocks[a].erase(m);
        drop_right_label(t, c, n);
        continue;
      }
      Eigen::JacobiSVD<Matrix> svd(st.g, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Index k = std::min<Index>(want, svd.singularValues().size());
      scatter_left(t, c, st, svd.matrixU().leftCols(k));
      t.cut[c + 1][n] = k;
      Matrix carry = svd.singularValues().head(k).asDiagonal() *
                     Matrix(svd.matrixV().leftCols(k).transpose());
      BlockedCore& nxt = t.cores[c + 1];
      for (int a = 0; a < nxt.phys_dim(); ++a) {
        auto it = nxt.blocks[a].find(n);
        if (it != nxt.blocks[a].end()) it->second = carry * it->second;
      }
    }
  }
}

}  // namespace

void block_check(const BlockMps& x) {
  const int C = x.num_cores();
  const int sites = x.has_joint() ? C - 1 : C;
  if (sites != x.shape.K) throw DimensionError("core count does not match orbital count");
  if (static_cast<int>(x.cut.size()) != C + 1) throw DimensionError("cut table size mismatch");
  if (cut_size(x.cut[0], 0) != 1 || x.cut[0].size() != 1)
    throw DimensionError("left boundary cut must be {0: 1}");
  if (cut_size(x.cut[C], x.shape.N) != 1 || x.cut[C].size() != 1)
    throw DimensionError("right boundary cut must be {N: 1}");
  for (int c = 0; c <= C; ++c)
    for (auto& [n, s] : x.cut[c]) {
      if (s <= 0) throw DimensionError("non-positive block size");
      if (!x.shape.admissible(x.orbital_count(c), n))
        throw DimensionError("inadmissible particle-count label");
    }
  for (int c = 0; c < C; ++c) {
    const BlockedCore& core = x.cores[c];
    if (core.phys_dim() == 0 || core.blocks.size() != core.shift.size())
      throw DimensionError("malformed core");
    for (int a = 0; a < core.phys_dim(); ++a)
      for (auto& [n, b] : core.blocks[a]) {
        if (b.rows() != cut_size(x.cut[c], n) ||
            b.cols() != cut_size(x.cut[c + 1], n + core.shift[a]))
          throw DimensionError("block shape does not match cut sizes");
      }
  }
}

BlockMps block_zero(const SectorShape& shape) {
  BlockMps x;
  x.shape = shape;
  x.cut.resize(shape.K + 1);
  int n = 0;
  x.cut[0][0] = 1;
  for (int k = 1; k <= shape.K; ++k) {
    BlockedCore c = make_site_core();
    const bool occ = k <= shape.N;
    c.blocks[occ ? 1 : 0][n] = Matrix::Zero(1, 1);
    if (occ) ++n;
    x.cut[k][n] = 1;
    x.cores.push_back(std::move(c));
  }
  return x;
}

BlockMps from_slater(const SectorShape& shape, const std::vector<int>& occupied) {
  if (static_cast<int>(occupied.size()) != shape.N)
    throw DimensionError("occupied orbital count must equal N");
  std::set<int> occ(occupied.begin(), occupied.end());
  if (static_cast<int>(occ.size()) != shape.N || (shape.N > 0 && (*occ.begin() < 1 || *occ.rbegin() > shape.K)))
    throw DimensionError("occupied orbitals must be distinct and within 1..K");
  BlockMps x;
  x.shape = shape;
  x.cut.resize(shape.K + 1);
  x.cut[0][0] = 1;
  int n = 0;
  for (int k = 1; k <= shape.K; ++k) {
    BlockedCore c = make_site_core();
    const bool o = occ.count(k) > 0;
    c.blocks[o ? 1 : 0][n] = Matrix::Ones(1, 1);
    if (o) ++n;
    x.cut[k][n] = 1;
    x.cores.push_back(std::move(c));
  }
  return x;
}

RankVector block_ranks(const BlockMps& x) {
  RankVector r;
  for (int c = 1; c < x.num_cores(); ++c) {
    Index total = 0;
    for (auto& [n, s] : x.cut[c]) total += s;
    r.push_back(total);
  }
  return r;
}

Index block_max_rank(const BlockMps& x) {
  Index m = 0;
  for (Index r : block_ranks(x)) m = std::max(m, r);
  return m;
}

BlockMps block_add(const BlockMps& x, const BlockMps& y) {
  if (!(x.shape == y.shape) || x.joint_pos != y.joint_pos || x.num_cores() != y.num_cores())
    throw DimensionError("shape mismatch in add");
  const int C = x.num_cores();
  BlockMps out;
  out.shape = x.shape;
  out.joint_pos = x.joint_pos;
  out.cut.resize(C + 1);
  out.cut[0] = x.cut[0];
  out.cut[C] = x.cut[C];
  for (int c = 1; c < C; ++c) {
    for (auto& [n, s] : x.cut[c]) out.cut[c][n] += s;
    for (auto& [n, s] : y.cut[c]) out.cut[c][n] += s;
  }
  for (int c = 0; c < C; ++c) {
    const BlockedCore& cx = x.cores[c];
    const BlockedCore& cy = y.cores[c];
    if (cx.shift != cy.shift) throw DimensionError("core layout mismatch in add");
    BlockedCore co;
    co.shift = cx.shift;
    co.blocks.resize(cx.phys_dim());
    for (int a = 0; a < cx.phys_dim(); ++a) {
      std::set<int> labels;
      for (auto& [n, b] : cx.blocks[a]) labels.insert(n);
      for (auto& [n, b] : cy.blocks[a]) labels.insert(n);
      for (int n : labels) {
        const int m = n + cx.shift[a];
        const Index rx = cut_size(x.cut[c], n), ry = cut_size(y.cut[c], n);
        const Index sx = cut_size(x.cut[c + 1], m), sy = cut_size(y.cut[c + 1], m);
        const Matrix* bx = find_block(cx, a, n);
        const Matrix* by = find_block(cy, a, n);
        if (c == 0 && C > 1) {
          Matrix b = Matrix::Zero(1, sx + sy);
          if (bx) b.leftCols(sx) = *bx;
          if (by) b.rightCols(sy) = *by;
          co.blocks[a][n] = std::move(b);
        } else if (c == C - 1 && C > 1) {
          Matrix b = Matrix::Zero(rx + ry, 1);
          if (bx) b.topRows(rx) = *bx;
          if (by) b.bottomRows(ry) = *by;
          co.blocks[a][n] = std::move(b);
        } else if (C == 1) {
          Matrix b = Matrix::Zero(1, 1);
          if (bx) b += *bx;
          if (by) b += *by;
          co.blocks[a][n] = std::move(b);
        } else {
          Matrix b = Matrix::Zero(rx + ry, sx + sy);
          if (bx) b.topLeftCorner(rx, sx) = *bx;
          if (by) b.bottomRightCorner(ry, sy) = *by;
          co.blocks[a][n] = std::move(b);
        }
      }
    }
    out.cores.push_back(std::move(co));
  }
  return out;
}

BlockMps block_scale(const BlockMps& x, Real s) {
  BlockMps out = x;
  for (auto& m : out.cores[0].blocks)
    for (auto& [n, b] : m) b *= s;
  return out;
}

Real block_inner(const BlockMps& x, const BlockMps& y) {
  if (!(x.shape == y.shape) || x.joint_pos != y.joint_pos || x.num_cores() != y.num_cores())
    throw DimensionError("shape mismatch in inner");
  std::map<int, Matrix> env;
  env[0] = Matrix::Ones(1, 1);
  for (int c = 0; c < x.num_cores(); ++c) {
    const BlockedCore& cx = x.cores[c];
    const BlockedCore& cy = y.cores[c];
    std::map<int, Matrix> next;
    for (auto& [n, e] : env)
      for (int a = 0; a < cx.phys_dim(); ++a) {
        const Matrix* bx = find_block(cx, a, n);
        const Matrix* by = find_block(cy, a, n);
        if (!bx || !by) continue;
        const int m = n + cx.shift[a];
        Matrix contrib = bx->transpose() * e * (*by);
        auto it = next.find(m);
        if (it == next.end())
          next[m] = std::move(contrib);
        else
          it->second += contrib;
      }
    env = std::move(next);
  }
  auto it = env.find(x.shape.N);
  return it == env.end() ? 0.0 : it->second(0, 0);
}

Real block_norm(const BlockMps& x) { return std::sqrt(std::max(0.0, block_inner(x, x))); }

BlockMps orthogonalize_block(const BlockMps& x, int pivot) {
  if (pivot < 1 || pivot > x.num_cores()) throw DimensionError("pivot out of range");
  BlockMps t = x;
  for (int c = 0; c < pivot - 1; ++c) left_orth_step_block(t, c);
  for (int c = t.num_cores() - 1; c >= pivot; --c) right_orth_step_block(t, c);
  if (any_cut_empty(t)) return zero_like(x);
  return t;
}

std::vector<std::map<int, std::vector<Real>>> block_singular_values(const BlockMps& x) {
  BlockMps t = x;
  auto sigma = svd_sweep(t);
  return sigma;
}

namespace {

BlockTruncationResult truncate_impl(const BlockMps& x,
                                    const std::vector<std::map<int, Index>>& keep,
                                    const std::vector<std::map<int, std::vector<Real>>>& sigma,
                                    BlockMps&& svd_state) {
  BlockTruncationResult out;
  Real disc2 = 0.0;
  for (size_t c = 1; c < sigma.size(); ++c)
    for (auto& [n, sv] : sigma[c]) {
      const Index k = cut_size(keep[c], n);
      for (size_t j = k; j < sv.size(); ++j) disc2 += sv[j] * sv[j];
    }
  out.error_bound = std::sqrt(disc2);
  truncating_sweep(svd_state, keep);
  if (any_cut_empty(svd_state))
    out.mps = zero_like(x);
  else
    out.mps = std::move(svd_state);
  out.kept = block_ranks(out.mps);
  return out;
}

}  // namespace

BlockTruncationResult truncate_block(const BlockMps& x, const RankVector& caps) {
  if (static_cast<int>(caps.size()) != x.num_cores() - 1)
    throw DimensionError("rank cap vector length mismatch");
  BlockMps t = x;
  auto sigma = svd_sweep(t);
  // per cut: the largest singular values across labels win the cap
  std::vector<std::map<int, Index>> keep(x.cut.size());
  for (int c = 1; c < x.num_cores(); ++c) {
    std::vector<std::pair<Real, int>> pool;
    for (auto& [n, sv] : sigma[c])
      for (Real s : sv) pool.emplace_back(s, n);
    std::stable_sort(pool.begin(), pool.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const Index cap = std::min<Index>(caps[c - 1], static_cast<Index>(pool.size()));
    for (Index j = 0; j < cap; ++j) keep[c][pool[j].second] += 1;
  }
  return truncate_impl(x, keep, sigma, std::move(t));
}

BlockTruncationResult truncate_block(const BlockMps& x, Real eps) {
  if (eps <= 0.0) {
    BlockTruncationResult out;
    out.mps = x;
    out.kept = block_ranks(x);
    return out;
  }
  BlockMps t = x;
  auto sigma = svd_sweep(t);
  std::vector<std::tuple<Real, int, int>> pool;  // (sigma, cut, label)
  std::vector<std::map<int, Index>> keep(x.cut.size());
  for (size_t c = 1; c < sigma.size(); ++c)
    for (auto& [n, sv] : sigma[c]) {
      keep[c][n] = static_cast<Index>(sv.size());
      for (Real s : sv) pool.emplace_back(s, static_cast<int>(c), n);
    }
  std::sort(pool.begin(), pool.end());
  Real budget = eps * eps;
  for (const auto& [s, c, n] : pool) {
    if (s * s > budget) break;
    budget -= s * s;
    keep[c][n] -= 1;
  }
  return truncate_impl(x, keep, sigma, std::move(t));
}

BlockMps block_round(const BlockMps& x, Real rel_tol) {
  const Real nrm = block_norm(x);
  if (nrm == 0.0) return zero_like(x);
  return truncate_block(x, rel_tol * nrm).mps;
}

TensorTrain to_dense_tt(const BlockMps& x) {
  block_check(x);
  TensorTrain t;
  // ascending-label offsets per cut
  std::vector<std::map<int, Index>> off(x.cut.size());
  std::vector<Index> total(x.cut.size(), 0);
  for (size_t c = 0; c < x.cut.size(); ++c) {
    Index o = 0;
    for (auto& [n, s] : x.cut[c]) {
      off[c][n] = o;
      o += s;
    }
    total[c] = o;
  }
  for (int c = 0; c < x.num_cores(); ++c) {
    const BlockedCore& bc = x.cores[c];
    Core core;
    for (int a = 0; a < bc.phys_dim(); ++a) {
      Matrix s = Matrix::Zero(total[c], total[c + 1]);
      for (auto& [n, b] : bc.blocks[a])
        s.block(off[c].at(n), off[c + 1].at(n + bc.shift[a]), b.rows(), b.cols()) = b;
      core.slices.push_back(std::move(s));
    }
    t.cores.push_back(std::move(core));
  }
  return t;
}

// -- joint support -----------------------------------------------------------

BlockMps stack_columns(const std::vector<BlockMps>& columns, int p) {
  if (columns.empty()) throw DimensionError("no columns to stack");
  const SectorShape shape = columns[0].shape;
  const int K = shape.K;
  if (p < 1 || p > K + 1) throw DimensionError("joint position out of range");
  for (const BlockMps& c : columns)
    if (!(c.shape == shape) || c.has_joint())
      throw DimensionError("columns must be plain vectors of one sector");
  const int D = static_cast<int>(columns.size());
  const int jp = p - 1;  // core index of the joint core

  BlockMps out;
  out.shape = shape;
  out.joint_pos = jp;
  out.cut.resize(K + 2);
  // summed cut sizes; boundary cuts stay size one
  auto stacked_cut = [&](int orbital_cut) {
    std::map<int, Index> m;
    for (const BlockMps& col : columns)
      for (auto& [n, s] : col.cut[orbital_cut]) m[n] += s;
    return m;
  };
  for (int c = 0; c <= K + 1; ++c) {
    const int oc = out.orbital_count(c);
    if (c == 0)
      out.cut[c][0] = 1;
    else if (c == K + 1)
      out.cut[c][shape.N] = 1;
    else
      out.cut[c] = stacked_cut(oc);
  }

  // per-column offsets at each orbital cut
  auto offsets = [&](int orbital_cut) {
    std::vector<std::map<int, Index>> off(D);
    std::map<int, Index> run;
    for (int i = 0; i < D; ++i)
      for (auto& [n, s] : columns[i].cut[orbital_cut]) {
        off[i][n] = run[n];
        run[n] += s;
      }
    return off;
  };

  for (int c = 0; c <= K; ++c) {
    if (c == jp) {
      // joint core: slice i carries the identity on column i's sub-blocks
      BlockedCore jc;
      jc.shift.assign(D, 0);
      jc.blocks.resize(D);
      auto off = offsets(jp);
      const bool first = (jp == 0), last = (jp == K);
      for (int i = 0; i < D; ++i)
        for (auto& [n, s] : columns[i].cut[jp]) {
          const Index rows = first ? 1 : cut_size(out.cut[jp], n);
          const Index cols = last ? 1 : cut_size(out.cut[jp + 1], n);
          Matrix b = Matrix::Zero(rows, cols);
          if (first)
            b.middleCols(off[i].at(n), s).setOnes();  // s == 1 here
          else if (last)
            b.middleRows(off[i].at(n), s).setOnes();
          else
            b.block(off[i].at(n), off[i].at(n), s, s) = Matrix::Identity(s, s);
          jc.blocks[i][n] = std::move(b);
        }
      out.cores.push_back(std::move(jc));
    }
    if (c == K) break;
    // orbital core c (0-based); its position in the output chain
    const int oc = c;
    BlockedCore sc = make_site_core();
    auto offL = offsets(oc);
    auto offR = offsets(oc + 1);
    const int out_index = oc < jp ? oc : oc + 1;
    const bool is_first = out_index == 0;
    const bool is_last = out_index == K;  // chain has K+1 cores, last index K
    for (int a = 0; a < 2; ++a)
      for (int i = 0; i < D; ++i)
        for (auto& [n, b] : columns[i].cores[oc].blocks[a]) {
          const int m = n + a;
          const Index rows = cut_size(out.cut[out_index], n);
          const Index cols = cut_size(out.cut[out_index + 1], m);
          Matrix& dst = sc.blocks[a]
                            .try_emplace(n, Matrix::Zero(is_first ? 1 : rows, is_last ? 1 : cols))
                            .first->second;
          if (is_first)
            dst.middleCols(offR[i].at(m), b.cols()) = b;
          else if (is_last)
            dst.middleRows(offL[i].at(n), b.rows()) = b;
          else
            dst.block(offL[i].at(n), offR[i].at(m), b.rows(), b.cols()) = b;
        }
    out.cores.push_back(std::move(sc));
  }
  block_check(out);
  return out;
}

int best_joint_position(const std::vector<BlockMps>& columns) {
  const int K = columns.at(0).shape.K;
  int best_p = 1;
  Index best_score = -1;
  for (int p = 1; p <= K + 1; ++p) {
    BlockMps s = block_round(stack_columns(columns, p));
    Index score = 0;
    for (Index r : block_ranks(s)) score += r;
    if (best_score < 0 || score < best_score) {
      best_score = score;
      best_p = p;
    }
  }
  return best_p;
}

BlockMps extract_column(const BlockMps& x, int i) {
  if (!x.has_joint()) throw DimensionError("extract_column requires a joint core");
  if (i < 0 || i >= x.joint_dim()) throw DimensionError("column index out of range");
  const int jp = x.joint_pos;
  const BlockedCore& jc = x.cores[jp];
  BlockMps out;
  out.shape = x.shape;
  out.cut.reserve(x.cut.size() - 1);
  const bool absorb_right = jp + 1 < x.num_cores();
  for (int c = 0; c <= x.num_cores(); ++c) {
    if (absorb_right ? c == jp + 1 : c == jp) continue;  // drop the duplicated cut
    out.cut.push_back(x.cut[c]);
  }
  for (int c = 0; c < x.num_cores(); ++c) {
    if (c == jp) continue;
    BlockedCore sc = x.cores[c];
    if (absorb_right && c == jp + 1) {
      for (int a = 0; a < sc.phys_dim(); ++a)
        for (auto& [n, b] : sc.blocks[a]) {
          const Matrix* j = find_block(jc, i, n);
          b = j ? Matrix(*j * b) : Matrix(Matrix::Zero(cut_size(x.cut[jp], n), b.cols()));
        }
    } else if (!absorb_right && c == jp - 1) {
      for (int a = 0; a < sc.phys_dim(); ++a)
        for (auto& [n, b] : sc.blocks[a]) {
          const int m = n + sc.shift[a];
          const Matrix* j = find_block(jc, i, m);
          b = j ? Matrix(b * (*j)) : Matrix(Matrix::Zero(b.rows(), cut_size(x.cut[jp + 1], m)));
        }
    }
    out.cores.push_back(std::move(sc));
  }
  block_check(out);
  return out;
}

BlockMps joint_transform(const BlockMps& x, const Matrix& v) {
  if (!x.has_joint()) throw DimensionError("joint_transform requires a joint core");
  const int D = x.joint_dim();
  if (v.rows() != D) throw DimensionError("transform row count must equal D");
  BlockMps out = x;
  BlockedCore& jc = out.cores[x.joint_pos];
  BlockedCore nc;
  nc.shift.assign(static_cast<int>(v.cols()), 0);
  nc.blocks.resize(v.cols());
  std::set<int> labels;
  for (int i = 0; i < D; ++i)
    for (auto& [n, b] : jc.blocks[i]) labels.insert(n);
  for (int j = 0; j < v.cols(); ++j)
    for (int n : labels) {
      Matrix acc;
      bool has = false;
      for (int i = 0; i < D; ++i) {
        const Matrix* b = find_block(jc, i, n);
        if (!b || v(i, j) == 0.0) continue;
        if (!has) {
          acc = v(i, j) * (*b);
          has = true;
        } else {
          acc += v(i, j) * (*b);
        }
      }
      if (has) nc.blocks[j][n] = std::move(acc);
    }
  jc = std::move(nc);
  return out;
}

Matrix joint_gram(const BlockMps& x, const BlockMps& y) {
  if (!x.has_joint() || !y.has_joint() || x.joint_pos != y.joint_pos ||
      x.num_cores() != y.num_cores())
    throw DimensionError("joint_gram requires matching joint layouts");
  const int jp = x.joint_pos;
  std::map<int, Matrix> left;
  left[0] = Matrix::Ones(1, 1);
  for (int c = 0; c < jp; ++c) {
    const BlockedCore& cx = x.cores[c];
    const BlockedCore& cy = y.cores[c];
    std::map<int, Matrix> next;
    for (auto& [n, e] : left)
      for (int a = 0; a < cx.phys_dim(); ++a) {
        const Matrix* bx = find_block(cx, a, n);
        const Matrix* by = find_block(cy, a, n);
        if (!bx || !by) continue;
        Matrix contrib = bx->transpose() * e * (*by);
        auto [it, fresh] = next.try_emplace(n + cx.shift[a], contrib);
        if (!fresh) it->second += contrib;
      }
    left = std::move(next);
  }
  std::map<int, Matrix> right;
  right[x.shape.N] = Matrix::Ones(1, 1);
  for (int c = x.num_cores() - 1; c > jp; --c) {
    const BlockedCore& cx = x.cores[c];
    const BlockedCore& cy = y.cores[c];
    std::map<int, Matrix> next;
    for (int a = 0; a < cx.phys_dim(); ++a)
      for (auto& [n, bx] : cx.blocks[a]) {
        const Matrix* by = find_block(cy, a, n);
        auto er = right.find(n + cx.shift[a]);
        if (!by || er == right.end()) continue;
        Matrix contrib = bx * er->second * by->transpose();
        auto [it, fresh] = next.try_emplace(n, contrib);
        if (!fresh) it->second += contrib;
      }
    right = std::move(next);
  }
  const int Dx = x.joint_dim(), Dy = y.joint_dim();
  Matrix g = Matrix::Zero(Dx, Dy);
  for (int i = 0; i < Dx; ++i)
    for (int j = 0; j < Dy; ++j)
      for (auto& [n, l] : left) {
        const Matrix* bi = find_block(x.cores[jp], i, n);
        const Matrix* bj = find_block(y.cores[jp], j, n);
        auto er = right.find(n);
        if (!bi || !bj || er == right.end()) continue;
        g(i, j) += (bi->transpose() * l * (*bj) * er->second.transpose()).trace();
      }
  return g;
}

}  // namespace sqpinvit
