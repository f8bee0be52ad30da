#include "sqpinvit/tensor_train.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace sqpinvit {

namespace {

// Rows of the left unfolding are grouped by slice: slice a occupies rows
// [a*L, (a+1)*L). The right unfolding groups columns the same way.
Matrix left_unfold(const Core& c) {
  const Index L = c.left_rank(), R = c.right_rank();
  Matrix m(L * c.phys_dim(), R);
  for (int a = 0; a < c.phys_dim(); ++a) m.middleRows(a * L, L) = c.slices[a];
  return m;
}

Core left_refold(const Matrix& m, int phys) {
  const Index L = m.rows() / phys;
  Core c;
  c.slices.reserve(phys);
  for (int a = 0; a < phys; ++a) c.slices.push_back(m.middleRows(a * L, L));
  return c;
}

Matrix right_unfold(const Core& c) {
  const Index L = c.left_rank(), R = c.right_rank();
  Matrix m(L, R * c.phys_dim());
  for (int a = 0; a < c.phys_dim(); ++a) m.middleCols(a * R, R) = c.slices[a];
  return m;
}

Core right_refold(const Matrix& m, int phys) {
  const Index R = m.cols() / phys;
  Core c;
  c.slices.reserve(phys);
  for (int a = 0; a < phys; ++a) c.slices.push_back(m.middleCols(a * R, R));
  return c;
}

void apply_left(Core& c, const Matrix& m) {
  for (auto& s : c.slices) s = m * s;
}

void apply_right(Core& c, const Matrix& m) {
  for (auto& s : c.slices) s = s * m;
}

// QR push of core k into core k+1; leaves core k left-orthogonal.
void left_orth_step(TensorTrain& t, int k) {
  Matrix m = left_unfold(t.cores[k]);
  Eigen::HouseholderQR<Matrix> qr(m);
  const Index r = std::min(m.rows(), m.cols());
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), r);
  Matrix rfac = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  t.cores[k] = left_refold(q, t.cores[k].phys_dim());
  apply_left(t.cores[k + 1], rfac);
}

// LQ push of core k into core k-1; leaves core k right-orthogonal.
void right_orth_step(TensorTrain& t, int k) {
  Matrix m = right_unfold(t.cores[k]).transpose();
  Eigen::HouseholderQR<Matrix> qr(m);
  const Index r = std::min(m.rows(), m.cols());
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), r);
  Matrix lfac = Matrix(qr.matrixQR().topRows(r).triangularView<Eigen::Upper>()).transpose();
  t.cores[k] = right_refold(q.transpose(), t.cores[k].phys_dim());
  apply_right(t.cores[k - 1], lfac);
}

std::vector<Real> svd_values(const Eigen::JacobiSVD<Matrix>& svd) {
  return {svd.singularValues().data(),
          svd.singularValues().data() + svd.singularValues().size()};
}

}  // namespace

RankVector tt_ranks(const TensorTrain& x) {
  RankVector r;
  for (int k = 0; k + 1 < x.order(); ++k) r.push_back(x.cores[k].right_rank());
  return r;
}

void tt_check(const TensorTrain& x) {
  if (x.cores.empty()) throw DimensionError("tensor train of order zero");
  if (x.cores.front().left_rank() != 1 || x.cores.back().right_rank() != 1)
    throw DimensionError("boundary ranks must be one");
  for (int k = 0; k < x.order(); ++k) {
    const Core& c = x.cores[k];
    if (c.slices.empty()) throw DimensionError("core without slices");
    for (const Matrix& s : c.slices)
      if (s.rows() != c.left_rank() || s.cols() != c.right_rank())
        throw DimensionError("inconsistent slice shapes within a core");
    if (k + 1 < x.order() && c.right_rank() != x.cores[k + 1].left_rank())
      throw DimensionError("adjacent ranks do not chain");
  }
}

Core strong_kronecker(const Core& a, const Core& b) {
  if (a.right_rank() != b.left_rank())
    throw DimensionError("strong Kronecker product: bond rank mismatch");
  Core out;
  out.slices.reserve(a.slices.size() * b.slices.size());
  for (const Matrix& sa : a.slices)
    for (const Matrix& sb : b.slices) out.slices.push_back(sa * sb);
  return out;
}

Real tt_evaluate(const TensorTrain& x, const std::vector<int>& alpha) {
  if (static_cast<int>(alpha.size()) != x.order())
    throw DimensionError("index length does not match order");
  Matrix m = Matrix::Identity(1, 1);
  for (int k = 0; k < x.order(); ++k) m = m * x.cores[k].slices.at(alpha[k]);
  return m(0, 0);
}

Vector tt_to_full(const TensorTrain& x) {
  tt_check(x);
  long entries = 1;
  for (const Core& c : x.cores) {
    entries *= c.phys_dim();
    if (x.order() > Tolerances::full_order_cap || entries > (1L << Tolerances::full_order_cap))
      throw CapacityError("order exceeds full-expansion cap");
  }
  Matrix table = Matrix::Ones(1, 1);
  for (const Core& c : x.cores) {
    Matrix next(table.rows() * c.phys_dim(), c.right_rank());
    for (Index i = 0; i < table.rows(); ++i)
      for (int a = 0; a < c.phys_dim(); ++a)
        next.row(i * c.phys_dim() + a) = table.row(i) * c.slices[a];
    table = std::move(next);
  }
  return table.col(0);
}

TensorTrain tt_zero(int order) {
  TensorTrain t;
  for (int k = 0; k < order; ++k)
    t.cores.push_back(Core{{Matrix::Zero(1, 1), Matrix::Zero(1, 1)}});
  return t;
}

TensorTrain tt_unit(const std::vector<int>& alpha) {
  TensorTrain t;
  for (int a : alpha) {
    Core c{{Matrix::Zero(1, 1), Matrix::Zero(1, 1)}};
    c.slices[a](0, 0) = 1.0;
    t.cores.push_back(std::move(c));
  }
  return t;
}

TensorTrain tt_ones(int order) {
  TensorTrain t;
  for (int k = 0; k < order; ++k)
    t.cores.push_back(Core{{Matrix::Ones(1, 1), Matrix::Ones(1, 1)}});
  return t;
}

TensorTrain tt_add(const TensorTrain& x, const TensorTrain& y) {
  if (x.order() != y.order()) throw DimensionError("order mismatch in add");
  const int K = x.order();
  if (K == 1) {
    TensorTrain t = x;
    for (int a = 0; a < t.cores[0].phys_dim(); ++a) t.cores[0].slices[a] += y.cores[0].slices[a];
    return t;
  }
  TensorTrain t;
  for (int k = 0; k < K; ++k) {
    const Core& cx = x.cores[k];
    const Core& cy = y.cores[k];
    if (cx.phys_dim() != cy.phys_dim()) throw DimensionError("physical dimension mismatch");
    Core c;
    for (int a = 0; a < cx.phys_dim(); ++a) {
      if (k == 0) {
        Matrix m(1, cx.right_rank() + cy.right_rank());
        m << cx.slices[a], cy.slices[a];
        c.slices.push_back(std::move(m));
      } else if (k == K - 1) {
        Matrix m(cx.left_rank() + cy.left_rank(), 1);
        m << cx.slices[a], cy.slices[a];
        c.slices.push_back(std::move(m));
      } else {
        Matrix m = Matrix::Zero(cx.left_rank() + cy.left_rank(),
                                cx.right_rank() + cy.right_rank());
        m.topLeftCorner(cx.left_rank(), cx.right_rank()) = cx.slices[a];
        m.bottomRightCorner(cy.left_rank(), cy.right_rank()) = cy.slices[a];
        c.slices.push_back(std::move(m));
      }
    }
    t.cores.push_back(std::move(c));
  }
  return t;
}

TensorTrain tt_scale(const TensorTrain& x, Real s) {
  TensorTrain t = x;
  for (auto& m : t.cores[0].slices) m *= s;
  return t;
}

Real tt_inner(const TensorTrain& x, const TensorTrain& y) {
  if (x.order() != y.order()) throw DimensionError("order mismatch in inner");
  Matrix e = Matrix::Ones(1, 1);
  for (int k = 0; k < x.order(); ++k) {
    const Core& cx = x.cores[k];
    const Core& cy = y.cores[k];
    if (cx.phys_dim() != cy.phys_dim()) throw DimensionError("physical dimension mismatch");
    Matrix next = Matrix::Zero(cx.right_rank(), cy.right_rank());
    for (int a = 0; a < cx.phys_dim(); ++a)
      next.noalias() += cx.slices[a].transpose() * e * cy.slices[a];
    e = std::move(next);
  }
  return e(0, 0);
}

Real tt_norm(const TensorTrain& x) { return std::sqrt(std::max(0.0, tt_inner(x, x))); }

TensorTrain tt_orthogonalize(const TensorTrain& x, int pivot) {
  tt_check(x);
  if (pivot < 1 || pivot > x.order()) throw DimensionError("pivot out of range");
  if (tt_norm(x) == 0.0) return tt_zero(x.order());
  TensorTrain t = x;
  for (int k = 0; k < pivot - 1; ++k) left_orth_step(t, k);
  for (int k = x.order() - 1; k >= pivot; --k) right_orth_step(t, k);
  return t;
}

TTSvdResult tt_svd(const TensorTrain& x) {
  tt_check(x);
  const int K = x.order();
  TTSvdResult res;
  res.sigma.assign(K - 1, {});
  if (tt_norm(x) == 0.0) {
    res.tt = tt_zero(K);
    for (auto& s : res.sigma) s = {0.0};
    return res;
  }
  TensorTrain t = x;
  for (int k = 0; k < K - 1; ++k) left_orth_step(t, k);
  for (int k = K - 1; k >= 1; --k) {
    Matrix m = right_unfold(t.cores[k]);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    res.sigma[k - 1] = svd_values(svd);
    const Real cutoff = Tolerances::rank_cutoff * svd.singularValues()(0);
    Index keep = 0;
    while (keep < svd.singularValues().size() && svd.singularValues()(keep) > cutoff) ++keep;
    keep = std::max<Index>(keep, 1);
    Matrix v = svd.matrixV().leftCols(keep);
    t.cores[k] = right_refold(v.transpose(), t.cores[k].phys_dim());
    Matrix carry = svd.matrixU().leftCols(keep) * svd.singularValues().head(keep).asDiagonal();
    apply_right(t.cores[k - 1], carry);
  }
  res.tt = std::move(t);
  return res;
}

TTSvdResult tt_from_full(const Vector& full, int order) {
  if (order < 1 || order > Tolerances::full_order_cap)
    throw CapacityError("order exceeds full-expansion cap");
  if (full.size() != (Index(1) << order)) throw DimensionError("full tensor size mismatch");
  TTSvdResult res;
  res.sigma.assign(order - 1, {});
  if (full.norm() == 0.0) {
    res.tt = tt_zero(order);
    for (auto& s : res.sigma) s = {0.0};
    return res;
  }
  Index rank = 1;
  Matrix rem(1, full.size());
  rem.row(0) = full.transpose();
  TensorTrain t;
  for (int k = 0; k < order - 1; ++k) {
    const Index cols = rem.cols() / 2;
    Matrix m(rank * 2, cols);
    // row (i, a) of the k-th matricization, first index most significant
    for (Index i = 0; i < rank; ++i)
      for (int a = 0; a < 2; ++a)
        for (Index j = 0; j < cols; ++j) m(a * rank + i, j) = rem(i, Index(a) * cols + j);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    res.sigma[k] = svd_values(svd);
    const Real cutoff = Tolerances::rank_cutoff * svd.singularValues()(0);
    Index keep = 0;
    while (keep < svd.singularValues().size() && svd.singularValues()(keep) > cutoff) ++keep;
    keep = std::max<Index>(keep, 1);
    t.cores.push_back(left_refold(svd.matrixU().leftCols(keep), 2));
    rem = svd.singularValues().head(keep).asDiagonal() *
          Matrix(svd.matrixV().leftCols(keep).transpose());
    rank = keep;
  }
  t.cores.push_back(right_refold(rem, 2));
  res.tt = std::move(t);
  return res;
}

namespace {

TruncationResult truncate_with_caps(const TTSvdResult& svd_form, const RankVector& caps) {
  const TensorTrain& src = svd_form.tt;
  const int K = src.order();
  TruncationResult out;
  out.kept.assign(K - 1, 0);
  Real disc2 = 0.0;
  bool vanished = false;
  for (int k = 0; k < K - 1; ++k) {
    const auto& sig = svd_form.sigma[k];
    const Index cap = std::min<Index>(caps[k], static_cast<Index>(sig.size()));
    out.kept[k] = cap;
    for (size_t j = cap; j < sig.size(); ++j) disc2 += sig[j] * sig[j];
    if (cap == 0) vanished = true;
  }
  out.error_bound = std::sqrt(disc2);
  if (vanished) {
    out.tt = tt_zero(K);
    return out;
  }
  // svd_form.tt has cores 2..K right-orthogonal; sweep left to right keeping
  // the requested number of singular values per cut.
  TensorTrain t = src;
  for (int k = 0; k < K - 1; ++k) {
    Matrix m = left_unfold(t.cores[k]);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index keep = std::max<Index>(1, std::min(out.kept[k], svd.singularValues().size()));
    out.kept[k] = std::min(out.kept[k], svd.singularValues().size());
    t.cores[k] = left_refold(svd.matrixU().leftCols(keep), t.cores[k].phys_dim());
    Matrix carry = svd.singularValues().head(keep).asDiagonal() *
                   Matrix(svd.matrixV().leftCols(keep).transpose());
    apply_left(t.cores[k + 1], carry);
  }
  out.tt = std::move(t);
  return out;
}

}  // namespace

TruncationResult tt_truncate(const TensorTrain& x, const RankVector& caps) {
  if (static_cast<int>(caps.size()) != x.order() - 1)
    throw DimensionError("rank cap vector length mismatch");
  return truncate_with_caps(tt_svd(x), caps);
}

TruncationResult tt_truncate(const TensorTrain& x, Real eps) {
  if (eps <= 0.0) {
    TruncationResult out;
    out.tt = x;
    out.kept = tt_ranks(x);
    return out;
  }
  TTSvdResult svd_form = tt_svd(x);
  const int K = x.order();
  // Pool all matricization singular values and discard the globally smallest
  // first, as long as the root-sum-square budget holds.
  std::vector<std::tuple<Real, int, size_t>> pool;
  for (int k = 0; k < K - 1; ++k)
    for (size_t j = 0; j < svd_form.sigma[k].size(); ++j)
      pool.emplace_back(svd_form.sigma[k][j], k, j);
  std::sort(pool.begin(), pool.end());
  RankVector caps(K - 1);
  for (int k = 0; k < K - 1; ++k) caps[k] = static_cast<Index>(svd_form.sigma[k].size());
  Real budget = eps * eps;
  for (const auto& [s, k, j] : pool) {
    (void)j;
    if (s * s > budget) break;
    budget -= s * s;
    caps[k] -= 1;
  }
  return truncate_with_caps(svd_form, caps);
}

}  // namespace sqpinvit
