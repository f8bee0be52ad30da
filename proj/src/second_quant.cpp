#include "sqpinvit/second_quant.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

namespace sqpinvit {

void CoefficientSet::validate() const {
  if (t.rows() != K || t.cols() != K || d.size() != K)
    throw DimensionError("coefficient dimensions do not match K");
  if (!t.isApprox(t.transpose(), 1e-12)) throw DimensionError("t must be symmetric");
  for (int i = 0; i < K; ++i)
    if (!(d(i) > 0.0)) throw DimensionError("preconditioner diagonal must be strictly positive");
  for (const VTerm& w : v) {
    if (w.i < 1 || w.i > K || w.j < 1 || w.j > K || w.k < 1 || w.k > K || w.l < 1 || w.l > K)
      throw DimensionError("two-particle index out of range");
    if (!std::isfinite(w.value)) throw DimensionError("two-particle entry not finite");
  }
}

CoefficientSet restrict_coefficients(const CoefficientSet& c, int K_low) {
  if (K_low < 1 || K_low > c.K) throw DimensionError("invalid restriction size");
  CoefficientSet out;
  out.K = K_low;
  out.t = c.t.topLeftCorner(K_low, K_low);
  out.gamma = c.gamma;
  out.d = c.d.head(K_low);
  for (const VTerm& w : c.v)
    if (w.i <= K_low && w.j <= K_low && w.k <= K_low && w.l <= K_low) out.v.push_back(w);
  return out;
}

// -- term plans ---------------------------------------------------------------

namespace {

using Mat2 = std::array<Real, 4>;  // row-major 2x2, index 0 = unoccupied

constexpr Mat2 kI{1, 0, 0, 1};
constexpr Mat2 kS{1, 0, 0, -1};
constexpr Mat2 kA{0, 1, 0, 0};
constexpr Mat2 kAt{0, 0, 1, 0};

Mat2 mul(const Mat2& x, const Mat2& y) {
  return {x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3],
          x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]};
}

SiteFactor classify(const Mat2& m) {
  const bool diag = m[1] == 0.0 && m[2] == 0.0;
  const bool anti = m[0] == 0.0 && m[3] == 0.0;
  SiteFactor f;
  if (diag && m[0] == 0.0 && m[3] == 0.0) {
    f.kind = SiteFactor::Zero;
  } else if (diag) {
    f.kind = SiteFactor::Diag;
    f.a = m[0];
    f.b = m[3];
  } else if (anti && m[1] == 0.0) {
    f.kind = SiteFactor::Raise;
    f.a = m[2];
  } else if (anti && m[2] == 0.0) {
    f.kind = SiteFactor::Lower;
    f.a = m[1];
  } else {
    throw std::logic_error("site factor is neither diagonal nor antidiagonal");
  }
  return f;
}

Mat2 to_mat(const SiteFactor& f) {
  switch (f.kind) {
    case SiteFactor::Diag:
      return {f.a, 0, 0, f.b};
    case SiteFactor::Raise:
      return {0, 0, f.a, 0};
    case SiteFactor::Lower:
      return {0, f.a, 0, 0};
    default:
      return {0, 0, 0, 0};
  }
}

TermPlan string_plan(int K, int site, const Mat2& op) {
  TermPlan p;
  p.factors.resize(K);
  for (int k = 1; k <= K; ++k) {
    if (k < site)
      p.factors[k - 1] = classify(kS);
    else if (k == site)
      p.factors[k - 1] = classify(op);
    else
      p.factors[k - 1] = classify(kI);
  }
  return p;
}

}  // namespace

int TermPlan::total_shift() const {
  int s = 0;
  for (const SiteFactor& f : factors) s += f.shift();
  return s;
}

bool TermPlan::is_zero() const {
  if (weight == 0.0) return true;
  for (const SiteFactor& f : factors)
    if (f.kind == SiteFactor::Zero) return true;
  return false;
}

TermPlan plan_identity(int K, Real weight) {
  TermPlan p;
  p.weight = weight;
  p.factors.assign(K, SiteFactor{});
  return p;
}

TermPlan plan_annihilation(int K, int i) {
  if (i < 1 || i > K) throw DimensionError("orbital index out of range");
  return string_plan(K, i, kA);
}

TermPlan plan_creation(int K, int i) {
  if (i < 1 || i > K) throw DimensionError("orbital index out of range");
  return string_plan(K, i, kAt);
}

TermPlan compose(const TermPlan& p1, const TermPlan& p2) {
  if (p1.factors.size() != p2.factors.size()) throw DimensionError("plan length mismatch");
  TermPlan out;
  out.weight = p1.weight * p2.weight;
  out.factors.resize(p1.factors.size());
  for (size_t k = 0; k < out.factors.size(); ++k)
    out.factors[k] = classify(mul(to_mat(p1.factors[k]), to_mat(p2.factors[k])));
  return out;
}

TermPlan plan_one_particle(int K, Real w, int i, int j) {
  TermPlan p = compose(plan_creation(K, i), plan_annihilation(K, j));
  p.weight = w;
  return p;
}

TermPlan plan_two_particle(int K, Real w, int i, int j, int k, int l) {
  TermPlan p = compose(plan_creation(K, i),
                       compose(plan_creation(K, j),
                               compose(plan_annihilation(K, k), plan_annihilation(K, l))));
  p.weight = w;
  return p;
}

// -- application --------------------------------------------------------------

namespace {

BlockMps zero_in_layout(const BlockMps& like, int N2) {
  SectorShape s{like.shape.K, std::clamp(N2, 0, like.shape.K)};
  if (!like.has_joint()) return block_zero(s);
  std::vector<BlockMps> cols(like.joint_dim(), block_zero(s));
  return stack_columns(cols, like.joint_pos + 1);
}

const Matrix* get_block(const BlockedCore& c, int a, int n) {
  auto it = c.blocks[a].find(n);
  return it == c.blocks[a].end() ? nullptr : &it->second;
}

}  // namespace

BlockMps apply_term(const TermPlan& plan, const BlockMps& x) {
  const int K = x.shape.K;
  if (static_cast<int>(plan.factors.size()) != K) throw DimensionError("plan length mismatch");
  const int N2 = x.shape.N + plan.total_shift();
  if (plan.is_zero() || N2 < 0 || N2 > K) return zero_in_layout(x, N2);

  BlockMps out;
  out.shape = SectorShape{K, N2};
  out.joint_pos = x.joint_pos;
  const int C = x.num_cores();
  out.cut.resize(C + 1);

  // cumulative shift before each cut
  std::vector<int> s(C + 1, 0);
  {
    int orb = 0;
    for (int c = 0; c < C; ++c) {
      s[c + 1] = s[c];
      if (c != x.joint_pos) {
        s[c + 1] += plan.factors[orb].shift();
        ++orb;
      }
    }
  }
  for (int c = 0; c <= C; ++c) {
    const int o = out.orbital_count(c);
    for (auto& [n, sz] : x.cut[c]) {
      const int m = n + s[c];
      if (out.shape.admissible(o, m)) out.cut[c][m] = sz;
    }
  }
  if (out.cut[0].count(0) == 0 || out.cut[C].count(N2) == 0) return zero_in_layout(x, N2);
  out.cut[0] = {{0, 1}};
  out.cut[C] = {{N2, 1}};

  auto has_label = [&](int c, int n) { return out.cut[c].count(n) > 0; };
  int orb = 0;
  for (int c = 0; c < C; ++c) {
    const BlockedCore& in = x.cores[c];
    BlockedCore oc;
    if (c == x.joint_pos) {
      oc.shift = in.shift;
      oc.blocks.resize(in.phys_dim());
      for (int a = 0; a < in.phys_dim(); ++a)
        for (auto& [n, b] : in.blocks[a]) {
          const int m = n + s[c];
          if (has_label(c, m) && has_label(c + 1, m)) oc.blocks[a][m] = b;
        }
    } else {
      const SiteFactor& f = plan.factors[orb];
      ++orb;
      oc = BlockedCore{{0, 1}, {{}, {}}};
      auto put = [&](int slice, int m_left, int m_right, Real w, const Matrix& b) {
        if (w == 0.0) return;
        if (has_label(c, m_left) && has_label(c + 1, m_right)) oc.blocks[slice][m_left] = w * b;
      };
      if (f.kind == SiteFactor::Diag) {
        for (auto& [n, b] : in.blocks[0]) put(0, n + s[c], n + s[c], f.a, b);
        for (auto& [n, b] : in.blocks[1]) put(1, n + s[c], n + s[c] + 1, f.b, b);
      } else if (f.kind == SiteFactor::Raise) {
        for (auto& [n, b] : in.blocks[0]) put(1, n + s[c], n + s[c] + 1, f.a, b);
      } else {  // Lower
        for (auto& [n, b] : in.blocks[1]) put(0, n + s[c], n + s[c], f.a, b);
      }
    }
    out.cores.push_back(std::move(oc));
  }
  // fold the scalar weight into the first core
  if (plan.weight != 1.0)
    for (auto& m : out.cores[0].blocks)
      for (auto& [n, b] : m) b *= plan.weight;

  // prune labels that lost every incident block
  for (int c = 0; c <= C; ++c) {
    std::vector<int> dead;
    for (auto& [n, sz] : out.cut[c]) {
      bool used = false;
      if (c > 0) {
        const BlockedCore& pc = out.cores[c - 1];
        for (int a = 0; a < pc.phys_dim() && !used; ++a)
          used = pc.blocks[a].count(n - pc.shift[a]) > 0;
      }
      if (!used && c < C) {
        const BlockedCore& nc = out.cores[c];
        for (int a = 0; a < nc.phys_dim() && !used; ++a) used = nc.blocks[a].count(n) > 0;
      }
      if (!used) dead.push_back(n);
    }
    if (c == 0 || c == C) continue;  // boundaries stay
    for (int n : dead) out.cut[c].erase(n);
  }
  for (int c = 1; c < C; ++c)
    if (out.cut[c].empty()) return zero_in_layout(x, N2);
  return out;
}

Real term_inner(const TermPlan& plan, const BlockMps& x, const BlockMps& y) {
  if (x.shape.K != y.shape.K || x.joint_pos != y.joint_pos || x.num_cores() != y.num_cores())
    throw DimensionError("layout mismatch in term_inner");
  if (plan.is_zero() || x.shape.N + plan.total_shift() != y.shape.N) return 0.0;
  int s = 0;
  int orb = 0;
  std::map<int, Matrix> env;
  env[0] = Matrix::Ones(1, 1);
  for (int c = 0; c < x.num_cores(); ++c) {
    const BlockedCore& cx = x.cores[c];
    const BlockedCore& cy = y.cores[c];
    std::map<int, Matrix> next;
    auto acc = [&](int n_out, Matrix m) {
      auto [it, fresh] = next.try_emplace(n_out, m);
      if (!fresh) it->second += m;
    };
    if (c == x.joint_pos) {
      for (auto& [n, e] : env)
        for (int a = 0; a < cx.phys_dim(); ++a) {
          const Matrix* bx = get_block(cx, a, n);
          const Matrix* by = get_block(cy, a, n + s);
          if (bx && by) acc(n, bx->transpose() * e * (*by));
        }
    } else {
      const SiteFactor& f = plan.factors[orb];
      ++orb;
      for (auto& [n, e] : env) {
        const Matrix* x0 = get_block(cx, 0, n);
        const Matrix* x1 = get_block(cx, 1, n);
        if (f.kind == SiteFactor::Diag) {
          if (const Matrix* y0 = get_block(cy, 0, n + s); x0 && y0 && f.a != 0.0)
            acc(n, f.a * (x0->transpose() * e * (*y0)));
          if (const Matrix* y1 = get_block(cy, 1, n + s); x1 && y1 && f.b != 0.0)
            acc(n + 1, f.b * (x1->transpose() * e * (*y1)));
        } else if (f.kind == SiteFactor::Raise) {
          if (const Matrix* y1 = get_block(cy, 1, n + s); x0 && y1)
            acc(n, f.a * (x0->transpose() * e * (*y1)));
        } else {
          if (const Matrix* y0 = get_block(cy, 0, n + s); x1 && y0)
            acc(n + 1, f.a * (x1->transpose() * e * (*y0)));
        }
      }
      s += f.shift();
    }
    env = std::move(next);
    if (env.empty()) return 0.0;
  }
  auto it = env.find(x.shape.N);
  return it == env.end() ? 0.0 : plan.weight * it->second(0, 0);
}

Matrix term_gram(const TermPlan& plan, const BlockMps& x, const BlockMps& y) {
  if (!x.has_joint() || !y.has_joint() || x.joint_pos != y.joint_pos)
    throw DimensionError("term_gram requires matching joint layouts");
  const int Dx = x.joint_dim(), Dy = y.joint_dim();
  Matrix g = Matrix::Zero(Dx, Dy);
  if (plan.is_zero() || x.shape.N + plan.total_shift() != y.shape.N) return g;
  const int jp = x.joint_pos;

  // shift accumulated before each core
  std::vector<int> s(x.num_cores() + 1, 0);
  {
    int orb = 0;
    for (int c = 0; c < x.num_cores(); ++c) {
      s[c + 1] = s[c];
      if (c != jp) s[c + 1] += plan.factors[orb++].shift();
    }
  }

  std::map<int, Matrix> left;
  left[0] = Matrix::Ones(1, 1);
  int orb = 0;
  for (int c = 0; c < jp; ++c) {
    const SiteFactor& f = plan.factors[orb++];
    const BlockedCore& cx = x.cores[c];
    const BlockedCore& cy = y.cores[c];
    std::map<int, Matrix> next;
    auto acc = [&](int n_out, Matrix m) {
      auto [it, fresh] = next.try_emplace(n_out, m);
      if (!fresh) it->second += m;
    };
    for (auto& [n, e] : left) {
      const Matrix* x0 = get_block(cx, 0, n);
      const Matrix* x1 = get_block(cx, 1, n);
      if (f.kind == SiteFactor::Diag) {
        if (const Matrix* y0 = get_block(cy, 0, n + s[c]); x0 && y0 && f.a != 0.0)
          acc(n, f.a * (x0->transpose() * e * (*y0)));
        if (const Matrix* y1 = get_block(cy, 1, n + s[c]); x1 && y1 && f.b != 0.0)
          acc(n + 1, f.b * (x1->transpose() * e * (*y1)));
      } else if (f.kind == SiteFactor::Raise) {
        if (const Matrix* y1 = get_block(cy, 1, n + s[c]); x0 && y1)
          acc(n, f.a * (x0->transpose() * e * (*y1)));
      } else {
        if (const Matrix* y0 = get_block(cy, 0, n + s[c]); x1 && y0)
          acc(n + 1, f.a * (x1->transpose() * e * (*y0)));
      }
    }
    left = std::move(next);
  }

  std::map<int, Matrix> right;
  right[x.shape.N] = Matrix::Ones(1, 1);
  int orb_r = static_cast<int>(plan.factors.size());
  for (int c = x.num_cores() - 1; c > jp; --c) {
    const SiteFactor& f = plan.factors[--orb_r];
    const BlockedCore& cx = x.cores[c];
    const BlockedCore& cy = y.cores[c];
    std::map<int, Matrix> next;
    auto acc = [&](int n_out, Matrix m) {
      auto [it, fresh] = next.try_emplace(n_out, m);
      if (!fresh) it->second += m;
    };
    auto take = [&](int n) -> const Matrix* {
      auto it = right.find(n);
      return it == right.end() ? nullptr : &it->second;
    };
    for (auto& [n, sz] : x.cut[c]) {
      const Matrix* x0 = get_block(cx, 0, n);
      const Matrix* x1 = get_block(cx, 1, n);
      if (f.kind == SiteFactor::Diag) {
        if (const Matrix* y0 = get_block(cy, 0, n + s[c]); x0 && y0 && f.a != 0.0)
          if (const Matrix* r = take(n)) acc(n, f.a * ((*x0) * (*r) * y0->transpose()));
        if (const Matrix* y1 = get_block(cy, 1, n + s[c]); x1 && y1 && f.b != 0.0)
          if (const Matrix* r = take(n + 1)) acc(n, f.b * ((*x1) * (*r) * y1->transpose()));
      } else if (f.kind == SiteFactor::Raise) {
        if (const Matrix* y1 = get_block(cy, 1, n + s[c]); x0 && y1)
          if (const Matrix* r = take(n)) acc(n, f.a * ((*x0) * (*r) * y1->transpose()));
      } else {
        if (const Matrix* y0 = get_block(cy, 0, n + s[c]); x1 && y0)
          if (const Matrix* r = take(n + 1)) acc(n, f.a * ((*x1) * (*r) * y0->transpose()));
      }
    }
    right = std::move(next);
  }

  for (int i = 0; i < Dx; ++i)
    for (int j = 0; j < Dy; ++j)
      for (auto& [n, l] : left) {
        const Matrix* bi = get_block(x.cores[jp], i, n);
        const Matrix* bj = get_block(y.cores[jp], j, n + s[jp]);
        auto er = right.find(n);
        if (!bi || !bj || er == right.end()) continue;
        g(i, j) += (bi->transpose() * l * (*bj) * er->second.transpose()).trace();
      }
  return plan.weight * g;
}

BlockMps apply_annihilation(int i, const BlockMps& x) {
  return apply_term(plan_annihilation(x.shape.K, i), x);
}

BlockMps apply_creation(int i, const BlockMps& x) {
  return apply_term(plan_creation(x.shape.K, i), x);
}

BlockMps apply_one_particle(Real t_ij, int i, int j, const BlockMps& x) {
  return apply_term(plan_one_particle(x.shape.K, t_ij, i, j), x);
}

BlockMps apply_two_particle(Real v_ijkl, int i, int j, int k, int l, const BlockMps& x) {
  return apply_term(plan_two_particle(x.shape.K, v_ijkl, i, j, k, l), x);
}

BlockMps apply_particle_number(const BlockMps& x) {
  const int K = x.shape.K;
  BlockMps acc = zero_in_layout(x, x.shape.N);
  for (int i = 1; i <= K; ++i) {
    BlockMps t = apply_one_particle(1.0, i, i, x);
    if (block_norm(t) > 0.0) acc = block_add(acc, t);
  }
  return acc;
}

namespace {

bool nonzero(const BlockMps& x) {
  for (const auto& slices : x.cores)
    for (const auto& m : slices.blocks)
      for (const auto& [n, b] : m)
        if (b.cwiseAbs().maxCoeff() > 0.0) return true;
  return false;
}

// Running blockwise sum with periodic recompression at round-off level.
class Accumulator {
 public:
  Accumulator(Real tol, int cadence = 8) : tol_(tol), cadence_(cadence) {}

  void add(BlockMps term) {
    if (!nonzero(term)) return;
    if (!has_) {
      sum_ = std::move(term);
      has_ = true;
    } else {
      sum_ = block_add(sum_, term);
    }
    if (tol_ > 0.0 && ++pending_ >= cadence_) {
      sum_ = block_round(sum_, tol_);
      pending_ = 0;
    }
  }

  bool empty() const { return !has_; }

  BlockMps take(const BlockMps& layout_like, int N2) {
    if (!has_) return zero_in_layout(layout_like, N2);
    return tol_ > 0.0 ? block_round(sum_, tol_) : std::move(sum_);
  }

 private:
  BlockMps sum_;
  bool has_ = false;
  int pending_ = 0;
  Real tol_;
  int cadence_;
};

}  // namespace

BlockMps apply_hamiltonian(const CoefficientSet& c, const BlockMps& x, bool include_shift) {
  const int K = x.shape.K;
  if (K != c.K) throw DimensionError("orbital count mismatch");
  Accumulator acc(0.0);
  for (int i = 1; i <= K; ++i)
    for (int j = 1; j <= K; ++j)
      if (c.t(i - 1, j - 1) != 0.0)
        acc.add(apply_term(plan_one_particle(K, c.t(i - 1, j - 1), i, j), x));
  for (const VTerm& w : c.v)
    if (w.value != 0.0)
      acc.add(apply_term(plan_two_particle(K, w.value, w.i, w.j, w.k, w.l), x));
  if (include_shift && c.gamma != 0.0) acc.add(block_scale(x, c.gamma));
  return acc.take(x, x.shape.N);
}

BlockMps apply_shifted_hamiltonian(const CoefficientSet& c, const BlockMps& x, Real shift_add,
                                   Real round_tol) {
  const int K = x.shape.K;
  if (K != c.K) throw DimensionError("orbital count mismatch");
  Accumulator acc(round_tol);
  for (int i = 1; i <= K; ++i)
    for (int j = 1; j <= K; ++j)
      if (c.t(i - 1, j - 1) != 0.0)
        acc.add(apply_term(plan_one_particle(K, c.t(i - 1, j - 1), i, j), x));

  // two-particle terms grouped by creation pair (i, j); the annihilation
  // pair sums live in the small N-2 sector
  if (!c.v.empty() && x.shape.N >= 2) {
    std::map<std::pair<int, int>, BlockMps> lowered;
    auto lower_pair = [&](int k, int l) -> const BlockMps& {
      auto key = std::make_pair(k, l);
      auto it = lowered.find(key);
      if (it == lowered.end()) {
        TermPlan p = compose(plan_annihilation(K, k), plan_annihilation(K, l));
        it = lowered.emplace(key, apply_term(p, x)).first;
      }
      return it->second;
    };
    size_t a = 0;
    while (a < c.v.size()) {
      const int i = c.v[a].i, j = c.v[a].j;
      size_t b = a;
      while (b < c.v.size() && c.v[b].i == i && c.v[b].j == j) ++b;
      if (i != j) {
        Accumulator inner(round_tol);
        for (size_t q = a; q < b; ++q) {
          const VTerm& w = c.v[q];
          if (w.k == w.l || w.value == 0.0) continue;
          inner.add(block_scale(lower_pair(w.k, w.l), w.value));
        }
        if (!inner.empty()) {
          BlockMps z = inner.take(x, x.shape.N - 2);
          TermPlan raise = compose(plan_creation(K, i), plan_creation(K, j));
          acc.add(apply_term(raise, z));
        }
      }
      a = b;
    }
  }
  const Real s = c.gamma + shift_add;
  if (s != 0.0) acc.add(block_scale(x, s));
  return acc.take(x, x.shape.N);
}

Real h_form(const CoefficientSet& c, const BlockMps& y, const BlockMps& z) {
  const int K = y.shape.K;
  Real out = 0.0;
  for (int i = 1; i <= K; ++i)
    for (int j = 1; j <= K; ++j)
      if (c.t(i - 1, j - 1) != 0.0)
        out += term_inner(plan_one_particle(K, c.t(i - 1, j - 1), i, j), y, z);
  if (!c.v.empty() && y.shape.N >= 2) {
    std::map<std::pair<int, int>, BlockMps> low_y, low_z;
    auto lowered = [&](std::map<std::pair<int, int>, BlockMps>& cache, const BlockMps& src,
                       int p, int q) -> const BlockMps& {
      auto key = std::make_pair(p, q);
      auto it = cache.find(key);
      if (it == cache.end()) {
        TermPlan pl = compose(plan_annihilation(K, p), plan_annihilation(K, q));
        it = cache.emplace(key, apply_term(pl, src)).first;
      }
      return it->second;
    };
    for (const VTerm& w : c.v) {
      if (w.i == w.j || w.k == w.l || w.value == 0.0) continue;
      // <a_i* a_j* a_k a_l y, z> = <a_k a_l y, a_j a_i z>
      out += w.value * block_inner(lowered(low_y, y, w.k, w.l), lowered(low_z, z, w.j, w.i));
    }
  }
  out += c.gamma * block_inner(y, z);
  return out;
}

Matrix h_form_gram(const CoefficientSet& c, const BlockMps& y, const BlockMps& z) {
  const int K = y.shape.K;
  Matrix out = Matrix::Zero(y.joint_dim(), z.joint_dim());
  for (int i = 1; i <= K; ++i)
    for (int j = 1; j <= K; ++j)
      if (c.t(i - 1, j - 1) != 0.0)
        out += term_gram(plan_one_particle(K, c.t(i - 1, j - 1), i, j), y, z);
  if (!c.v.empty() && y.shape.N >= 2) {
    std::map<std::pair<int, int>, BlockMps> low_y, low_z;
    auto lowered = [&](std::map<std::pair<int, int>, BlockMps>& cache, const BlockMps& src,
                       int p, int q) -> const BlockMps& {
      auto key = std::make_pair(p, q);
      auto it = cache.find(key);
      if (it == cache.end()) {
        TermPlan pl = compose(plan_annihilation(K, p), plan_annihilation(K, q));
        it = cache.emplace(key, apply_term(pl, src)).first;
      }
      return it->second;
    };
    for (const VTerm& w : c.v) {
      if (w.i == w.j || w.k == w.l || w.value == 0.0) continue;
      out += w.value * joint_gram(lowered(low_y, y, w.k, w.l), lowered(low_z, z, w.j, w.i));
    }
  }
  out += c.gamma * joint_gram(y, z);
  return out;
}

}  // namespace sqpinvit
