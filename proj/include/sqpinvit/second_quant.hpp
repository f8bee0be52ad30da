#pragma once

#include <vector>

#include "sqpinvit/block_mps.hpp"

namespace sqpinvit {

/// One nonzero two-particle coefficient v_{ijkl} (1-based orbitals).
struct VTerm {
  int i, j, k, l;
  Real value;
};

/// Defines the operator H_gamma = sum t_ij a_i* a_j + sum v_ijkl a_i* a_j*
/// a_k a_l + gamma I together with the preconditioner diagonal d.
struct CoefficientSet {
  int K = 0;
  Matrix t;                  // symmetric K x K
  std::vector<VTerm> v;      // nonzero entries, lexicographic in (i,j,k,l)
  Real gamma = 0.0;
  Vector d;                  // strictly positive, length K

  void validate() const;
};

/// Restriction to the leading K_low orbitals (sub-blocks of t, v, d).
CoefficientSet restrict_coefficients(const CoefficientSet& c, int K_low);

/// Action of one elementary 2x2 factor on a site. Products of the elementary
/// operators I, S, A, A* stay in this set.
struct SiteFactor {
  enum Kind { Diag, Raise, Lower, Zero } kind = Diag;
  Real a = 1.0;  // Diag: unoccupied weight; Raise/Lower: the single entry
  Real b = 1.0;  // Diag: occupied weight

  int shift() const { return kind == Raise ? 1 : (kind == Lower ? -1 : 0); }
};

/// A weighted product of per-orbital factors; applied to an N-sector vector
/// it yields a vector in sector N + total shift, by pure block relabeling.
struct TermPlan {
  Real weight = 1.0;
  std::vector<SiteFactor> factors;  // one per orbital

  int total_shift() const;
  bool is_zero() const;
};

TermPlan plan_identity(int K, Real weight = 1.0);
TermPlan plan_annihilation(int K, int i);
TermPlan plan_creation(int K, int i);
/// Composition p2 applied first, then p1 (sitewise 2x2 matrix products).
TermPlan compose(const TermPlan& p1, const TermPlan& p2);
TermPlan plan_one_particle(int K, Real w, int i, int j);
TermPlan plan_two_particle(int K, Real w, int i, int j, int k, int l);

/// Matrix-free application of a product operator; blocks are relabeled,
/// rescaled and clipped to the target sector. Never grows ranks.
BlockMps apply_term(const TermPlan& plan, const BlockMps& x);

/// <Op x, y> by transfer contraction, without materializing Op x.
Real term_inner(const TermPlan& plan, const BlockMps& x, const BlockMps& y);

/// Gram matrix G(i,j) = <Op x_i, y_j> for joint objects with equal layout.
Matrix term_gram(const TermPlan& plan, const BlockMps& x, const BlockMps& y);

BlockMps apply_annihilation(int i, const BlockMps& x);
BlockMps apply_creation(int i, const BlockMps& x);
BlockMps apply_one_particle(Real t_ij, int i, int j, const BlockMps& x);
BlockMps apply_two_particle(Real v_ijkl, int i, int j, int k, int l, const BlockMps& x);
BlockMps apply_particle_number(const BlockMps& x);

/// Term-by-term application of H (+ gamma when include_shift) in the fixed
/// lexicographic term order, by blockwise concatenation without any
/// truncation. Output ranks are bounded by (#terms + 1) x input ranks.
BlockMps apply_hamiltonian(const CoefficientSet& c, const BlockMps& x, bool include_shift);

/// (H + (gamma + shift_add) I) x with the two-particle terms grouped by
/// their creation-pair prefix and intermediate recompression at relative
/// round-off level; identical to the naive sum in exact arithmetic.
BlockMps apply_shifted_hamiltonian(const CoefficientSet& c, const BlockMps& x, Real shift_add,
                                   Real round_tol = Tolerances::roundoff);

/// <H_gamma y, z> including the gamma term, evaluated term by term with no
/// rank growth.
Real h_form(const CoefficientSet& c, const BlockMps& y, const BlockMps& z);

/// Gram version for joint objects: G(i,j) = <H_gamma y_i, z_j>.
Matrix h_form_gram(const CoefficientSet& c, const BlockMps& y, const BlockMps& z);

}  // namespace sqpinvit
