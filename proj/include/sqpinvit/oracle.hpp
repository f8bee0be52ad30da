#pragma once

#include <cstdint>
#include <vector>

#include "sqpinvit/second_quant.hpp"

namespace sqpinvit {

struct ExpSumPrecond;  // precond.hpp

/// Ordered basis of the N-particle sector: occupation index tuples
/// (i_1 < ... < i_N) in lexicographic order, mapped both ways.
struct SectorBasis {
  int K = 0;
  int N = 0;
  std::vector<std::uint32_t> states;  // occupation bitmask, bit (i-1) = orbital i
  std::vector<std::pair<std::uint32_t, Index>> lookup;  // sorted by mask

  Index size() const { return static_cast<Index>(states.size()); }
  Index index_of(std::uint32_t state) const;
};

SectorBasis make_sector_basis(int K, int N, Index cap = 4000);

/// Dense symmetric operator matrices on the sector basis.
struct DenseOperators {
  SectorBasis basis;
  Matrix h_gamma;  // H + gamma I
  Matrix d;        // diagonal one-particle operator of the d_i
  Matrix s;        // preconditioner
  Matrix a;        // S H_gamma S
  Matrix e;        // S^2
  Matrix p;        // particle number operator (N I on the sector)
};

/// Dense sector matrix of H_gamma alone (no preconditioner required).
Matrix dense_h_gamma(const CoefficientSet& coeffs, const SectorBasis& basis);
Matrix dense_diag_operator(const Vector& d, const SectorBasis& basis);

DenseOperators build_dense(const CoefficientSet& coeffs, const SectorShape& shape,
                           const ExpSumPrecond& p, Index cap = 4000);

struct DenseEigs {
  Vector values;   // ascending
  Matrix vectors;  // A-normalized columns, deterministic sign
};

/// Lowest eigenpairs of the pencil (A, E).
DenseEigs dense_eigs(const DenseOperators& ops, int count);

/// rho(x) = |r(x)|_{A^-1} / |x|_A via a dense solve.
Real exact_rho(const DenseOperators& ops, const Vector& x);
/// A-inner-product angle between u and x.
Real exact_angle(const DenseOperators& ops, const Vector& u, const Vector& x);

Real a_norm(const DenseOperators& ops, const Vector& x);

// -- transfers between block MPS and dense sector vectors --------------------

Vector block_to_sector(const SectorBasis& basis, const BlockMps& x);
BlockMps sector_to_block(const SectorBasis& basis, const Vector& coeffs);

/// Embeds a sector vector into the full 2^K occupation tensor,
/// first orbital's index most significant.
Vector sector_to_full(const SectorBasis& basis, const Vector& coeffs);

}  // namespace sqpinvit
