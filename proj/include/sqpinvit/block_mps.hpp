#pragma once

#include <map>
#include <optional>
#include <vector>

#include "sqpinvit/common.hpp"
#include "sqpinvit/tensor_train.hpp"

namespace sqpinvit {

/// Particle-number sector of the occupation tensor space: K orbitals,
/// N particles. At the cut after o orbitals the admissible left particle
/// counts form the contiguous range [max(0, N-K+o), min(N, o)].
struct SectorShape {
  int K = 0;
  int N = 0;

  int count_lo(int o) const { return std::max(0, N - K + o); }
  int count_hi(int o) const { return std::min(N, o); }
  bool admissible(int o, int n) const { return n >= count_lo(o) && n <= count_hi(o); }
  bool operator==(const SectorShape& s) const { return K == s.K && N == s.N; }
};

/// One core of a block-sparse MPS. Slice a maps a left particle-count label
/// n to the right label n + shift[a]; only matrices for labels that actually
/// occur are stored. Orbital cores have two slices with shifts {0, 1}
/// (unoccupied / occupied blocks); a joint core carrying an eigenvector index
/// has D shift-0 slices.
struct BlockedCore {
  std::vector<int> shift;
  std::vector<std::map<int, Matrix>> blocks;

  int phys_dim() const { return static_cast<int>(shift.size()); }
};

/// Block-sparse MPS confined to a particle-number sector. The chain is the
/// K orbital cores, optionally with one extra joint core (at index joint_pos)
/// whose physical index enumerates D stacked vectors. cut[c] maps particle
/// count labels to block sizes at cut c (0..num_cores()).
struct BlockMps {
  SectorShape shape;
  std::vector<BlockedCore> cores;
  std::vector<std::map<int, Index>> cut;
  int joint_pos = -1;

  int num_cores() const { return static_cast<int>(cores.size()); }
  bool has_joint() const { return joint_pos >= 0; }
  int joint_dim() const { return has_joint() ? cores[joint_pos].phys_dim() : 1; }
  /// Number of orbital cores preceding cut c.
  int orbital_count(int c) const {
    return (has_joint() && c > joint_pos) ? c - 1 : c;
  }
};

/// Structural checks: chaining of block sizes, admissibility of labels,
/// boundary sizes. Throws DimensionError.
void block_check(const BlockMps& x);

/// Zero element of the sector, represented by 1x1 zero blocks along the
/// canonical occupation path (avoids empty-rank edge cases).
BlockMps block_zero(const SectorShape& shape);

/// Slater determinant with the given 1-based occupied orbitals.
BlockMps from_slater(const SectorShape& shape, const std::vector<int>& occupied);

/// Total rank per interior cut (sum of block sizes over labels).
RankVector block_ranks(const BlockMps& x);
Index block_max_rank(const BlockMps& x);

BlockMps block_add(const BlockMps& x, const BlockMps& y);
BlockMps block_scale(const BlockMps& x, Real s);
/// Euclidean inner product by blockwise core contraction; for joint objects
/// this sums over all columns (Frobenius pairing).
Real block_inner(const BlockMps& x, const BlockMps& y);
Real block_norm(const BlockMps& x);

/// Blockwise orthogonalization around pivot core (1-based). The represented
/// tensor is unchanged; its norm is the Frobenius norm of the pivot blocks.
BlockMps orthogonalize_block(const BlockMps& x, int pivot);

struct BlockTruncationResult {
  BlockMps mps;
  Real error_bound = 0.0;
  RankVector kept;
};

/// Truncation to rank caps per interior cut (caps apply to the summed rank
/// over labels; within a cut the largest singular values across labels win).
BlockTruncationResult truncate_block(const BlockMps& x, const RankVector& caps);

/// Tolerance-mode truncation; singular values are pooled globally across all
/// cuts and labels and discarded smallest-first within the eps budget.
BlockTruncationResult truncate_block(const BlockMps& x, Real eps);

/// Recompression that changes the tensor only at relative round-off level.
BlockMps block_round(const BlockMps& x, Real rel_tol = Tolerances::roundoff);

/// Assembles dense cores with the block-diagonal / superdiagonal layout.
TensorTrain to_dense_tt(const BlockMps& x);

/// Per-cut singular values (cut, label) of the represented tensor.
std::vector<std::map<int, std::vector<Real>>> block_singular_values(const BlockMps& x);

// -- joint (multi-column) support ------------------------------------------

/// Stacks D same-sector vectors into one chain with a joint core inserted
/// before orbital p (1-based, p in 1..K+1). Column i is recovered exactly by
/// extract_column.
BlockMps stack_columns(const std::vector<BlockMps>& columns, int p);

/// Joint position minimizing the total ranks of the rounded stack;
/// ties resolve to the smallest position.
int best_joint_position(const std::vector<BlockMps>& columns);

BlockMps extract_column(const BlockMps& x, int i);

/// Column mixing X -> X V (result column j = sum_i V(i,j) column i).
BlockMps joint_transform(const BlockMps& x, const Matrix& v);

/// Gram matrix G(i,j) = <x_i, y_j> of two joint objects with equal layout.
Matrix joint_gram(const BlockMps& x, const BlockMps& y);

}  // namespace sqpinvit
