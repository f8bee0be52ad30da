#pragma once

#include <vector>

#include "sqpinvit/common.hpp"

namespace sqpinvit {

/// One order-3 component of a tensor train: a family of matrix slices
/// X^{(a)} of common shape left_rank x right_rank, one per value of the
/// physical index. Orbital sites have two slices (unoccupied, occupied).
struct Core {
  std::vector<Matrix> slices;

  Index left_rank() const { return slices.empty() ? 0 : slices[0].rows(); }
  Index right_rank() const { return slices.empty() ? 0 : slices[0].cols(); }
  int phys_dim() const { return static_cast<int>(slices.size()); }
};

/// Dense tensor train over binary physical indices. Boundary ranks are 1 and
/// adjacent ranks chain.
struct TensorTrain {
  std::vector<Core> cores;

  int order() const { return static_cast<int>(cores.size()); }
};

using RankVector = std::vector<Index>;

/// Interior bond ranks (r_1, ..., r_{K-1}) of the current representation.
RankVector tt_ranks(const TensorTrain& x);

/// Checks boundary ranks, chaining and slice shapes; throws DimensionError.
void tt_check(const TensorTrain& x);

/// Blockwise matrix product of two cores; physical indices merge with the
/// first core's index slowest.
Core strong_kronecker(const Core& a, const Core& b);

/// Entry of the represented tensor at the multi-index alpha.
Real tt_evaluate(const TensorTrain& x, const std::vector<int>& alpha);

/// Full expansion; entry layout puts the first site's index most significant.
/// Guarded by Tolerances::full_order_cap.
Vector tt_to_full(const TensorTrain& x);

TensorTrain tt_zero(int order);
TensorTrain tt_unit(const std::vector<int>& alpha);
TensorTrain tt_ones(int order);

TensorTrain tt_add(const TensorTrain& x, const TensorTrain& y);
TensorTrain tt_scale(const TensorTrain& x, Real s);
Real tt_inner(const TensorTrain& x, const TensorTrain& y);
Real tt_norm(const TensorTrain& x);

/// Orthogonalization around a pivot site (1-based): cores left of the pivot
/// become left-orthogonal, cores right of it right-orthogonal. The Euclidean
/// norm is then the Frobenius norm of the pivot core.
TensorTrain tt_orthogonalize(const TensorTrain& x, int pivot);

struct TTSvdResult {
  TensorTrain tt;
  /// sigma[k] holds the singular values of the (k+1)-th matricization,
  /// descending, including values below the rank cutoff.
  std::vector<std::vector<Real>> sigma;
};

/// Minimal-rank representation via matricization-wise SVD, together with all
/// matricization singular values.
TTSvdResult tt_svd(const TensorTrain& x);

/// TT-SVD of an explicitly given tensor of order K (size 2^K).
TTSvdResult tt_from_full(const Vector& full, int order);

struct TruncationResult {
  TensorTrain tt;
  /// Root-sum-square of all discarded singular values; certified bound on the
  /// Euclidean truncation error.
  Real error_bound = 0.0;
  /// Number of singular values kept per interior cut.
  RankVector kept;
};

/// Truncation to prescribed rank caps s_k per interior cut.
TruncationResult tt_truncate(const TensorTrain& x, const RankVector& caps);

/// Tolerance-driven truncation: singular values are pooled across all
/// matricizations and discarded in ascending order while the root-sum-square
/// budget eps is not exceeded. eps <= 0 returns the input unchanged.
TruncationResult tt_truncate(const TensorTrain& x, Real eps);

}  // namespace sqpinvit
