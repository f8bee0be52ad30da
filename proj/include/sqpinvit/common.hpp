#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace sqpinvit {

using Real = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Numerical knobs shared across the library. All floating computation is
/// 64-bit; these are the few places where a cutoff enters.
struct Tolerances {
  /// Relative singular-value cutoff used when recompressing a representation
  /// without changing the represented tensor beyond round-off.
  static constexpr Real roundoff = 1e-14;
  /// Relative cutoff below which a singular value is treated as exact zero
  /// when reporting minimal ranks.
  static constexpr Real rank_cutoff = 64.0 * std::numeric_limits<Real>::epsilon();
  /// Largest order admitted by to_full / dense expansions.
  static constexpr int full_order_cap = 20;
  /// Scalar-equation solves (bisection) are driven to this width.
  static constexpr Real bisection = 1e-12;
};

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sqpinvit
