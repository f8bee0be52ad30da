#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "dense_ref.hpp"
#include "sqpinvit/oracle.hpp"
#include "sqpinvit/precond.hpp"

using namespace sqpinvit;
using namespace testsup;

namespace {

// restriction of a full 2^K operator to the sector basis, via the
// independent Kronecker reference
Matrix restrict_to_sector(const Matrix& full, const SectorBasis& basis) {
  Matrix out(basis.size(), basis.size());
  auto full_index = [&](std::uint32_t state) {
    Index idx = 0;
    for (int i = 1; i <= basis.K; ++i)
      if (state & (1u << (i - 1))) idx += Index(1) << (basis.K - i);
    return idx;
  };
  for (Index r = 0; r < basis.size(); ++r)
    for (Index c = 0; c < basis.size(); ++c)
      out(r, c) = full(full_index(basis.states[r]), full_index(basis.states[c]));
  return out;
}

CoefficientSet pd_coeffs(Rng& rng, int K, int N, int v_terms) {
  CoefficientSet c = random_coeffs(rng, K, v_terms);
  auto vs = c.v;
  for (const VTerm& w : vs) c.v.push_back({w.l, w.k, w.j, w.i, w.value});
  std::sort(c.v.begin(), c.v.end(), [](const VTerm& a, const VTerm& b) {
    return std::tie(a.i, a.j, a.k, a.l) < std::tie(b.i, b.j, b.k, b.l);
  });
  SectorBasis basis = make_sector_basis(K, N);
  c.gamma = 0.0;
  Matrix h = dense_h_gamma(c, basis);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
  c.gamma = -es.eigenvalues().minCoeff() +
            0.3 * (es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff());
  return c;
}

}  // namespace

TEST_CASE("sector basis: size, ordering, first state") {
  SectorBasis b = make_sector_basis(5, 2);
  CHECK(b.size() == 10);
  CHECK(b.states[0] == 0b00011u);  // orbitals {1, 2}
  CHECK(b.states[1] == 0b00101u);  // orbitals {1, 3}
  CHECK(b.index_of(0b00011u) == 0);
  CHECK(b.index_of(b.states[7]) == 7);
  CHECK_THROWS_AS(make_sector_basis(20, 10, 100), CapacityError);
}

TEST_CASE("dense H on the sector matches the Kronecker reference, K=5 N=2") {
  Rng rng(3);
  CoefficientSet c = random_coeffs(rng, 5, 15);
  SectorBasis basis = make_sector_basis(5, 2);
  Matrix want = restrict_to_sector(denseref::full_hamiltonian(c, true), basis);
  Matrix got = dense_h_gamma(c, basis);
  CHECK((got - want).norm() <= 1e-12 * want.norm());
}

TEST_CASE("diagonal-t dense operator is diagonal with the occupied sums") {
  CoefficientSet c;
  c.K = 5;
  Vector om = Vector::LinSpaced(5, 1.0, 3.0);
  c.t = om.asDiagonal();
  c.gamma = 0.7;
  c.d = Vector::Ones(5);
  SectorBasis basis = make_sector_basis(5, 2);
  Matrix h = dense_h_gamma(c, basis);
  CHECK((h - Matrix(h.diagonal().asDiagonal())).norm() <= 1e-14);
  for (Index q = 0; q < basis.size(); ++q) {
    Real want = 0.7;
    for (int i = 1; i <= 5; ++i)
      if (basis.states[q] & (1u << (i - 1))) want += om(i - 1);
    CHECK(h(q, q) == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("dense operator bundle: symmetry and particle number") {
  Rng rng(17);
  CoefficientSet c = pd_coeffs(rng, 5, 2, 8);
  SectorShape shape{5, 2};
  ExpSumPrecond p = build_precond(c, 0.1, 0.5, 2.0, shape);
  DenseOperators ops = build_dense(c, shape, p);
  CHECK((ops.h_gamma - ops.h_gamma.transpose()).norm() <= 1e-12 * ops.h_gamma.norm());
  CHECK((ops.a - ops.a.transpose()).norm() <= 1e-12 * ops.a.norm());
  CHECK((ops.p - 2.0 * Matrix::Identity(10, 10)).norm() == 0.0);
  // H commutes with the particle number operator on the sector trivially;
  // the commutator with the diagonal D is generally nonzero but symmetric
  CHECK((ops.h_gamma * ops.p - ops.p * ops.h_gamma).norm() <= 1e-12);
}

TEST_CASE("matrix-free application agrees with the dense sector operator") {
  Rng rng(23);
  CoefficientSet c = random_coeffs(rng, 6, 20);
  SectorShape shape{6, 2};
  SectorBasis basis = make_sector_basis(6, 2);
  Matrix h = dense_h_gamma(c, basis);
  BlockMps x = random_block(rng, shape, 2);
  Vector fx = block_to_sector(basis, x);
  CHECK((block_to_sector(basis, apply_hamiltonian(c, x, true)) - h * fx).norm() <=
        1e-11 * (h * fx).norm());
}

TEST_CASE("pencil eigenvalues coincide with the unpreconditioned spectrum") {
  Rng rng(31);
  CoefficientSet c = pd_coeffs(rng, 6, 2, 10);
  SectorShape shape{6, 2};
  ConstantEstimates est = estimate_constants(c, shape, {6}, 0.1);
  ExpSumPrecond p = build_precond(c, 0.1, est.c_lower, est.c_upper, shape);
  DenseOperators ops = build_dense(c, shape, p);
  DenseEigs eigs = dense_eigs(ops, 3);
  Eigen::SelfAdjointEigenSolver<Matrix> raw(0.5 * (ops.h_gamma + ops.h_gamma.transpose()));
  for (int q = 0; q < 3; ++q)
    CHECK(eigs.values(q) == doctest::Approx(raw.eigenvalues()(q)).epsilon(1e-10));
  // delta_0 from the gap
  const Real delta0 = eigs.values(1) / (eigs.values(1) - eigs.values(0));
  CHECK(est.delta == doctest::Approx(delta0).epsilon(1e-10));
}

TEST_CASE("two-by-two pencil solved in closed form") {
  Matrix a(2, 2), e(2, 2);
  a << 2.0, 0.3, 0.3, 5.0;
  e << 1.0, 0.1, 0.1, 2.0;
  DenseOperators ops;
  ops.basis = make_sector_basis(2, 1);
  ops.a = a;
  ops.e = e;
  ops.h_gamma = a;
  ops.p = Matrix::Identity(2, 2);
  DenseEigs eigs = dense_eigs(ops, 2);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ref(a, e);
  CHECK(eigs.values(0) == doctest::Approx(ref.eigenvalues()(0)).epsilon(1e-13));
  CHECK(eigs.values(1) == doctest::Approx(ref.eigenvalues()(1)).epsilon(1e-13));
  // A-normalization and sign
  for (int q = 0; q < 2; ++q) {
    Vector u = eigs.vectors.col(q);
    CHECK(u.dot(a * u) == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("exact rho and angle at and away from an eigenvector") {
  Rng rng(47);
  CoefficientSet c = pd_coeffs(rng, 5, 2, 6);
  SectorShape shape{5, 2};
  ConstantEstimates est = estimate_constants(c, shape, {5}, 0.1);
  ExpSumPrecond p = build_precond(c, 0.1, est.c_lower, est.c_upper, shape);
  DenseOperators ops = build_dense(c, shape, p);
  DenseEigs eigs = dense_eigs(ops, 2);
  CHECK(exact_rho(ops, eigs.vectors.col(0)) <= 1e-10);
  CHECK(exact_angle(ops, eigs.vectors.col(0), eigs.vectors.col(0)) <= 1e-7);
  // A-orthogonal pair: angle pi/2
  CHECK(exact_angle(ops, eigs.vectors.col(0), eigs.vectors.col(1)) ==
        doctest::Approx(M_PI / 2).epsilon(1e-10));
  // generic vector: rho positive and the residual bound dominates it
  Vector x = eigs.vectors.col(0) + 0.3 * eigs.vectors.col(1);
  CHECK(exact_rho(ops, x) > 0.0);
}

TEST_CASE("sector transfer round-trips block vectors") {
  Rng rng(53);
  SectorShape shape{6, 3};
  SectorBasis basis = make_sector_basis(6, 3);
  BlockMps x = random_block(rng, shape, 2);
  Vector fx = block_to_sector(basis, x);
  BlockMps back = sector_to_block(basis, fx);
  CHECK((block_to_sector(basis, back) - fx).norm() <= 1e-12 * fx.norm());
  CHECK(block_norm(back) == doctest::Approx(fx.norm()).epsilon(1e-12));
  // full embedding agrees with the dense tensor layout
  Vector full = sector_to_full(basis, fx);
  CHECK((full - tt_to_full(to_dense_tt(x))).norm() <= 1e-12 * fx.norm());
}
