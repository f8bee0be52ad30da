#pragma once

// Independent dense reference: operators assembled as explicit Kronecker
// products of 2x2 factors on the full 2^K occupation space. Used as the
// oracle for the matrix-free block operators; deliberately shares no code
// with the library paths it checks.

#include "test_support.hpp"

namespace denseref {

using namespace sqpinvit;

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix mat_s() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

inline Matrix mat_a() {
  Matrix m(2, 2);
  m << 0, 1, 0, 0;
  return m;
}

/// a_i on the full space (first orbital's index most significant).
inline Matrix annihilation(int K, int i) {
  Matrix op = Matrix::Identity(1, 1);
  for (int k = 1; k <= K; ++k) {
    if (k < i)
      op = kron(op, mat_s());
    else if (k == i)
      op = kron(op, mat_a());
    else
      op = kron(op, Matrix::Identity(2, 2));
  }
  return op;
}

inline Matrix creation(int K, int i) { return annihilation(K, i).transpose(); }

inline Matrix number_operator(int K) {
  const Index n = Index(1) << K;
  Matrix p = Matrix::Zero(n, n);
  for (int i = 1; i <= K; ++i) p += creation(K, i) * annihilation(K, i);
  return p;
}

inline Matrix full_hamiltonian(const CoefficientSet& c, bool include_shift) {
  const Index n = Index(1) << c.K;
  Matrix h = Matrix::Zero(n, n);
  std::vector<Matrix> ann, cre;
  for (int i = 1; i <= c.K; ++i) {
    ann.push_back(annihilation(c.K, i));
    cre.push_back(creation(c.K, i));
  }
  for (int i = 1; i <= c.K; ++i)
    for (int j = 1; j <= c.K; ++j)
      if (c.t(i - 1, j - 1) != 0.0) h += c.t(i - 1, j - 1) * cre[i - 1] * ann[j - 1];
  for (const VTerm& w : c.v)
    h += w.value * cre[w.i - 1] * cre[w.j - 1] * ann[w.k - 1] * ann[w.l - 1];
  if (include_shift) h += c.gamma * Matrix::Identity(n, n);
  return h;
}

}  // namespace denseref
