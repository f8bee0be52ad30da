#pragma once

#include <string>

#include "sqpinvit/second_quant.hpp"

namespace sqpinvit {

/// One-dimensional model problem on [-b, b]: attractive point potential
/// -N delta_0(x) per particle and two-particle interaction
/// strength * exp(-|x - x'|), discretized in an analytic Dirichlet sine
/// basis of size big_basis that is pre-diagonalized to yield the orbitals.
struct ModelSpec {
  int N = 2;
  int K = 14;
  Real b = 1.0;           // half-interval; also sets the spectral gap scale
  Real gamma = 3.5;       // spectral shift; must keep the diagonal positive
  Real strength = 1.0;    // two-particle interaction prefactor
  int quad_panels = 32;   // Gauss-Legendre panels on [-b, b]
  int quad_nodes = 8;     // nodes per panel (degree of exactness 15)
  int big_basis = 40;     // sine modes for the one-particle pre-diagonalization
};

/// One-particle eigenvalues, two-particle tensor by panel quadrature with a
/// split rule across the kernel kink, and the preconditioner diagonal.
/// Refuses when doubling the quadrature nodes moves any v entry by more
/// than 1e-8.
CoefficientSet generate_coefficients(const ModelSpec& spec);

/// Largest change of any v entry when the node count doubles (the
/// convergence indicator behind the acceptance check above).
Real quadrature_richardson_delta(const ModelSpec& spec);

/// Plain-text coefficient file: header "K N GAMMA", then "T i j value"
/// (i <= j), "V i j k l value" (nonzeros) and "D i value" lines, 17
/// significant digits. N rides along in the header since runs need it.
struct CoefficientFile {
  CoefficientSet coeffs;
  int N = 0;
};

void write_coefficients(const CoefficientSet& coeffs, int N, const std::string& path);
CoefficientFile read_coefficients(const std::string& path);

/// Gauss-Legendre rule on [-1, 1] (Newton on the Legendre polynomial).
void gauss_legendre(int n, std::vector<Real>& nodes, std::vector<Real>& weights);

}  // namespace sqpinvit
