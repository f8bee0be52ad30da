#include "sqpinvit/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sqpinvit {

void gauss_legendre(int n, std::vector<Real>& nodes, std::vector<Real>& weights) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    Real x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    Real dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      Real p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const Real p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const Real dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[n - 1 - i] = x;
    weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

namespace {

struct Orbitals {
  Vector omega;  // K ascending one-particle eigenvalues
  Matrix q;      // big_basis x K sine-mode coefficients
  Real b;
  int big_basis;
};

// Dirichlet sine basis psi_n(x) = sqrt(1/b) sin(n pi (x + b) / (2 b)).
Real sine_mode(Real b, int n, Real x) {
  return std::sqrt(1.0 / b) * std::sin(n * M_PI * (x + b) / (2.0 * b));
}

Orbitals solve_orbitals(const ModelSpec& spec) {
  const int B = spec.big_basis;
  if (B < spec.K) throw DimensionError("big_basis must be at least K");
  Matrix t_psi = Matrix::Zero(B, B);
  for (int n = 1; n <= B; ++n) {
    const Real kf = n * M_PI / (2.0 * spec.b);
    t_psi(n - 1, n - 1) = 0.5 * kf * kf;
  }
  // point potential -N delta_0: analytic rank-one update
  Vector psi0(B);
  for (int n = 1; n <= B; ++n) psi0(n - 1) = sine_mode(spec.b, n, 0.0);
  t_psi -= Real(spec.N) * psi0 * psi0.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(t_psi);
  Orbitals orb;
  orb.omega = es.eigenvalues().head(spec.K);
  orb.q = es.eigenvectors().leftCols(spec.K);
  orb.b = spec.b;
  orb.big_basis = B;
  for (int c = 0; c < spec.K; ++c) {
    Index imax = 0;
    orb.q.col(c).cwiseAbs().maxCoeff(&imax);
    if (orb.q(imax, c) < 0.0) orb.q.col(c) = -orb.q.col(c);
  }
  return orb;
}

// phi values at the given points: K x (#points)
Matrix orbital_values(const Orbitals& orb, const std::vector<Real>& pts) {
  Matrix psi(orb.big_basis, pts.size());
  for (int n = 1; n <= orb.big_basis; ++n)
    for (size_t s = 0; s < pts.size(); ++s) psi(n - 1, s) = sine_mode(orb.b, n, pts[s]);
  return orb.q.transpose() * psi;
}

// v_(il),(jk) = 1/2 strength int int F_il(x) F_jk(y) e^{-|x-y|} dy dx by
// panel Gauss quadrature; the same-panel squares are re-integrated over the
// two triangles so that the |x-y| kink never crosses a quadrature cell.
Matrix two_particle_matrix(const ModelSpec& spec, const Orbitals& orb, int nodes) {
  const int P = spec.quad_panels;
  const int K = spec.K;
  std::vector<Real> gl_x, gl_w;
  gauss_legendre(nodes, gl_x, gl_w);
  const Real hw = spec.b / P;  // panel half-width
  std::vector<Real> xs(P * nodes), ws(P * nodes);
  for (int a = 0; a < P; ++a) {
    const Real mid = -spec.b + (2 * a + 1) * hw;
    for (int g = 0; g < nodes; ++g) {
      xs[a * nodes + g] = mid + hw * gl_x[g];
      ws[a * nodes + g] = hw * gl_w[g];
    }
  }
  Matrix phi = orbital_values(orb, xs);  // K x U
  const int U = P * nodes;
  Matrix f(K * K, U);
  for (int i = 0; i < K; ++i)
    for (int l = 0; l < K; ++l) f.row(i * K + l) = (phi.row(i).array() * phi.row(l).array());

  Matrix g_full(U, U);
  for (int s = 0; s < U; ++s)
    for (int t = 0; t < U; ++t)
      g_full(s, t) = ws[s] * ws[t] * std::exp(-std::abs(xs[s] - xs[t]));
  Matrix v = f * g_full * f.transpose();

  // Gauss rule on [0, 1] for the triangle maps
  std::vector<Real> u_x(gl_x), u_w(gl_w);
  for (int g = 0; g < nodes; ++g) {
    u_x[g] = 0.5 * (gl_x[g] + 1.0);
    u_w[g] = 0.5 * gl_w[g];
  }
  for (int a = 0; a < P; ++a) {
    const Real lo = -spec.b + 2 * a * hw;
    Matrix fa = f.middleCols(a * nodes, nodes);          // K^2 x n
    Matrix gaa = g_full.block(a * nodes, a * nodes, nodes, nodes);
    v -= fa * gaa * fa.transpose();
    // y(x, u) = lo + (x - lo) u sweeps the lower triangle
    std::vector<Real> ys(nodes * nodes);
    std::vector<Real> wk(nodes * nodes);
    for (int s = 0; s < nodes; ++s) {
      const Real x = xs[a * nodes + s];
      for (int g = 0; g < nodes; ++g) {
        const Real y = lo + (x - lo) * u_x[g];
        ys[s * nodes + g] = y;
        wk[s * nodes + g] = ws[a * nodes + s] * (x - lo) * u_w[g] * std::exp(-(x - y));
      }
    }
    Matrix fy = orbital_values(orb, ys);  // K x n^2
    Matrix fy2(K * K, nodes * nodes);
    for (int i = 0; i < K; ++i)
      for (int l = 0; l < K; ++l)
        fy2.row(i * K + l) = (fy.row(i).array() * fy.row(l).array());
    Matrix rmat(nodes, K * K);
    for (int s = 0; s < nodes; ++s) {
      Vector acc = Vector::Zero(K * K);
      for (int g = 0; g < nodes; ++g) acc += wk[s * nodes + g] * fy2.col(s * nodes + g);
      rmat.row(s) = acc.transpose();
    }
    Matrix t1 = fa * rmat;
    v += t1 + t1.transpose();
  }
  return 0.5 * spec.strength * v;
}

Vector precond_diagonal(const ModelSpec& spec, const Vector& omega, const Matrix& vmat) {
  const int K = spec.K, N = spec.N;
  auto v_of = [&](int i, int j, int k, int l) {
    return vmat((i - 1) * K + (l - 1), (j - 1) * K + (k - 1));
  };
  Vector theta(K);
  for (int i = 1; i <= K; ++i) {
    const int ki = std::max(0, i - N);
    Real s = spec.gamma / N + omega(i - 1);
    for (int j = ki + 1; j <= ki + N; ++j) s += v_of(i, j, j, i) - v_of(i, j, i, j);
    theta(i - 1) = s;
  }
  for (int i = 0; i < K; ++i)
    if (!(theta(i) > 0.0))
      throw DimensionError(
          "shift gamma too small: the preconditioner diagonal must be positive "
          "(theta_" + std::to_string(i + 1) + " = " + std::to_string(theta(i)) + ")");
  return theta;
}

CoefficientSet assemble(const ModelSpec& spec, const Orbitals& orb, const Matrix& vmat) {
  CoefficientSet c;
  c.K = spec.K;
  c.gamma = spec.gamma;
  c.t = Matrix(orb.omega.asDiagonal());
  c.d = precond_diagonal(spec, orb.omega, vmat);
  const int K = spec.K;
  for (int i = 1; i <= K; ++i)
    for (int j = 1; j <= K; ++j)
      for (int k = 1; k <= K; ++k)
        for (int l = 1; l <= K; ++l) {
          const Real val = vmat((i - 1) * K + (l - 1), (j - 1) * K + (k - 1));
          if (val != 0.0) c.v.push_back({i, j, k, l, val});
        }
  c.validate();
  return c;
}

}  // namespace

Real quadrature_richardson_delta(const ModelSpec& spec) {
  Orbitals orb = solve_orbitals(spec);
  Matrix v1 = two_particle_matrix(spec, orb, spec.quad_nodes);
  Matrix v2 = two_particle_matrix(spec, orb, 2 * spec.quad_nodes);
  return (v1 - v2).cwiseAbs().maxCoeff();
}

CoefficientSet generate_coefficients(const ModelSpec& spec) {
  if (spec.N < 1 || spec.K < spec.N) throw DimensionError("invalid particle/orbital counts");
  if (spec.b <= 0.0) throw DimensionError("interval half-length must be positive");
  if (spec.quad_nodes < 4) throw DimensionError("quadrature degree must be at least 7");
  Orbitals orb = solve_orbitals(spec);
  Matrix v1 = two_particle_matrix(spec, orb, spec.quad_nodes);
  Matrix v2 = two_particle_matrix(spec, orb, 2 * spec.quad_nodes);
  const Real delta = (v1 - v2).cwiseAbs().maxCoeff();
  if (delta > 1e-8) {
    std::ostringstream msg;
    msg << "quadrature under-resolved: doubling the nodes moves v entries by " << delta
        << "; increase quad_panels or quad_nodes";
    throw DimensionError(msg.str());
  }
  return assemble(spec, orb, v1);
}

namespace {

std::string fmt_real(Real x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void write_coefficients(const CoefficientSet& coeffs, int N, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open coefficient file for writing: " + path);
  out << coeffs.K << ' ' << N << ' ' << fmt_real(coeffs.gamma) << '\n';
  for (int i = 1; i <= coeffs.K; ++i)
    for (int j = i; j <= coeffs.K; ++j)
      if (coeffs.t(i - 1, j - 1) != 0.0)
        out << "T " << i << ' ' << j << ' ' << fmt_real(coeffs.t(i - 1, j - 1)) << '\n';
  for (const VTerm& w : coeffs.v)
    if (w.value != 0.0)
      out << "V " << w.i << ' ' << w.j << ' ' << w.k << ' ' << w.l << ' '
          << fmt_real(w.value) << '\n';
  for (int i = 1; i <= coeffs.K; ++i)
    out << "D " << i << ' ' << fmt_real(coeffs.d(i - 1)) << '\n';
  if (!out) throw ParseError("write failed: " + path);
}

CoefficientFile read_coefficients(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open coefficient file: " + path);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
  };
  CoefficientFile out;
  if (!std::getline(in, line)) fail("missing header");
  ++line_no;
  {
    std::istringstream hs(line);
    if (!(hs >> out.coeffs.K >> out.N >> out.coeffs.gamma)) fail("malformed header, expected: K N GAMMA");
    if (out.coeffs.K < 1 || out.N < 0 || out.N > out.coeffs.K) fail("invalid K or N");
  }
  const int K = out.coeffs.K;
  out.coeffs.t = Matrix::Zero(K, K);
  out.coeffs.d = Vector::Zero(K);
  bool has_d = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;  // blank line
    if (tag == "T") {
      int i, j;
      Real val;
      if (!(ls >> i >> j >> val)) fail("malformed T line");
      if (i < 1 || j < 1 || i > K || j > K) fail("T index out of range");
      if (i > j) fail("T lines must have i <= j");
      out.coeffs.t(i - 1, j - 1) = val;
      out.coeffs.t(j - 1, i - 1) = val;
    } else if (tag == "V") {
      int i, j, k, l;
      Real val;
      if (!(ls >> i >> j >> k >> l >> val)) fail("malformed V line");
      if (std::min(std::min(i, j), std::min(k, l)) < 1 ||
          std::max(std::max(i, j), std::max(k, l)) > K)
        fail("V index out of range");
      if (val != 0.0) out.coeffs.v.push_back({i, j, k, l, val});
    } else if (tag == "D") {
      int i;
      Real val;
      if (!(ls >> i >> val)) fail("malformed D line");
      if (i < 1 || i > K) fail("D index out of range");
      out.coeffs.d(i - 1) = val;
      has_d = true;
    } else {
      fail("unknown record tag '" + tag + "'");
    }
  }
  std::sort(out.coeffs.v.begin(), out.coeffs.v.end(), [](const VTerm& a, const VTerm& b) {
    return std::tie(a.i, a.j, a.k, a.l) < std::tie(b.i, b.j, b.k, b.l);
  });
  if (!has_d) {
    // recompute the diagonal from t and v
    if (out.N < 1) throw ParseError(path + ": missing D section and N < 1");
    auto v_of = [&](int i, int j, int k, int l) -> Real {
      for (const VTerm& w : out.coeffs.v)
        if (w.i == i && w.j == j && w.k == k && w.l == l) return w.value;
      return 0.0;
    };
    for (int i = 1; i <= K; ++i) {
      const int ki = std::max(0, i - out.N);
      Real s = out.coeffs.gamma / out.N + out.coeffs.t(i - 1, i - 1);
      for (int j = ki + 1; j <= ki + out.N; ++j) s += v_of(i, j, j, i) - v_of(i, j, i, j);
      out.coeffs.d(i - 1) = s;
    }
  }
  out.coeffs.validate();
  return out;
}

}  // namespace sqpinvit
