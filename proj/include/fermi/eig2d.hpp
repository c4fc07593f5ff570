#pragma once

// Neumann p-Laplace eigenvalues on a Fermi domain, discretised with bilinear
// elements on the (s, t) rectangle, r = t delta(s). In these coordinates
//   |grad psi|^2 = (psi_s - t delta'/delta psi_t)^2 / J^2 + psi_t^2 / delta^2,
//   dA = J delta ds dt,  J = 1 + r k(s).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fermi/detail/quotient_descent.hpp"
#include "fermi/error.hpp"
#include "fermi/geometry.hpp"
#include "fermi/sampling.hpp"

namespace fermi::eig2d {

using geometry::FermiDomain;
using geometry::Vec2;
using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr std::size_t kDefaultNs = 256;
inline constexpr std::size_t kDefaultNt = 32;

enum class Extent { full, half };
enum class Mode { full, odd };

inline const char* to_string(Mode m) noexcept { return m == Mode::full ? "full" : "odd"; }

/// One 2x2 Gauss point. g1, g2 are the two components of the physical
/// gradient of each of the four cell shape functions.
struct QuadPoint {
  std::array<int, 4> node{};
  std::array<double, 4> phi{};
  std::array<double, 4> g1{};
  std::array<double, 4> g2{};
  double weight = 0.0;  // Gauss weight * cell size * J * delta
  double a11 = 0.0, a12 = 0.0, a22 = 0.0;  // (g1, g2) = (a11 d_s + a12 d_t, a22 d_t)
  double fermi_factor = 0.0;
  double det = 0.0;  // J * delta
};

struct FermiMesh {
  std::size_t ns = 0;  // cells along s in this mesh
  std::size_t nt = 0;
  Extent extent = Extent::full;
  double domain_length = 0.0;
  double s_max = 0.0;  // L or L/2
  std::vector<Vec2> nodes;
  std::vector<double> node_s, node_t;
  std::vector<QuadPoint> qp;
  std::vector<int> dirichlet;  // nodes on s = L/2 (half extent only)
  double det_min = 0.0;

  std::size_t node_count() const noexcept { return (ns + 1) * (nt + 1); }
  int index(std::size_t i, std::size_t j) const noexcept { return static_cast<int>(i * (nt + 1) + j); }
  double total_mass() const noexcept {
    double m = 0.0;
    for (const auto& q : qp) m += q.weight;
    return m;
  }
};

/// Tensor mesh of the Fermi rectangle. `ns` counts cells over the full
/// length; the half extent keeps the same spacing on [0, L/2].
inline FermiMesh build_mesh(const FermiDomain& d, std::size_t ns = kDefaultNs, std::size_t nt = kDefaultNt,
                            Extent extent = Extent::full) {
  if (!d.valid) throw Error(ErrorCode::InvalidDomain, "mesh requires a validated domain");
  if (ns < 2 || nt < 1) throw Error(ErrorCode::TooFewSamples, "mesh needs ns >= 2 and nt >= 1");
  if (extent == Extent::half && ns % 2 != 0) throw Error(ErrorCode::InvalidDomain, "half mesh needs an even ns");
  FermiMesh m;
  m.extent = extent;
  m.domain_length = d.length();
  m.ns = extent == Extent::full ? ns : ns / 2;
  m.nt = nt;
  m.s_max = extent == Extent::full ? d.length() : 0.5 * d.length();
  const double hs = d.length() / static_cast<double>(ns);
  const double ht = 1.0 / static_cast<double>(nt);

  m.nodes.resize(m.node_count());
  m.node_s.resize(m.node_count());
  m.node_t.resize(m.node_count());
  for (std::size_t i = 0; i <= m.ns; ++i) {
    const double s = i == m.ns ? m.s_max : static_cast<double>(i) * hs;
    const double delta = d.delta(s);
    for (std::size_t j = 0; j <= nt; ++j) {
      const double t = static_cast<double>(j) * ht;
      const int id = m.index(i, j);
      m.node_s[id] = s;
      m.node_t[id] = t;
      m.nodes[id] = geometry::fermi_map(d, s, std::min(t * delta, delta));
    }
    if (extent == Extent::half && i == m.ns)
      for (std::size_t j = 0; j <= nt; ++j) m.dirichlet.push_back(m.index(i, j));
  }

  const auto& g = quadrature::gauss_legendre<2>();
  m.qp.reserve(4 * m.ns * nt);
  m.det_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      const std::array<int, 4> nd{m.index(i, j), m.index(i + 1, j), m.index(i, j + 1), m.index(i + 1, j + 1)};
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
          const double xi = 0.5 * (1.0 + g.nodes[a]);
          const double eta = 0.5 * (1.0 + g.nodes[b]);
          const double s = (static_cast<double>(i) + xi) * hs;
          const double t = (static_cast<double>(j) + eta) * ht;
          const double delta = d.delta(s);
          const double slope = d.delta_slope(s);
          const double J = 1.0 + t * delta * d.k(s);
          const double det = J * delta;
          if (!(det > 0.0) || !(J > 0.0))
            throw Error(ErrorCode::DegenerateCell, "metric determinant " + std::to_string(det) + " at s = " +
                                                       std::to_string(s) + ", t = " + std::to_string(t));
          m.det_min = std::min(m.det_min, det);
          QuadPoint q;
          q.node = nd;
          q.phi = {(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta};
          const std::array<double, 4> ds{-(1 - eta) / hs, (1 - eta) / hs, -eta / hs, eta / hs};
          const std::array<double, 4> dt{-(1 - xi) / ht, -xi / ht, (1 - xi) / ht, xi / ht};
          const double a11 = 1.0 / J;
          const double a12 = -t * slope / (delta * J);
          const double a22 = 1.0 / delta;
          for (std::size_t c = 0; c < 4; ++c) {
            q.g1[c] = a11 * ds[c] + a12 * dt[c];
            q.g2[c] = a22 * dt[c];
          }
          q.weight = 0.25 * g.weights[a] * g.weights[b] * hs * ht * det;
          q.a11 = a11;
          q.a12 = a12;
          q.a22 = a22;
          q.fermi_factor = J;
          q.det = det;
          m.qp.push_back(q);
        }
      }
    }
  }
  return m;
}

struct Assembled {
  SparseMatrix K;
  SparseMatrix M;
};

inline Assembled assemble(const FermiMesh& m) {
  std::vector<Eigen::Triplet<double>> tk, tm;
  tk.reserve(16 * m.qp.size());
  tm.reserve(16 * m.qp.size());
  for (const auto& q : m.qp) {
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        tk.emplace_back(q.node[a], q.node[b], q.weight * (q.g1[a] * q.g1[b] + q.g2[a] * q.g2[b]));
        tm.emplace_back(q.node[a], q.node[b], q.weight * q.phi[a] * q.phi[b]);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(m.node_count());
  Assembled out{SparseMatrix(n, n), SparseMatrix(n, n)};
  out.K.setFromTriplets(tk.begin(), tk.end());
  out.M.setFromTriplets(tm.begin(), tm.end());
  return out;
}

struct Eigen2DResult {
  double mu = 0.0;
  Mode mode = Mode::full;
  std::size_t dofs = 0;
  double residual = 0.0;
  std::size_t ns = 0;  // cells of the mesh actually solved on
  std::size_t nt = 0;
  Extent extent = Extent::full;
  int iterations = 0;
  bool converged = false;
  bool estimate = false;  // nonlinear descent value rather than an eigensolver output
  double symmetry_line_max = 0.0;  // max |u| on s = L/2 relative to max |u| (odd mode)
  Eigen::VectorXd u;  // nodal values on the mesh
};

struct LinearOptions {
  int block = 6;
  int max_iterations = 500;
  double tol = 1e-10;
};

namespace detail {

/// Free-dof numbering: -1 for Dirichlet nodes.
inline std::vector<int> free_map(const FermiMesh& m, std::size_t& count) {
  std::vector<int> map(m.node_count(), 0);
  for (int id : m.dirichlet) map[id] = -1;
  count = 0;
  for (auto& v : map)
    if (v == 0) v = static_cast<int>(count++);
  return map;
}

inline SparseMatrix restrict(const SparseMatrix& A, const std::vector<int>& map, std::size_t count) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(A.nonZeros());
  for (int c = 0; c < A.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(A, c); it; ++it)
      if (map[it.row()] >= 0 && map[it.col()] >= 0) t.emplace_back(map[it.row()], map[it.col()], it.value());
  SparseMatrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

inline Eigen::VectorXd expand(const Eigen::VectorXd& x, const std::vector<int>& map) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(map.size()));
  for (std::size_t i = 0; i < map.size(); ++i)
    if (map[i] >= 0) u[static_cast<Eigen::Index>(i)] = x[map[i]];
  return u;
}

struct LinearSolution {
  double mu = 0.0;
  Eigen::VectorXd x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Block shift-invert subspace iteration for the smallest eigenpair of
/// K x = mu M x, M-orthogonal to `deflate` when it is nonempty.
inline LinearSolution subspace_iteration(const SparseMatrix& K, const SparseMatrix& M, const Eigen::VectorXd& deflate,
                                         const Eigen::MatrixXd& start, double sigma, const LinearOptions& opt) {
  const SparseMatrix A = K - sigma * M;
  Eigen::SimplicialLDLT<SparseMatrix> solver(A);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::SolveFailure, "shifted stiffness factorisation failed");
  Eigen::VectorXd Md;
  double dMd = 0.0;
  if (deflate.size() > 0) {
    Md = M * deflate;
    dMd = deflate.dot(Md);
  }
  auto project = [&](Eigen::MatrixXd& X) {
    if (deflate.size() == 0) return;
    for (Eigen::Index c = 0; c < X.cols(); ++c) X.col(c) -= (Md.dot(X.col(c)) / dMd) * deflate;
  };

  Eigen::MatrixXd X = start;
  project(X);
  LinearSolution out;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    Eigen::MatrixXd Y = solver.solve(M * X);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::SolveFailure, "shift-invert solve failed");
    project(Y);
    project(Y);
    const Eigen::MatrixXd Kr = Y.transpose() * (K * Y);
    const Eigen::MatrixXd Mr = Y.transpose() * (M * Y);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> rr(0.5 * (Kr + Kr.transpose()),
                                                                 0.5 * (Mr + Mr.transpose()));
    if (rr.info() != Eigen::Success) throw Error(ErrorCode::SolveFailure, "Rayleigh-Ritz step failed");
    X = Y * rr.eigenvectors();
    const double mu = rr.eigenvalues()[0];
    const Eigen::VectorXd x = X.col(0);
    const Eigen::VectorXd Mx = M * x;
    out.mu = mu;
    out.x = x;
    out.residual = (K * x - mu * Mx).norm() / std::max(1e-300, std::abs(mu) * Mx.norm());
    if (out.residual < opt.tol || std::abs(mu - previous) <= 1e-14 * std::abs(mu)) {
      out.converged = out.residual < std::sqrt(opt.tol);
      break;
    }
    previous = mu;
  }
  if (!out.converged)
    throw Error(ErrorCode::NonConvergence, "subspace iteration stalled at residual " + std::to_string(out.residual));
  return out;
}

inline Eigen::MatrixXd start_block(const FermiMesh& m, const std::vector<int>& map, std::size_t count, int block) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(count), block);
  const double L = m.domain_length;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] < 0) continue;
    const double s = m.node_s[i] / L;
    const double t = m.node_t[i];
    for (int c = 0; c < block; ++c) {
      const double f = static_cast<double>(c / 2 + 1);
      X(map[i], c) = c % 2 == 0 ? std::cos(std::numbers::pi * f * s) : std::cos(std::numbers::pi * f * s) * (t - 0.5) + std::cos(std::numbers::pi * t * f);
    }
  }
  return X;
}

inline double shift_guess(const FermiMesh& m) {
  const double a = std::numbers::pi / m.domain_length;
  return -0.1 * a * a;
}

}  // namespace detail

/// Smallest nonzero eigenvalue of the Neumann problem (p = 2), constants
/// deflated in the M inner product.
inline Eigen2DResult solve_mu1_linear(const FermiMesh& m, const LinearOptions& opt = {}) {
  if (m.extent != Extent::full) throw Error(ErrorCode::InvalidDomain, "full mode needs a full mesh");
  const Assembled a = assemble(m);
  std::size_t count = 0;
  const auto map = detail::free_map(m, count);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(count));
  const auto sol = detail::subspace_iteration(a.K, a.M, ones, detail::start_block(m, map, count, opt.block),
                                              detail::shift_guess(m), opt);
  Eigen2DResult r;
  r.mu = sol.mu;
  r.mode = Mode::full;
  r.dofs = count;
  r.residual = sol.residual;
  r.ns = m.ns;
  r.nt = m.nt;
  r.extent = m.extent;
  r.iterations = sol.iterations;
  r.converged = sol.converged;
  r.u = sol.x;
  return r;
}

/// First eigenvalue on the half mesh with u = 0 on s = L/2.
inline Eigen2DResult solve_mu1_odd_linear(const FermiMesh& m, const LinearOptions& opt = {}) {
  if (m.extent != Extent::half) throw Error(ErrorCode::InvalidDomain, "odd mode needs a half mesh");
  const Assembled a = assemble(m);
  std::size_t count = 0;
  const auto map = detail::free_map(m, count);
  const SparseMatrix K = detail::restrict(a.K, map, count);
  const SparseMatrix M = detail::restrict(a.M, map, count);
  const auto sol =
      detail::subspace_iteration(K, M, Eigen::VectorXd(), detail::start_block(m, map, count, opt.block),
                                 detail::shift_guess(m), opt);
  Eigen2DResult r;
  r.mu = sol.mu;
  r.mode = Mode::odd;
  r.dofs = count;
  r.residual = sol.residual;
  r.ns = m.ns;
  r.nt = m.nt;
  r.extent = m.extent;
  r.iterations = sol.iterations;
  r.converged = sol.converged;
  r.u = detail::expand(sol.x, map);
  r.symmetry_line_max = 0.0;
  return r;
}

namespace detail {

/// Discrete p-Rayleigh quotient over free nodal values. With `shifted` the
/// denominator is min_c int |u - c|^p, otherwise int |u|^p.
class MeshQuotient {
 public:
  MeshQuotient(const FermiMesh& m, const std::vector<int>& map, std::size_t count, double p, bool shifted,
               const SparseMatrix& precond)
      : m_(m), map_(map), count_(count), p_(p), shifted_(shifted) {
    solver_.compute(precond);
    if (solver_.info() != Eigen::Success) throw Error(ErrorCode::SolveFailure, "preconditioner factorisation failed");
    vals_.resize(m.qp.size());
    wts_.resize(m.qp.size());
    for (std::size_t q = 0; q < m.qp.size(); ++q) wts_[q] = m.qp[q].weight;
  }

  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const auto n = static_cast<Eigen::Index>(count_);
    Eigen::VectorXd gN = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd gD = Eigen::VectorXd::Zero(n);
    double N = 0.0;
    for (std::size_t k = 0; k < m_.qp.size(); ++k) {
      const auto& q = m_.qp[k];
      double a = 0.0, b = 0.0, v = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        const int f = map_[q.node[c]];
        if (f < 0) continue;
        a += q.g1[c] * x[f];
        b += q.g2[c] * x[f];
        v += q.phi[c] * x[f];
      }
      vals_[k] = v;
      const double g2 = a * a + b * b;
      if (g2 == 0.0) continue;
      N += q.weight * std::pow(g2, 0.5 * p_);
      const double coef = p_ * q.weight * std::pow(g2, 0.5 * p_ - 1.0);
      for (std::size_t c = 0; c < 4; ++c) {
        const int f = map_[q.node[c]];
        if (f >= 0) gN[f] += coef * (a * q.g1[c] + b * q.g2[c]);
      }
    }
    if (shifted_) shift_ = fermi::detail::p_mean_shift(vals_, wts_, p_, shift_);
    double D = 0.0;
    for (std::size_t k = 0; k < m_.qp.size(); ++k) {
      const auto& q = m_.qp[k];
      const double z = vals_[k] - shift_;
      D += q.weight * std::pow(std::abs(z), p_);
      const double coef = p_ * q.weight * fermi::phi(z, p_);
      for (std::size_t c = 0; c < 4; ++c) {
        const int f = map_[q.node[c]];
        if (f >= 0) gD[f] += coef * q.phi[c];
      }
    }
    if (!(D > 0.0)) {
      grad.setZero(n);
      return std::numeric_limits<double>::infinity();
    }
    const double G = N / D;
    grad = (gN - G * gD) / D;
    return G;
  }

  Eigen::VectorXd precondition(const Eigen::VectorXd& g) const { return solver_.solve(g); }

  void normalize(Eigen::VectorXd& x) {
    if (shifted_) {
      for (std::size_t k = 0; k < m_.qp.size(); ++k) {
        const auto& q = m_.qp[k];
        double v = 0.0;
        for (std::size_t c = 0; c < 4; ++c) v += q.phi[c] * x[map_[q.node[c]]];
        vals_[k] = v;
      }
      shift_ = fermi::detail::p_mean_shift(vals_, wts_, p_, shift_);
      x.array() -= shift_;
      shift_ = 0.0;
    }
    const double s = x.cwiseAbs().maxCoeff();
    if (s > 0.0) x /= s;
  }

 private:
  const FermiMesh& m_;
  const std::vector<int>& map_;
  std::size_t count_;
  double p_;
  bool shifted_;
  double shift_ = 0.0;
  std::vector<double> vals_, wts_;
  Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

}  // namespace detail

/// Discrete p-Rayleigh quotient minimised by preconditioned descent from the
/// p = 2 eigenvector. The value is an estimate of the discrete minimum; an
/// unconverged run is flagged, not thrown.
inline Eigen2DResult solve_mu1_nonlinear(const FermiMesh& m, double p, Mode mode,
                                         const fermi::detail::DescentOptions& opt = {}) {
  require_exponent(p);
  if (mode == Mode::full && m.extent != Extent::full) throw Error(ErrorCode::InvalidDomain, "full mode needs a full mesh");
  if (mode == Mode::odd && m.extent != Extent::half) throw Error(ErrorCode::InvalidDomain, "odd mode needs a half mesh");
  const Eigen2DResult lin = mode == Mode::full ? solve_mu1_linear(m) : solve_mu1_odd_linear(m);
  const Assembled a = assemble(m);
  std::size_t count = 0;
  const auto map = detail::free_map(m, count);
  Eigen::VectorXd x(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < map.size(); ++i)
    if (map[i] >= 0) x[map[i]] = lin.u[static_cast<Eigen::Index>(i)];
  const SparseMatrix P = detail::restrict(a.K, map, count) + lin.mu * detail::restrict(a.M, map, count);
  detail::MeshQuotient problem(m, map, count, p, mode == Mode::full, P);

  Eigen2DResult r;
  r.mode = mode;
  r.dofs = count;
  r.ns = m.ns;
  r.nt = m.nt;
  r.extent = m.extent;
  r.estimate = true;
  if (p == 2.0) {
    Eigen::VectorXd g;
    problem.normalize(x);
    r.mu = problem.evaluate(x, g);
    r.iterations = 0;
    r.converged = lin.converged;
    r.residual = std::sqrt(std::max(0.0, g.dot(problem.precondition(g)))) / r.mu;
  } else {
    const auto d = fermi::detail::minimize_quotient(problem, x, opt);
    Eigen::VectorXd g;
    x = d.u;
    r.mu = problem.evaluate(x, g);
    r.iterations = d.iterations;
    r.converged = d.converged;
    r.residual = std::sqrt(std::max(0.0, g.dot(problem.precondition(g)))) / r.mu;
  }
  r.u = detail::expand(x, map);
  return r;
}

}  // namespace fermi::eig2d
