#pragma once

// First nonzero eigenvalue of the weighted Neumann problem
//   -(w |u'|^{p-2} u')' = mu w |u|^{p-2} u  on (0, L),  u'(0) = u'(L) = 0,
// for an even positive weight w. Two independent methods: shooting on the
// half interval, and a P1 discretisation of the Rayleigh quotient.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/numeric/odeint.hpp>

#include "fermi/analysis.hpp"
#include "fermi/detail/quotient_descent.hpp"
#include "fermi/error.hpp"
#include "fermi/geometry.hpp"
#include "fermi/sampling.hpp"

namespace fermi::eig1d {

inline constexpr double kEvenTol = 1e-7;
inline constexpr std::size_t kMinShootingSteps = 4096;
inline constexpr double kFluxFloor = 1e-14;

struct OneDimProblem {
  double length = 0.0;
  double p = 2.0;
  SampledFunction weight;

  void validate() const {
    require_exponent(p);
    if (!(length > 0.0)) throw Error(ErrorCode::InvalidDomain, "interval length must be positive");
    if (weight.size() < 3) throw Error(ErrorCode::TooFewSamples, "weight needs at least 3 samples");
    if (std::abs(weight.length() - length) > 1e-12 * length)
      throw Error(ErrorCode::InvalidDomain, "weight samples must span [0, L]");
    for (double v : weight.values())
      if (!(v > 0.0)) throw Error(ErrorCode::NonpositiveWeight, "weight must be positive");
    if (weight.evenness_residual() > kEvenTol * weight.max_abs())
      throw Error(ErrorCode::AsymmetricWeight, "weight must be even about L/2");
  }
};

template <class F>
OneDimProblem make_problem(double length, double p, F&& w, std::size_t n = geometry::kDefaultSamples) {
  return {length, p, SampledFunction::from(length, n, std::forward<F>(w))};
}

/// Weight delta(s) of a Fermi domain.
inline OneDimProblem make_problem(const geometry::FermiDomain& d, double p) {
  return {d.length(), p, d.width.width};
}

enum class Method { shooting, discretized };

inline const char* to_string(Method m) noexcept { return m == Method::shooting ? "shooting" : "discretized"; }

struct EigenResult {
  double mu = 0.0;
  SampledFunction u;   // normalised so u(0) = 1
  SampledFunction du;
  double residual = 0.0;
  Method method = Method::shooting;
  int iterations = 0;
  bool converged = false;
  std::optional<double> second_mu;  // next discrete eigenvalue, when available
};

/// Number of strict sign changes, ignoring samples with |u| <= tol max|u|.
inline int sign_changes(std::span<const double> u, double tol = 1e-9) {
  double scale = 0.0;
  for (double v : u) scale = std::max(scale, std::abs(v));
  int changes = 0;
  int last = 0;
  for (double v : u) {
    if (std::abs(v) <= tol * scale) continue;
    const int sg = v > 0.0 ? 1 : -1;
    if (last != 0 && sg != last) ++changes;
    last = sg;
  }
  return changes;
}

/// max_i |u(L - s_i) + u(s_i)| / max|u|
inline double oddness_residual(std::span<const double> u) {
  double scale = 0.0, m = 0.0;
  for (double v : u) scale = std::max(scale, std::abs(v));
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(u[n - 1 - i] + u[i]));
  return scale > 0.0 ? m / scale : 0.0;
}

struct ShootingOptions {
  double tol = 1e-12;         // relative width of the final mu bracket
  double ode_tol = 1e-12;
  double safety_factor = 1e12;  // cap on the upper bracket relative to the seed
};

namespace detail {

using State = std::array<double, 2>;

/// Regularised flux inverse: |z|^{q-2} z with |z| floored at kFluxFloor.
inline double phi_q(double z, double q) {
  const double az = std::max(std::abs(z), kFluxFloor);
  return std::copysign(std::pow(az, q - 1.0), z);
}

struct Trajectory {
  std::vector<double> s, u, v;
  bool crossed = false;  // u < 0 somewhere strictly before L/2
};

/// Observation grid on [0, L/2]: every weight node, subdivided so that
/// there are at least kMinShootingSteps steps.
inline std::vector<double> observation_times(const OneDimProblem& pr) {
  const double half = 0.5 * pr.length;
  const double h = pr.weight.step();
  const std::size_t cells = static_cast<std::size_t>(std::ceil(half / h - 1e-9));
  const std::size_t sub = std::max<std::size_t>(1, (kMinShootingSteps + cells - 1) / cells);
  std::vector<double> t;
  t.reserve(cells * sub + 1);
  for (std::size_t c = 0; c < cells; ++c) {
    const double a = static_cast<double>(c) * h;
    const double b = std::min(half, a + h);
    for (std::size_t j = 0; j < sub; ++j) t.push_back(a + (b - a) * static_cast<double>(j) / static_cast<double>(sub));
  }
  t.push_back(half);
  return t;
}

inline Trajectory shoot(const OneDimProblem& pr, double mu, const std::vector<double>& times, double ode_tol) {
  namespace ode = boost::numeric::odeint;
  const double p = pr.p;
  const double q = p / (p - 1.0);
  auto rhs = [&](const State& x, State& dx, double s) {
    const double w = pr.weight(s);
    dx[0] = phi_q(x[1] / w, q);
    dx[1] = -mu * w * fermi::phi(x[0], p);
  };
  Trajectory tr;
  tr.s.reserve(times.size());
  tr.u.reserve(times.size());
  tr.v.reserve(times.size());
  auto observe = [&](const State& x, double s) {
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]))
      throw Error(ErrorCode::StiffFailure, "shooting produced a non-finite state at s = " + std::to_string(s));
    tr.s.push_back(s);
    tr.u.push_back(x[0]);
    tr.v.push_back(x[1]);
    if (x[0] < 0.0 && s < times.back()) tr.crossed = true;
  };
  State x{1.0, 0.0};
  auto stepper = ode::make_controlled(ode_tol, ode_tol, ode::runge_kutta_dopri5<State>());
  try {
    ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), times[1] - times[0], observe,
                         ode::max_step_checker(100000));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::StiffFailure, std::string("step control failed: ") + e.what());
  }
  return tr;
}

}  // namespace detail

/// Smallest mu for which the solution started at u(0) = 1, v(0) = 0 reaches
/// zero at L/2. The seed is the Lyapunov lower bound; mu doubles until the
/// solution crosses zero before L/2, then bisects on that predicate.
inline EigenResult solve_shooting(const OneDimProblem& pr, const ShootingOptions& opt = {}) {
  pr.validate();
  const double L = pr.length;
  const auto times = detail::observation_times(pr);

  // Lyapunov seed on an odd grid so that L/2 is a node
  SampledFunction w_seed = pr.weight.size() % 2 == 1
                               ? pr.weight
                               : SampledFunction::from(L, geometry::kDefaultSamples, [&](double s) { return pr.weight(s); });
  const double seed = analysis::lyapunov_bound(w_seed.values(), L, pr.p, kEvenTol * w_seed.max_abs());

  EigenResult res;
  res.method = Method::shooting;
  double lo = 0.0;
  double hi = seed;
  auto crosses = [&](double mu) {
    ++res.iterations;
    const auto tr = detail::shoot(pr, mu, times, opt.ode_tol);
    return tr.crossed || tr.u.back() < 0.0;
  };
  while (!crosses(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > opt.safety_factor * seed)
      throw Error(ErrorCode::NoCrossing, "no zero crossing below mu = " + std::to_string(hi));
  }
  while (hi - lo > opt.tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (crosses(mid)) hi = mid; else lo = mid;
  }
  res.mu = 0.5 * (lo + hi);
  const auto tr = detail::shoot(pr, res.mu, times, opt.ode_tol);
  res.residual = std::abs(tr.u.back());

  // Odd extension to [0, L] on the uniform observation grid
  const std::size_t m = tr.s.size();
  std::vector<double> u(2 * m - 1), du(2 * m - 1);
  const double q = pr.p / (pr.p - 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double slope = detail::phi_q(tr.v[i] / pr.weight(tr.s[i]), q);
    u[i] = tr.u[i];
    du[i] = slope;
    u[2 * m - 2 - i] = -tr.u[i];
    du[2 * m - 2 - i] = slope;
  }
  u[m - 1] = 0.0;
  du[0] = du[2 * m - 2] = 0.0;
  res.u = SampledFunction(L, std::move(u));
  res.du = SampledFunction(L, std::move(du));
  res.converged = res.residual <= 1e-6;
  return res;
}

struct DiscretizedOptions {
  fermi::detail::DescentOptions descent{};
};

namespace detail {

/// P1 elements on a uniform grid with 3-point Gauss quadrature per element.
struct P1Grid {
  std::size_t n = 0;  // nodes
  double h = 0.0;
  std::vector<double> elem_weight;              // int_e w
  std::vector<std::array<double, 3>> qp_weight;  // W_q = gauss weight * w(x_q) * h / 2
  std::array<double, 3> lambda{};               // barycentric coordinate of node i+1 at each point
};

inline P1Grid make_p1(const OneDimProblem& pr, std::size_t n) {
  P1Grid g;
  g.n = n;
  g.h = pr.length / static_cast<double>(n - 1);
  const auto& rule = quadrature::gauss_legendre<3>();
  for (std::size_t q = 0; q < 3; ++q) g.lambda[q] = 0.5 * (1.0 + rule.nodes[q]);
  g.elem_weight.resize(n - 1);
  g.qp_weight.resize(n - 1);
  for (std::size_t e = 0; e + 1 < n; ++e) {
    double total = 0.0;
    for (std::size_t q = 0; q < 3; ++q) {
      const double s = (static_cast<double>(e) + g.lambda[q]) * g.h;
      const double wq = 0.5 * g.h * rule.weights[q] * pr.weight(s);
      g.qp_weight[e][q] = wq;
      total += wq;
    }
    g.elem_weight[e] = total;
  }
  return g;
}

inline Eigen::SparseMatrix<double> p1_stiffness(const P1Grid& g, double tau) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * g.n);
  for (std::size_t e = 0; e + 1 < g.n; ++e) {
    const double k = g.elem_weight[e] / (g.h * g.h);
    double m00 = 0.0, m01 = 0.0, m11 = 0.0;
    for (std::size_t q = 0; q < 3; ++q) {
      const double l = g.lambda[q];
      m00 += g.qp_weight[e][q] * (1.0 - l) * (1.0 - l);
      m01 += g.qp_weight[e][q] * (1.0 - l) * l;
      m11 += g.qp_weight[e][q] * l * l;
    }
    const auto i = static_cast<int>(e);
    trip.emplace_back(i, i, k + tau * m00);
    trip.emplace_back(i, i + 1, -k + tau * m01);
    trip.emplace_back(i + 1, i, -k + tau * m01);
    trip.emplace_back(i + 1, i + 1, k + tau * m11);
  }
  Eigen::SparseMatrix<double> A(static_cast<int>(g.n), static_cast<int>(g.n));
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

inline Eigen::SparseMatrix<double> p1_mass(const P1Grid& g) {
  Eigen::SparseMatrix<double> K0 = p1_stiffness(g, 0.0);
  Eigen::SparseMatrix<double> K1 = p1_stiffness(g, 1.0);
  return K1 - K0;
}

class QuotientProblem {
 public:
  QuotientProblem(const P1Grid& g, double p, double tau) : g_(g), p_(p) {
    solver_.compute(p1_stiffness(g, tau));
    if (solver_.info() != Eigen::Success) throw Error(ErrorCode::SolveFailure, "preconditioner factorisation failed");
    vals_.resize(3 * (g.n - 1));
    wts_.resize(3 * (g.n - 1));
    for (std::size_t e = 0; e + 1 < g.n; ++e)
      for (std::size_t q = 0; q < 3; ++q) wts_[3 * e + q] = g.qp_weight[e][q];
  }

  double evaluate(const Eigen::VectorXd& u, Eigen::VectorXd& grad) {
    const std::size_t n = g_.n;
    grad.setZero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd gN = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd gD = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    double N = 0.0;
    for (std::size_t e = 0; e + 1 < n; ++e) {
      const double du = (u[e + 1] - u[e]) / g_.h;
      const double a = std::abs(du);
      N += g_.elem_weight[e] * std::pow(a, p_);
      const double f = p_ * g_.elem_weight[e] * fermi::phi(du, p_) / g_.h;
      gN[e] -= f;
      gN[e + 1] += f;
      for (std::size_t q = 0; q < 3; ++q)
        vals_[3 * e + q] = (1.0 - g_.lambda[q]) * u[e] + g_.lambda[q] * u[e + 1];
    }
    shift_ = fermi::detail::p_mean_shift(vals_, wts_, p_, shift_);
    double D = 0.0;
    for (std::size_t e = 0; e + 1 < n; ++e) {
      for (std::size_t q = 0; q < 3; ++q) {
        const double z = vals_[3 * e + q] - shift_;
        D += wts_[3 * e + q] * std::pow(std::abs(z), p_);
        const double f = p_ * wts_[3 * e + q] * fermi::phi(z, p_);
        gD[e] += f * (1.0 - g_.lambda[q]);
        gD[e + 1] += f * g_.lambda[q];
      }
    }
    if (!(D > 0.0)) {
      grad.setZero();
      return std::numeric_limits<double>::infinity();
    }
    const double G = N / D;
    grad = (gN - G * gD) / D;
    return G;
  }

  Eigen::VectorXd precondition(const Eigen::VectorXd& g) const { return solver_.solve(g); }

  void normalize(Eigen::VectorXd& u) {
    const std::size_t n = g_.n;
    for (std::size_t e = 0; e + 1 < n; ++e)
      for (std::size_t q = 0; q < 3; ++q)
        vals_[3 * e + q] = (1.0 - g_.lambda[q]) * u[e] + g_.lambda[q] * u[e + 1];
    shift_ = fermi::detail::p_mean_shift(vals_, wts_, p_, shift_);
    u.array() -= shift_;
    const double m = u.cwiseAbs().maxCoeff();
    if (m > 0.0) u /= m;
    shift_ = 0.0;
  }

 private:
  const P1Grid& g_;
  double p_;
  double shift_ = 0.0;
  std::vector<double> vals_, wts_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

}  // namespace detail

/// Independent oracle on n grid nodes. p = 2 solves the generalised
/// eigenproblem with the constant mode shifted away; other p minimise the
/// discrete quotient starting from the p = 2 eigenvector.
inline EigenResult solve_discretized(const OneDimProblem& pr, std::size_t n, const DiscretizedOptions& opt = {}) {
  pr.validate();
  if (n < 32) throw Error(ErrorCode::TooFewSamples, "discretisation needs n >= 32");
  const auto g = detail::make_p1(pr, n);
  const Eigen::MatrixXd K = Eigen::MatrixXd(detail::p1_stiffness(g, 0.0));
  const Eigen::MatrixXd M = Eigen::MatrixXd(detail::p1_mass(g));

  // K + c (M 1)(M 1)^T moves the constant mode to c |1|_M^2 and leaves the rest.
  const Eigen::VectorXd m1 = M * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  const double total = m1.sum();
  const double c = 10.0 * K.diagonal().maxCoeff() / M.diagonal().minCoeff() / total;
  const Eigen::MatrixXd Kd = K + c * m1 * m1.transpose();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kd, M);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::SolveFailure, "generalised eigensolver failed");

  EigenResult res;
  res.method = Method::discretized;
  Eigen::VectorXd x = es.eigenvectors().col(0);
  double mu2 = es.eigenvalues()[0];
  res.second_mu = es.eigenvalues()[1];
  if (x[0] != 0.0) x /= x[0];
  res.residual = (K * x - mu2 * M * x).norm() / std::max(1e-300, (mu2 * M * x).norm());
  res.converged = true;

  if (pr.p == 2.0) {
    res.mu = mu2;
  } else {
    const double tau = mu2;
    detail::QuotientProblem qp(g, pr.p, tau);
    auto d = fermi::detail::minimize_quotient(qp, x, opt.descent);
    res.mu = d.quotient;
    res.iterations = d.iterations;
    res.converged = d.converged;
    x = d.u;
    if (x[0] != 0.0) x /= x[0];
    Eigen::VectorXd grad;
    qp.evaluate(d.u, grad);
    res.residual = std::sqrt(std::max(0.0, grad.dot(qp.precondition(grad)))) / res.mu;
    res.second_mu.reset();
  }
  std::vector<double> u(x.data(), x.data() + x.size());
  res.u = SampledFunction(pr.length, std::move(u));
  res.du = res.u.derivative();
  return res;
}

/// Rayleigh quotient int |v'|^p w / int |v|^p w of v = cos(pi s / L),
/// which has zero p-mean for even w. An explicit upper bound on mu.
inline double cosine_quotient(const OneDimProblem& pr) {
  pr.validate();
  const double a = std::numbers::pi / pr.length;
  const double p = pr.p;
  const double num = quadrature::composite_gauss<10>(
      [&](double s) { return std::pow(a * std::abs(std::sin(a * s)), p) * pr.weight(s); }, 0.0, pr.length,
      pr.weight.size() - 1);
  const double den = quadrature::composite_gauss<10>(
      [&](double s) { return std::pow(std::abs(std::cos(a * s)), p) * pr.weight(s); }, 0.0, pr.length,
      pr.weight.size() - 1);
  return num / den;
}

}  // namespace fermi::eig1d
