#pragma once

// Thin-domain limit: D_eps has the same reference curve and width eps delta(s);
// mu_1(D_eps) tends to the weighted 1-D eigenvalue mu_1(0, L; delta).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fermi/analysis.hpp"
#include "fermi/eig1d.hpp"
#include "fermi/eig2d.hpp"
#include "fermi/error.hpp"
#include "fermi/geometry.hpp"
#include "fermi/sampling.hpp"

namespace fermi::asymptotics {

using geometry::FermiDomain;

/// nt stays fixed as eps shrinks (the t direction is already rescaled).
struct MeshPolicy {
  std::size_t ns = 256;
  std::size_t nt = 16;
  bool refine = true;  // one extra solve at (2 ns, 2 nt) for the error estimate
};

struct EpsilonPoint {
  double epsilon = 0.0;
  bool ok = false;
  std::string error;
  double mu = 0.0;         // finest mesh value
  double mu_coarse = 0.0;  // policy mesh value
  double discretization_error = 0.0;
  double rel_error = 0.0;
  double upper_bound = 0.0;
  bool converged = false;
  std::size_t ns = 0;
  std::size_t nt = 0;
  std::optional<analysis::Certificate> certificate;  // p = 2 only
};

struct SweepResult {
  double p = 2.0;
  double mu_star = 0.0;
  std::vector<EpsilonPoint> points;
  std::optional<double> fitted_rate;

  std::vector<double> epsilons() const {
    std::vector<double> v;
    for (const auto& pt : points) v.push_back(pt.epsilon);
    return v;
  }
  std::vector<double> mu_values() const {
    std::vector<double> v;
    for (const auto& pt : points) v.push_back(pt.mu);
    return v;
  }
  std::vector<double> rel_errors() const {
    std::vector<double> v;
    for (const auto& pt : points) v.push_back(pt.rel_error);
    return v;
  }
};

/// Quotient of psi(s, r) = u(s), u the 1-D eigenfunction, on D_eps:
///   int |u'|^p I_{1-p}(eps delta, k) ds / int |u|^p I_1(eps delta, k) ds
/// with I_a(d, k) = int_0^d (1 + r k)^a dr. u is odd and the Fermi factor
/// even, so psi has zero p-mean and the quotient bounds mu_1(D_eps) above.
inline double upper_bound_epsilon(const FermiDomain& tmpl, double p, double eps, const eig1d::EigenResult& star) {
  require_exponent(p);
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidDomain, "eps must be positive");
  const std::size_t n = star.u.size();
  const double h = star.u.step();
  std::vector<double> num(n), den(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = star.u.node(i);
    const double delta = eps * tmpl.delta(s);
    const double k = tmpl.k(s);
    if (!(delta > 0.0)) throw Error(ErrorCode::InvalidDomain, "width must be positive");
    if (!(1.0 + delta * k > 0.0))
      throw Error(ErrorCode::InvalidDomain, "1 + r k(s) <= 0 at s = " + std::to_string(s));
    num[i] = std::pow(std::abs(star.du[i]), p) * analysis::radial_integral(delta, k, 1.0 - p);
    den[i] = std::pow(std::abs(star.u[i]), p) * analysis::radial_integral(delta, k, 1.0);
  }
  return quadrature::simpson(num, h) / quadrature::simpson(den, h);
}

inline double upper_bound_epsilon(const FermiDomain& tmpl, double p, double eps) {
  return upper_bound_epsilon(tmpl, p, eps, eig1d::solve_shooting(eig1d::make_problem(tmpl, p)));
}

namespace detail {

inline double solve_full(const FermiDomain& d, double p, std::size_t ns, std::size_t nt, bool& converged) {
  const auto mesh = eig2d::build_mesh(d, ns, nt);
  const auto r = p == 2.0 ? eig2d::solve_mu1_linear(mesh) : eig2d::solve_mu1_nonlinear(mesh, p, eig2d::Mode::full);
  converged = converged && r.converged;
  return r.mu;
}

/// Least-squares slope of log y against log x.
inline std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

}  // namespace detail

inline SweepResult epsilon_sweep(const FermiDomain& tmpl, double p, const std::vector<double>& epsilons,
                                 const MeshPolicy& policy = {}) {
  require_exponent(p);
  if (epsilons.empty()) throw Error(ErrorCode::InvalidDomain, "empty eps list");
  for (std::size_t i = 0; i + 1 < epsilons.size(); ++i)
    if (!(epsilons[i + 1] < epsilons[i])) throw Error(ErrorCode::InvalidDomain, "eps values must strictly decrease");
  if (policy.nt < 16) throw Error(ErrorCode::InvalidDomain, "sweep meshes need nt >= 16");

  SweepResult out;
  out.p = p;
  const auto star = eig1d::solve_shooting(eig1d::make_problem(tmpl, p));
  out.mu_star = star.mu;

  for (double eps : epsilons) {
    EpsilonPoint pt;
    pt.epsilon = eps;
    pt.ns = policy.ns;
    pt.nt = policy.nt;
    try {
      if (!(eps > 0.0)) throw Error(ErrorCode::InvalidDomain, "eps must be positive");
      const FermiDomain d = geometry::scale_width(tmpl, eps);
      analysis::require_valid(d);
      bool converged = true;
      pt.mu_coarse = detail::solve_full(d, p, policy.ns, policy.nt, converged);
      pt.mu = pt.mu_coarse;
      if (policy.refine) {
        pt.mu = detail::solve_full(d, p, 2 * policy.ns, 2 * policy.nt, converged);
        pt.discretization_error = std::abs(pt.mu_coarse - pt.mu);
        pt.ns *= 2;
        pt.nt *= 2;
      }
      pt.converged = converged;
      pt.rel_error = std::abs(pt.mu - out.mu_star) / out.mu_star;
      pt.upper_bound = upper_bound_epsilon(tmpl, p, eps, star);
      if (p == 2.0) pt.certificate = analysis::certify_odd(d);
      pt.ok = true;
    } catch (const Error& e) {
      pt.ok = false;
      pt.error = e.what();
    }
    out.points.push_back(std::move(pt));
  }

  std::vector<double> xs, ys;
  for (auto it = out.points.rbegin(); it != out.points.rend() && xs.size() < 3; ++it) {
    if (!it->ok) continue;
    const double err = std::abs(it->mu - out.mu_star);
    if (!(err > 0.0)) continue;
    xs.push_back(it->epsilon);
    ys.push_back(err);
  }
  if (xs.size() == 3) out.fitted_rate = detail::loglog_slope(xs, ys);
  return out;
}

}  // namespace fermi::asymptotics
