#pragma once

// Minimisation of a discrete p-Rayleigh quotient G(u) = N(u) / D(u), where
// D(u) = min_c sum_q W_q |u_q - c|^p. The minimising shift c is the unique
// root of sum_q W_q phi_p(u_q - c) = 0, i.e. u - c satisfies the p-mean
// constraint, and by the envelope theorem grad D = p sum_q W_q phi_p(u_q - c) dq/du.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <span>

#include <Eigen/Core>

#include "fermi/sampling.hpp"

namespace fermi::detail {

/// Root c of sum_q w_q phi_p(v_q - c) = 0. Safeguarded Newton inside the
/// bracket [min v, max v]; the residual is strictly decreasing in c.
inline double p_mean_shift(std::span<const double> v, std::span<const double> w, double p, double guess) {
  if (v.empty()) return 0.0;
  auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  double lo = *mn, hi = *mx;
  if (hi - lo <= 0.0) return lo;
  auto residual = [&](double c, double* slope) {
    double f = 0.0, df = 0.0;
    for (std::size_t q = 0; q < v.size(); ++q) {
      const double z = v[q] - c;
      const double az = std::abs(z);
      if (az == 0.0) continue;
      const double pw = std::pow(az, p - 2.0);
      f += w[q] * pw * z;
      df += w[q] * pw;
    }
    if (slope) *slope = -(p - 1.0) * df;
    return f;
  };
  double c = std::clamp(guess, lo, hi);
  const double span = hi - lo;
  for (int it = 0; it < 200; ++it) {
    double slope = 0.0;
    const double f = residual(c, &slope);
    if (f == 0.0) return c;
    if (f > 0.0) lo = c; else hi = c;
    double next = (slope < 0.0 && std::isfinite(slope)) ? c - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - c) <= 1e-15 * span || hi - lo <= 1e-15 * span) return next;
    c = next;
  }
  return c;
}

struct DescentOptions {
  int max_iterations = 20000;
  int stall_window = 50;
  double stall_tol = 1e-10;
  bool conjugate = true;  // Polak-Ribiere(+) momentum on the preconditioned gradient
};

struct DescentResult {
  double quotient = std::numeric_limits<double>::infinity();
  Eigen::VectorXd u;
  int iterations = 0;
  bool converged = false;
};

/// Problem concept:
///   double evaluate(const VectorXd& u, VectorXd& grad);   // returns G(u), grad G
///   VectorXd precondition(const VectorXd& g) const;        // P^{-1} g, P SPD
///   void normalize(VectorXd& u) const;                     // shift/scale without changing G
/// The descent direction is -P^{-1} grad G with optional PR+ momentum; the
/// step is chosen by Armijo backtracking on G.
template <class Problem>
DescentResult minimize_quotient(Problem& problem, Eigen::VectorXd u, const DescentOptions& opt = {}) {
  DescentResult res;
  problem.normalize(u);
  Eigen::VectorXd g(u.size());
  double G = problem.evaluate(u, g);
  Eigen::VectorXd z = problem.precondition(g);
  Eigen::VectorXd d = -z;
  double gz = g.dot(z);
  double alpha = 1.0;
  bool plain = true;  // d is the plain preconditioned gradient
  std::deque<double> history{G};

  for (int it = 1; it <= opt.max_iterations; ++it) {
    res.iterations = it;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -z;
      plain = true;
      slope = -gz;
      if (!(slope < 0.0)) {
        res.converged = true;
        break;
      }
    }
    // Armijo backtracking, starting from twice the last accepted step
    alpha = std::min(alpha * 2.0, 1e6);
    Eigen::VectorXd trial(u.size());
    Eigen::VectorXd g_trial(u.size());
    double G_trial = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < 80; ++bt) {
      trial = u + alpha * d;
      G_trial = problem.evaluate(trial, g_trial);
      if (std::isfinite(G_trial) && G_trial <= G + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!plain) {
        d = -z;  // restart along the plain preconditioned gradient
        plain = true;
        continue;
      }
      res.converged = true;  // no further decrease representable
      break;
    }
    const double scale_before = trial.cwiseAbs().maxCoeff();
    problem.normalize(trial);
    const double nu = trial.cwiseAbs().maxCoeff() / scale_before;
    u = trial;
    G = problem.evaluate(u, g_trial);
    Eigen::VectorXd z_new = problem.precondition(g_trial);
    const double gz_new = g_trial.dot(z_new);
    double beta = 0.0;
    if (opt.conjugate && gz > 0.0) beta = std::max(0.0, (gz_new - g_trial.dot(z)) / gz);
    d = -z_new + beta * nu * d;
    plain = beta == 0.0;
    g = g_trial;
    z = std::move(z_new);
    gz = gz_new;

    history.push_back(G);
    if (static_cast<int>(history.size()) > opt.stall_window + 1) history.pop_front();
    if (static_cast<int>(history.size()) == opt.stall_window + 1 &&
        (history.front() - G) <= opt.stall_tol * std::abs(G)) {
      res.converged = true;
      break;
    }
  }
  res.quotient = G;
  res.u = std::move(u);
  return res;
}

}  // namespace fermi::detail
