#pragma once

// Closed-form constants, explicit eigenvalue bounds, their hypothesis checks,
// and the certificate deciding when the first nonzero Neumann eigenvalue has
// an eigenfunction odd about the symmetry axis.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fermi/error.hpp"
#include "fermi/geometry.hpp"
#include "fermi/sampling.hpp"

namespace fermi::analysis {

using geometry::FermiDomain;

inline constexpr double kConcavityTol = 1e-9;
inline constexpr double kSlopeTol = 1e-9;

/// Half-period of the p-sine: 2 pi (p-1)^{1/p} / (p sin(pi/p)).
inline double pi_p(double p) {
  require_exponent(p);
  return 2.0 * std::numbers::pi * std::pow(p - 1.0, 1.0 / p) / (p * std::sin(std::numbers::pi / p));
}

/// pi_p from its integral definition 2 int_0^inf ds / (1 + s^p/(p-1)).
/// After s = (p-1)^{1/p} sigma the integral splits at sigma = 1; the tail
/// is folded onto [0, 1] by sigma = w^{-1/(p-1)}, which removes the endpoint
/// singularity. x^p is still not smooth at 0 for p near 1, so both pieces go
/// to tanh-sinh rather than Gauss-Kronrod.
inline double pi_p_quadrature(double p) {
  require_exponent(p);
  boost::math::quadrature::tanh_sinh<double> ts;
  const double q = p / (p - 1.0);
  const double head = ts.integrate([p](double x) { return 1.0 / (1.0 + std::pow(x, p)); }, 0.0, 1.0);
  const double tail = ts.integrate([q](double x) { return 1.0 / (1.0 + std::pow(x, q)); }, 0.0, 1.0);
  return 2.0 * std::pow(p - 1.0, 1.0 / p) * (head + tail / (p - 1.0));
}

inline void require_valid(const FermiDomain& d) {
  if (!d.valid) {
    std::string why;
    for (const auto& f : d.report.failures) why += (why.empty() ? "" : "; ") + f;
    throw Error(ErrorCode::InvalidDomain, why.empty() ? "domain failed validation" : why);
  }
}

namespace detail {

/// min over samples of min{1, (1 + delta k)^{-p}}; (1+rk)^{-p} is monotone in
/// r so only r = 0 and r = delta matter.
inline double fermi_factor_min(const FermiDomain& d, double p) {
  double m = 1.0;
  for (std::size_t i = 0; i < d.samples(); ++i) {
    const double j = 1.0 + d.width.width[i] * d.curve.curvature[i];
    m = std::min(m, std::pow(j, -p));
  }
  return m;
}

}  // namespace detail

/// min over the closed Fermi rectangle of (1 + r k(s))^{-p}.
inline double a_p(const FermiDomain& d, double p) {
  require_exponent(p);
  require_valid(d);
  return detail::fermi_factor_min(d, p);
}

inline double b_p(const FermiDomain& d, double p) {
  require_exponent(p);
  require_valid(d);
  const double factor = p < 2.0 ? std::pow(2.0, -p / 2.0) : std::pow(2.0, 1.0 - p);
  return factor * std::min(1.0, detail::fermi_factor_min(d, p));
}

/// Constant in (a^2 + b^2)^{p/2} >= C_p (a^p + b^p).
inline double c_p(double p) {
  require_exponent(p);
  return p < 2.0 ? std::pow(2.0, (p - 2.0) / 2.0) : 1.0;
}

struct ConcavityResult {
  bool pass = false;
  double worst_residual = 0.0;  // amount by which the worst scaled second difference exceeds tol
};

/// Discrete concavity: every centered second difference <= tol * max|samples|.
inline ConcavityResult concavity_check(std::span<const double> samples, double tol = kConcavityTol) {
  if (samples.size() < 3) throw Error(ErrorCode::TooFewSamples, "concavity check needs at least 3 samples");
  double scale = 0.0;
  for (double v : samples) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return {true, 0.0};
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < samples.size(); ++i)
    worst = std::max(worst, (samples[i - 1] - 2.0 * samples[i] + samples[i + 1]) / scale);
  const double excess = std::max(0.0, worst - tol);
  return {excess == 0.0, excess};
}

struct HypothesisResult {
  std::string name;
  bool pass = false;
  double residual = 0.0;
};

/// A lower bound together with the hypotheses it rests on. `value` is NaN
/// when the Fermi Jacobian is not positive, since the constants are then
/// undefined.
struct BoundReport {
  std::string theorem_id;
  double value = 0.0;
  std::map<std::string, double> constants;
  std::vector<HypothesisResult> hypotheses;
  bool applicable = false;
  std::size_t grid_size = 0;
  double tolerance = kConcavityTol;

  void finalize() {
    applicable = std::all_of(hypotheses.begin(), hypotheses.end(), [](const auto& h) { return h.pass; });
  }
};

namespace detail {

inline HypothesisResult jacobian_hypothesis(const FermiDomain& d) {
  return {"jacobian_positive", d.jacobian_min > 0.0, d.jacobian_min};
}

inline HypothesisResult concave_hypothesis(std::string name, std::span<const double> v, double tol) {
  const auto c = concavity_check(v, tol);
  return {std::move(name), c.pass, c.worst_residual};
}

inline std::vector<double> pointwise(const FermiDomain& d, int width_power) {
  std::vector<double> out(d.samples());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::pow(d.width.width[i], width_power) * d.curve.curvature[i];
  return out;
}

}  // namespace detail

/// mu_1^odd >= A_p (pi_p / L)^p for constant width and concave curvature.
inline BoundReport lower_bound_constant_width(const FermiDomain& d, double p, double tol = kConcavityTol) {
  require_exponent(p);
  BoundReport rep;
  rep.theorem_id = "constant_width";
  rep.grid_size = d.samples();
  rep.tolerance = tol;
  const auto w = d.width.width.values();
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  const double spread = (*hi - *lo) / std::max(std::abs(*hi), 1e-300);
  rep.hypotheses.push_back({"width_constant", spread <= tol, spread});
  rep.hypotheses.push_back(detail::concave_hypothesis("curvature_concave", d.curve.curvature.values(), tol));
  rep.hypotheses.push_back(detail::jacobian_hypothesis(d));
  const double pp = pi_p(p);
  const double ap = d.jacobian_min > 0.0 ? detail::fermi_factor_min(d, p) : std::numeric_limits<double>::quiet_NaN();
  rep.constants = {{"pi_p", pp}, {"A_p", ap}, {"L", d.length()}, {"p", p}};
  rep.value = ap * std::pow(pp / d.length(), p);
  rep.finalize();
  return rep;
}

/// mu_1^odd >= B_p (pi_p / L)^p for concave width with |delta'| <= 1 and
/// delta k or delta^2 k concave.
inline BoundReport lower_bound_variable_width(const FermiDomain& d, double p, double tol = kConcavityTol) {
  require_exponent(p);
  BoundReport rep;
  rep.theorem_id = "variable_width";
  rep.grid_size = d.samples();
  rep.tolerance = tol;
  rep.hypotheses.push_back(detail::concave_hypothesis("width_concave", d.width.width.values(), tol));
  const auto dk = detail::pointwise(d, 1);
  const auto d2k = detail::pointwise(d, 2);
  const auto c1 = concavity_check(dk, tol);
  const auto c2 = concavity_check(d2k, tol);
  rep.hypotheses.push_back(
      {"width_curvature_concave", c1.pass || c2.pass, std::min(c1.worst_residual, c2.worst_residual)});
  const double slope = d.width.slope.max_abs();
  rep.hypotheses.push_back({"width_slope_at_most_one", slope <= 1.0 + kSlopeTol, slope});
  rep.hypotheses.push_back(detail::jacobian_hypothesis(d));
  const double pp = pi_p(p);
  const double factor = p < 2.0 ? std::pow(2.0, -p / 2.0) : std::pow(2.0, 1.0 - p);
  const double bp = d.jacobian_min > 0.0 ? factor * std::min(1.0, detail::fermi_factor_min(d, p))
                                         : std::numeric_limits<double>::quiet_NaN();
  rep.constants = {{"pi_p", pp}, {"B_p", bp}, {"L", d.length()}, {"p", p}};
  rep.value = bp * std::pow(pp / d.length(), p);
  rep.finalize();
  return rep;
}

enum class CurvatureSign { nonnegative, negative, mixed };

inline const char* case_label(CurvatureSign c) noexcept {
  switch (c) {
    case CurvatureSign::nonnegative: return "a";
    case CurvatureSign::negative: return "b";
    case CurvatureSign::mixed: return "c";
  }
  return "?";
}

struct Threshold {
  CurvatureSign sign = CurvatureSign::nonnegative;
  double value = 0.0;
  double max_nonnegative_denominator = 0.0;  // max (2 delta + delta^2 k)^2
  double max_negative_denominator = 0.0;     // max 4 delta^2 / (1 + delta k)^2
  std::size_t grid_size = 0;
};

/// p = 2 thresholds below which mu_1 forces an odd eigenfunction.
/// Samples with |k| < 1e-12 count as nonnegative; the negative case is strict.
inline Threshold thm11_threshold(const FermiDomain& d) {
  require_valid(d);
  Threshold t;
  t.grid_size = d.samples();
  bool all_nonneg = true;
  bool all_neg = true;
  // maxima of the square roots, so that 1/root^2 is exact for exact roots
  double root_a = 0.0;
  double root_b = 0.0;
  for (std::size_t i = 0; i < d.samples(); ++i) {
    const double k = d.curve.curvature[i];
    const double delta = d.width.width[i];
    if (k < -1e-12) all_nonneg = false;
    if (!(k < 0.0)) all_neg = false;
    root_a = std::max(root_a, std::abs(2.0 * delta + delta * delta * k));
    root_b = std::max(root_b, 2.0 * delta / (1.0 + delta * k));
  }
  t.max_nonnegative_denominator = root_a * root_a;
  t.max_negative_denominator = root_b * root_b;
  auto inv_sq = [](double root) { return (1.0 / root) * (1.0 / root); };
  if (all_nonneg) {
    t.sign = CurvatureSign::nonnegative;
    t.value = inv_sq(root_a);
  } else if (all_neg) {
    t.sign = CurvatureSign::negative;
    t.value = inv_sq(root_b);
  } else {
    t.sign = CurvatureSign::mixed;
    t.value = inv_sq(std::max(root_a, root_b));
  }
  return t;
}

/// int_0^delta (1 + r k)^alpha dr in closed form, with a series for |delta k| < 1e-8.
inline double radial_integral(double delta, double k, double alpha) {
  const double x = delta * k;
  if (std::abs(x) < 1e-8) return delta * (1.0 + alpha * x / 2.0 + alpha * (alpha - 1.0) * x * x / 6.0);
  if (alpha == -1.0) return delta * std::log1p(x) / x;
  const double beta = alpha + 1.0;
  return delta * std::expm1(beta * std::log1p(x)) / (beta * x);
}

inline constexpr std::size_t kUpperBoundPanels = 256;

/// Rayleigh quotient of cos(pi s / L), constant across the width:
/// (pi/L)^p int |sin|^p I_{1-p} ds / int |cos|^p I_1 ds. For p != 2 this is
/// an extension of the p = 2 construction and is labelled as such in reports.
inline double test_function_upper_bound(const FermiDomain& d, double p) {
  require_exponent(p);
  require_valid(d);
  const double L = d.length();
  const double w = std::numbers::pi / L;
  const double num = quadrature::composite_gauss<10>(
      [&](double s) { return std::pow(std::abs(std::sin(w * s)), p) * radial_integral(d.delta(s), d.k(s), 1.0 - p); },
      0.0, L, kUpperBoundPanels);
  const double den = quadrature::composite_gauss<10>(
      [&](double s) { return std::pow(std::abs(std::cos(w * s)), p) * radial_integral(d.delta(s), d.k(s), 1.0); }, 0.0,
      L, kUpperBoundPanels);
  return std::pow(w, p) * num / den;
}

struct Certificate {
  CurvatureSign sign = CurvatureSign::nonnegative;
  double threshold = 0.0;
  double mu1_upper = 0.0;
  bool certified = false;
  std::string upper_bound_source = "test_function";
};

/// p = 2 only. `tighter_upper` may replace the cosine quotient by any other
/// rigorous upper bound on mu_1.
inline Certificate certify_odd(const FermiDomain& d, std::optional<double> tighter_upper = std::nullopt) {
  const Threshold t = thm11_threshold(d);
  Certificate c;
  c.sign = t.sign;
  c.threshold = t.value;
  if (tighter_upper) {
    c.mu1_upper = *tighter_upper;
    c.upper_bound_source = "caller";
  } else {
    c.mu1_upper = test_function_upper_bound(d, 2.0);
  }
  c.certified = c.mu1_upper < c.threshold;
  return c;
}

namespace detail {

// int_{u0}^{u1} u^{e} du, u0 >= 0
inline double power_moment(double u0, double u1, double e) {
  return (std::pow(u1, e + 1.0) - std::pow(u0, e + 1.0)) / (e + 1.0);
}

}  // namespace detail

/// min w / int_0^{L/2} (L/2 - s)^{p-1} w(s) ds. The integral is a composite
/// Simpson-type product rule: w is replaced by its piecewise quadratic
/// interpolant on the sample grid and integrated against the kernel exactly
/// on the panel that touches s = L/2, by 20-point Gauss elsewhere. This
/// keeps the rule exact for constant weights at every p.
inline double lyapunov_bound(std::span<const double> w, double L, double p, double even_tol = 1e-7) {
  require_exponent(p);
  const std::size_t n = w.size();
  if (n < 3) throw Error(ErrorCode::TooFewSamples, "weight needs at least 3 samples");
  if (n % 2 == 0) throw Error(ErrorCode::InvalidDomain, "weight grid must have an odd sample count so L/2 is a node");
  double wmin = std::numeric_limits<double>::infinity();
  double wmax = 0.0;
  for (double v : w) {
    if (!(v > 0.0)) throw Error(ErrorCode::NonpositiveWeight, "weight must be positive");
    wmin = std::min(wmin, v);
    wmax = std::max(wmax, v);
  }
  for (std::size_t i = 0; i < n / 2; ++i)
    if (std::abs(w[n - 1 - i] - w[i]) > even_tol * wmax)
      throw Error(ErrorCode::AsymmetricWeight, "weight is not even about L/2");

  const std::size_t m = (n - 1) / 2;  // intervals on [0, L/2]
  const double h = L / static_cast<double>(n - 1);
  const double e = p - 1.0;
  const auto& g = quadrature::gauss_legendre<20>();
  // u = L/2 - s measured from the midpoint; node i sits at u = (m - i) h
  auto kernel = [&](double u) { return std::pow(u, e); };
  double integral = 0.0;

  auto gauss_panel = [&](std::size_t i0, std::size_t order) {
    // nodes i0 .. i0+order, all with u > 0 except possibly none
    const double ua = static_cast<double>(m - i0 - order) * h;
    const double ub = static_cast<double>(m - i0) * h;
    for (std::size_t q = 0; q < g.nodes.size(); ++q) {
      const double u = 0.5 * (ua + ub) + 0.5 * (ub - ua) * g.nodes[q];
      const double wq = 0.5 * (ub - ua) * g.weights[q] * kernel(u);
      const double x = (static_cast<double>(m - i0) * h - u) / h;  // local coordinate, node i0 at x = 0
      if (order == 1) {
        integral += wq * ((1.0 - x) * w[i0] + x * w[i0 + 1]);
      } else {
        const double l0 = 0.5 * (x - 1.0) * (x - 2.0);
        const double l1 = -x * (x - 2.0);
        const double l2 = 0.5 * x * (x - 1.0);
        integral += wq * (l0 * w[i0] + l1 * w[i0 + 1] + l2 * w[i0 + 2]);
      }
    }
  };

  std::size_t start = 0;
  if (m % 2 == 1 && m > 1) {
    gauss_panel(0, 1);
    start = 1;
  }
  if (m == 1) {
    // single linear panel with the singular endpoint: nodes u = h (i=0), u = 0 (i=1)
    const double mom0 = detail::power_moment(0.0, h, e);
    const double mom1 = detail::power_moment(0.0, h, e + 1.0);
    integral += (mom1 / h) * w[0] + (mom0 - mom1 / h) * w[1];
  } else {
    for (std::size_t i0 = start; i0 + 2 <= m; i0 += 2) {
      if (i0 + 2 < m) {
        gauss_panel(i0, 2);
      } else {
        // last panel: nodes u = 2h (i0), h (i0+1), 0 (i0+2)
        const double M0 = detail::power_moment(0.0, 2.0 * h, e);
        const double M1 = detail::power_moment(0.0, 2.0 * h, e + 1.0);
        const double M2 = detail::power_moment(0.0, 2.0 * h, e + 2.0);
        const double h2 = h * h;
        const double at_zero = (M2 - 3.0 * h * M1 + 2.0 * h2 * M0) / (2.0 * h2);
        const double at_h = (-M2 + 2.0 * h * M1) / h2;
        const double at_2h = (M2 - h * M1) / (2.0 * h2);
        integral += at_2h * w[i0] + at_h * w[i0 + 1] + at_zero * w[i0 + 2];
      }
    }
  }
  return wmin / integral;
}

inline BoundReport lyapunov_report(const FermiDomain& d, double p) {
  BoundReport rep;
  rep.theorem_id = "lyapunov_1d";
  rep.grid_size = d.samples();
  const auto w = d.width.width.values();
  const bool positive = std::all_of(w.begin(), w.end(), [](double v) { return v > 0.0; });
  rep.hypotheses.push_back({"weight_positive", positive, *std::min_element(w.begin(), w.end())});
  const double asym = d.width.width.evenness_residual();
  rep.hypotheses.push_back({"weight_even", asym <= d.width.evenness_tol * std::max(1.0, d.width.width.max_abs()), asym});
  rep.value = positive ? lyapunov_bound(w, d.length(), p) : std::numeric_limits<double>::quiet_NaN();
  rep.constants = {{"L", d.length()}, {"p", p}, {"p_2_over_L_p", p * std::pow(2.0 / d.length(), p)}};
  rep.finalize();
  return rep;
}

/// p = 2: lower bound on mu_1 itself, valid when the constant-width bound
/// applies and the certificate shows mu_1 = mu_1^odd.
inline BoundReport full_spectrum_lower_bound_constant_width(const FermiDomain& d) {
  BoundReport rep = lower_bound_constant_width(d, 2.0);
  rep.theorem_id = "constant_width_full_spectrum";
  const Certificate c = certify_odd(d);
  rep.hypotheses.push_back({"odd_mode_certified", c.certified, c.threshold - c.mu1_upper});
  rep.finalize();
  return rep;
}

inline BoundReport full_spectrum_lower_bound_variable_width(const FermiDomain& d) {
  BoundReport rep = lower_bound_variable_width(d, 2.0);
  rep.theorem_id = "variable_width_full_spectrum";
  const Certificate c = certify_odd(d);
  rep.hypotheses.push_back({"odd_mode_certified", c.certified, c.threshold - c.mu1_upper});
  rep.finalize();
  return rep;
}

struct Figure2Row {
  double x = 0.0;
  double r = 0.0;
  double b = 0.0;
  double b_minus_r = 0.0;
};

/// With x = 1/p: r(x) = sin(pi x)/(pi x), b(x) = (1-x)^x. b > r is
/// equivalent to 2 p^{1/p} < pi_p.
inline std::vector<Figure2Row> figure2_data(std::span<const double> p_grid) {
  std::vector<Figure2Row> rows;
  rows.reserve(p_grid.size());
  for (double p : p_grid) {
    require_exponent(p);
    Figure2Row row;
    row.x = 1.0 / p;
    const double px = std::numbers::pi * row.x;
    row.r = std::sin(px) / px;
    row.b = std::pow(1.0 - row.x, row.x);
    row.b_minus_r = row.b - row.r;
    rows.push_back(row);
  }
  return rows;
}

struct ProofConstants {
  double s = 0.0;
  double k = 0.0;
  double delta = 0.0;
  std::optional<double> B1_sq, B1_sq_closed, C1_lower;
  std::optional<double> B2_sq, B2_sq_closed, C2_lower;
};

namespace detail {

// int_a^b dt / (1 + t k), stable as k -> 0
inline double inverse_jacobian_integral(double a, double b, double k) {
  if (std::abs(k) * std::max(std::abs(a), std::abs(b)) < 1e-12) return b - a;
  return (std::log1p(b * k) - std::log1p(a * k)) / k;
}

template <class F>
double golden_section_max(F&& f, double lo, double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double e = a + inv_phi * (b - a);
  double fc = f(c), fe = f(e);
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, hi - lo); ++it) {
    if (fc > fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + inv_phi * (b - a);
      fe = f(e);
    }
  }
  return std::max({fc, fe, f(0.5 * (a + b))});
}

}  // namespace detail

/// Exact 1-D maxima B_1(s)^2, B_2(s)^2 (golden section over r in [0, delta]),
/// their closed-form majorants, and the implied lower bounds 1/(4 B^2).
inline ProofConstants proof_constants_at(double k, double delta) {
  if (!(delta > 0.0) || !(1.0 + delta * k > 0.0))
    throw Error(ErrorCode::InvalidDomain, "need delta > 0 and 1 + delta k > 0");
  ProofConstants pc;
  pc.k = k;
  pc.delta = delta;
  if (k >= 0.0) {
    auto f1 = [&](double r) {
      return (delta - r) * (1.0 + (delta + r) * k / 2.0) * detail::inverse_jacobian_integral(0.0, r, k);
    };
    pc.B1_sq = detail::golden_section_max(f1, 0.0, delta);
    const double c = delta + delta * delta * k / 2.0;
    pc.B1_sq_closed = c * c;
    pc.C1_lower = 1.0 / (4.0 * *pc.B1_sq);
  }
  if (k <= 0.0) {
    auto f2 = [&](double r) {
      const double a = delta - r;
      return a * (1.0 + a * k / 2.0) * detail::inverse_jacobian_integral(a, delta, k);
    };
    pc.B2_sq = detail::golden_section_max(f2, 0.0, delta);
    const double j = 1.0 + delta * k;
    pc.B2_sq_closed = delta * delta / (j * j);
    pc.C2_lower = 1.0 / (4.0 * *pc.B2_sq);
  }
  return pc;
}

inline ProofConstants proof_constants(const FermiDomain& d, double s) {
  require_valid(d);
  ProofConstants pc = proof_constants_at(d.k(s), d.delta(s));
  pc.s = s;
  return pc;
}

}  // namespace fermi::analysis
