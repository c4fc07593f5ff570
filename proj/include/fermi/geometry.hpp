#pragma once

// Reference curves in arc-length form and the Fermi-coordinate domains built
// on them:  D = { gamma(s) + r n(s) : 0 < s < L, 0 < r < delta(s) },
// with n(s) = (y'(s), -x'(s)) the clockwise rotation of the unit tangent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fermi/error.hpp"
#include "fermi/sampling.hpp"

namespace fermi::geometry {

using Vec2 = Eigen::Vector2d;
using ScalarFunction = std::function<double(double)>;

inline constexpr std::size_t kDefaultSamples = 1025;  // 1024 intervals, L/2 is a node
inline constexpr double kDefaultSymmetryTol = 1e-7;

struct CurveSpec {
  double length = 0.0;
  SampledFunction curvature;
  std::vector<Vec2> points;
  std::vector<Vec2> tangents;
  double symmetry_tol = kDefaultSymmetryTol;

  std::size_t size() const noexcept { return points.size(); }
  double node(std::size_t i) const noexcept { return curvature.node(i); }
};

struct CurveSymmetry {
  double curvature = 0.0;  // max |k(L-s) - k(s)|
  double x = 0.0;          // max |x(L-s) + x(s)|
  double y = 0.0;          // max |y(L-s) - y(s)|
  double unit_speed = 0.0; // max ||gamma'| - 1|

  double worst() const noexcept { return std::max({curvature, x, y}); }
};

inline CurveSymmetry curve_symmetry(const CurveSpec& c) {
  CurveSymmetry r;
  const std::size_t n = c.size();
  r.curvature = c.curvature.evenness_residual();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = n - 1 - i;
    r.x = std::max(r.x, std::abs(c.points[j].x() + c.points[i].x()));
    r.y = std::max(r.y, std::abs(c.points[j].y() - c.points[i].y()));
    r.unit_speed = std::max(r.unit_speed, std::abs(c.tangents[i].norm() - 1.0));
  }
  return r;
}

namespace detail {

struct FrenetState {
  double theta = 0.0;
  double x = 0.0;
  double y = 0.0;
};

inline FrenetState rk4_frenet(const ScalarFunction& k, FrenetState st, double s0, double s1, int substeps) {
  const double h = (s1 - s0) / substeps;
  auto rhs = [&](double s, const FrenetState& y) {
    return FrenetState{k(s), std::cos(y.theta), std::sin(y.theta)};
  };
  auto axpy = [](const FrenetState& a, double t, const FrenetState& b) {
    return FrenetState{a.theta + t * b.theta, a.x + t * b.x, a.y + t * b.y};
  };
  double s = s0;
  for (int m = 0; m < substeps; ++m) {
    const FrenetState k1 = rhs(s, st);
    const FrenetState k2 = rhs(s + 0.5 * h, axpy(st, 0.5 * h, k1));
    const FrenetState k3 = rhs(s + 0.5 * h, axpy(st, 0.5 * h, k2));
    const FrenetState k4 = rhs(s + h, axpy(st, h, k3));
    st.theta += h / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta);
    st.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    st.y += h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
    s += h;
  }
  return st;
}

}  // namespace detail

/// Integrates theta' = k, x' = cos theta, y' = sin theta outward from the
/// anchor gamma(L/2) = (0, 0), theta(L/2) = 0.
inline CurveSpec reconstruct_from_curvature(double length, const ScalarFunction& k, std::size_t n = kDefaultSamples,
                                            double symmetry_tol = kDefaultSymmetryTol, int substeps = 8) {
  if (!(length > 0.0)) throw Error(ErrorCode::InvalidDomain, "curve length must be positive");
  if (n < 3) throw Error(ErrorCode::TooFewSamples, "curve needs at least 3 samples");
  CurveSpec c;
  c.length = length;
  c.symmetry_tol = symmetry_tol;
  c.curvature = SampledFunction::from(length, n, k);
  const double scale = std::max(1.0, c.curvature.max_abs());
  if (c.curvature.evenness_residual() > symmetry_tol * scale)
    throw Error(ErrorCode::AsymmetricCurvature,
                "k(L-s) != k(s), residual " + std::to_string(c.curvature.evenness_residual()));

  c.points.assign(n, Vec2::Zero());
  c.tangents.assign(n, Vec2::Zero());
  const double mid = 0.5 * length;
  auto store = [&](std::size_t i, const detail::FrenetState& st) {
    c.points[i] = Vec2(st.x, st.y);
    c.tangents[i] = Vec2(std::cos(st.theta), std::sin(st.theta));
  };

  // forward from the midpoint
  std::size_t first_up = 0;
  while (first_up < n && c.node(first_up) < mid) ++first_up;
  detail::FrenetState st;
  double s = mid;
  for (std::size_t i = first_up; i < n; ++i) {
    if (c.node(i) > s) st = detail::rk4_frenet(k, st, s, c.node(i), substeps);
    s = c.node(i);
    store(i, st);
  }
  // backward
  st = detail::FrenetState{};
  s = mid;
  for (std::size_t i = first_up; i-- > 0;) {
    st = detail::rk4_frenet(k, st, s, c.node(i), substeps);
    s = c.node(i);
    store(i, st);
  }
  return c;
}

inline CurveSpec reconstruct_from_curvature(double length, std::span<const double> k_samples,
                                            double symmetry_tol = kDefaultSymmetryTol) {
  SampledFunction k(length, std::vector<double>(k_samples.begin(), k_samples.end()));
  return reconstruct_from_curvature(length, ScalarFunction([k](double s) { return k(s); }), k.size(), symmetry_tol);
}

/// Converts a regular parametric curve (x(t), y(t)), t in [t0, t1], to arc
/// length form. Derivatives are taken by 7-point finite differences.
inline CurveSpec curvature_from_parametric(const ScalarFunction& fx, const ScalarFunction& fy, double t0, double t1,
                                           std::size_t n = kDefaultSamples,
                                           double symmetry_tol = kDefaultSymmetryTol) {
  if (!(t1 > t0)) throw Error(ErrorCode::InvalidDomain, "parameter range must be increasing");
  if (n < 3) throw Error(ErrorCode::TooFewSamples, "curve needs at least 3 samples");
  const double range = t1 - t0;
  const double h1 = range * 1e-3;
  const double h2 = range * 5e-3;

  auto first = [&](double t) {
    return Vec2(diff::derivatives(fx, t, h1, t0, t1).first, diff::derivatives(fy, t, h1, t0, t1).first);
  };
  auto speed = [&](double t) { return first(t).norm(); };

  const std::size_t panels = 4 * (n - 1);
  const double dt = range / static_cast<double>(panels);
  for (std::size_t j = 0; j <= 2 * panels; ++j) {
    const double t = t0 + range * static_cast<double>(j) / static_cast<double>(2 * panels);
    const double v = speed(t);
    if (!(v >= 1e-12)) throw Error(ErrorCode::ZeroSpeed, "|gamma'(t)| vanishes near t = " + std::to_string(t));
  }

  std::vector<double> cumulative(panels + 1, 0.0);
  for (std::size_t j = 0; j < panels; ++j) {
    const double a = t0 + dt * static_cast<double>(j);
    cumulative[j + 1] = cumulative[j] + quadrature::composite_gauss<10>(speed, a, a + dt, 1);
  }
  const double length = cumulative.back();

  CurveSpec c;
  c.length = length;
  c.symmetry_tol = symmetry_tol;
  c.points.resize(n);
  c.tangents.resize(n);
  std::vector<double> k(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double target = SampledFunction::node_of(length, n, i);
    double t;
    if (i == 0) {
      t = t0;
    } else if (i == n - 1) {
      t = t1;
    } else {
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
      std::size_t j = static_cast<std::size_t>(std::distance(cumulative.begin(), it)) - 1;
      j = std::min(j, panels - 1);
      const double a = t0 + dt * static_cast<double>(j);
      t = a + (target - cumulative[j]) / speed(a);
      for (int it_newton = 0; it_newton < 30; ++it_newton) {
        const double arc = cumulative[j] + quadrature::composite_gauss<10>(speed, a, t, 1);
        const double step = (arc - target) / speed(t);
        t = std::clamp(t - step, a, a + dt);
        if (std::abs(step) < 1e-15 * range) break;
      }
    }
    const auto [dx, ddx] = diff::derivatives(fx, t, h2, t0, t1);
    const auto [dy, ddy] = diff::derivatives(fy, t, h2, t0, t1);
    const Vec2 d1 = first(t);
    const double v = d1.norm();
    k[i] = (dx * ddy - dy * ddx) / std::pow(std::hypot(dx, dy), 3);
    c.points[i] = Vec2(fx(t), fy(t));
    c.tangents[i] = d1 / v;
  }
  c.curvature = SampledFunction(length, std::move(k));

  const CurveSymmetry sym = curve_symmetry(c);
  const double scale = std::max(1.0, c.curvature.max_abs());
  if (sym.curvature > symmetry_tol * scale || sym.x > symmetry_tol * std::max(1.0, length) ||
      sym.y > symmetry_tol * std::max(1.0, length))
    throw Error(ErrorCode::SymmetryViolation, "parametric curve is not symmetric about the y-axis (residual " +
                                                  std::to_string(sym.worst()) + ")");
  return c;
}

/// C^2 quintic Hermite interpolant of a curve through its samples, using
/// gamma' = T and gamma'' = k * (-T_y, T_x). Returns position at s.
inline Vec2 smooth_position(const CurveSpec& c, double s) {
  const auto [i0, f] = c.curvature.locate(s);
  if (f == 0.0) return c.points[i0];
  const std::size_t i1 = i0 + 1;
  const double h = c.curvature.step();
  auto second = [&](std::size_t i) -> Vec2 { return Vec2(-c.tangents[i].y(), c.tangents[i].x()) * c.curvature[i]; };
  const double t = f, t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const double h00 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
  const double h10 = t - 6 * t3 + 8 * t4 - 3 * t5;
  const double h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
  const double h01 = 10 * t3 - 15 * t4 + 6 * t5;
  const double h11 = -4 * t3 + 7 * t4 - 3 * t5;
  const double h21 = 0.5 * t3 - t4 + 0.5 * t5;
  return h00 * c.points[i0] + h10 * h * c.tangents[i0] + h20 * h * h * second(i0) + h01 * c.points[i1] +
         h11 * h * c.tangents[i1] + h21 * h * h * second(i1);
}

struct WidthProfile {
  SampledFunction width;
  SampledFunction slope;
  double evenness_tol = kDefaultSymmetryTol;
};

inline WidthProfile make_width(SampledFunction width, double evenness_tol = kDefaultSymmetryTol) {
  for (double v : width.values())
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidDomain, "width must be positive at every sample");
  if (width.evenness_residual() > evenness_tol * std::max(1.0, width.max_abs()))
    throw Error(ErrorCode::SymmetryViolation, "width is not even about L/2");
  WidthProfile w;
  w.slope = width.derivative();
  w.width = std::move(width);
  w.evenness_tol = evenness_tol;
  return w;
}

inline WidthProfile make_width(const CurveSpec& curve, const ScalarFunction& delta,
                               double evenness_tol = kDefaultSymmetryTol) {
  return make_width(SampledFunction::from(curve.length, curve.size(), delta), evenness_tol);
}

struct ValidationGrid {
  std::size_t ns = 1024;
  std::size_t nr = 128;
};

struct ValidationReport {
  ValidationGrid grid;
  double jacobian_min = 0.0;
  CurveSymmetry curve_symmetry;
  double width_asymmetry = 0.0;
  bool symmetric = false;
  bool injective = false;
  std::size_t collisions = 0;
  bool valid = false;
  std::vector<std::string> failures;
};

struct FermiDomain {
  CurveSpec curve;
  WidthProfile width;
  double jacobian_min = 0.0;
  std::vector<Vec2> offset_curve;
  bool valid = false;
  bool injectivity_checked = false;
  ValidationReport report;

  double length() const noexcept { return curve.length; }
  std::size_t samples() const noexcept { return curve.size(); }
  double k(double s) const noexcept { return curve.curvature(s); }
  double delta(double s) const noexcept { return width.width(s); }
  double delta_slope(double s) const noexcept { return width.slope(s); }
};

/// Point gamma(s) + r n(s); curve data is interpolated linearly between samples.
inline Vec2 fermi_map(const FermiDomain& d, double s, double r) {
  const double L = d.length();
  if (s < -1e-12 * L || s > L * (1.0 + 1e-12) || r < -1e-12 || r > d.delta(s) * (1.0 + 1e-12) + 1e-14)
    throw Error(ErrorCode::OutOfDomain,
                "(s, r) = (" + std::to_string(s) + ", " + std::to_string(r) + ") lies outside the Fermi rectangle");
  const auto [i, f] = d.curve.curvature.locate(s);
  Vec2 p = d.curve.points[i];
  Vec2 t = d.curve.tangents[i];
  if (f != 0.0) {
    p = (1.0 - f) * p + f * d.curve.points[i + 1];
    t = ((1.0 - f) * t + f * d.curve.tangents[i + 1]).normalized();
  }
  if (r == 0.0) return p;
  return p + r * Vec2(t.y(), -t.x());
}

namespace detail {

inline std::uint64_t cell_key(std::int64_t ix, std::int64_t iy) {
  return (static_cast<std::uint64_t>(ix) << 32) ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy));
}

}  // namespace detail

inline ValidationReport validate_domain(const FermiDomain& d, ValidationGrid grid = {}) {
  ValidationReport rep;
  rep.grid = grid;
  const std::size_t ns = std::max<std::size_t>(grid.ns, 2);
  const std::size_t nr = std::max<std::size_t>(grid.nr, 2);
  const double L = d.length();
  const double hs = L / static_cast<double>(ns);

  rep.jacobian_min = std::numeric_limits<double>::infinity();
  std::vector<Vec2> pts;
  std::vector<double> spacing;
  pts.reserve((ns + 1) * (nr + 1));
  spacing.reserve((ns + 1) * (nr + 1));
  for (std::size_t i = 0; i <= ns; ++i) {
    const double s = L * static_cast<double>(i) / static_cast<double>(ns);
    const double k = d.k(s);
    const double delta = d.delta(s);
    const auto [ci, f] = d.curve.curvature.locate(s);
    Vec2 p = d.curve.points[ci];
    Vec2 t = d.curve.tangents[ci];
    if (f != 0.0) {
      p = (1.0 - f) * p + f * d.curve.points[ci + 1];
      t = ((1.0 - f) * t + f * d.curve.tangents[ci + 1]).normalized();
    }
    const Vec2 normal(t.y(), -t.x());
    for (std::size_t j = 0; j <= nr; ++j) {
      const double r = delta * static_cast<double>(j) / static_cast<double>(nr);
      const double jac = 1.0 + r * k;
      rep.jacobian_min = std::min(rep.jacobian_min, jac);
      pts.push_back(p + r * normal);
      spacing.push_back(std::min(hs * std::abs(jac), delta / static_cast<double>(nr)));
    }
  }

  // Spatial hash: any two grid points that are not index-neighbours but land
  // closer than half the local spacing count as a fold of the map.
  const double cell = std::max(*std::max_element(spacing.begin(), spacing.end()) * 0.5, 1e-300);
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
  buckets.reserve(pts.size());
  auto cell_of = [&](const Vec2& p) {
    return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                                                 static_cast<std::int64_t>(std::floor(p.y() / cell))};
  };
  for (std::uint32_t idx = 0; idx < pts.size(); ++idx) {
    const auto [cx, cy] = cell_of(pts[idx]);
    buckets[detail::cell_key(cx, cy)].push_back(idx);
  }
  const auto stride = static_cast<std::int64_t>(nr + 1);
  for (std::uint32_t a = 0; a < pts.size(); ++a) {
    const auto [cx, cy] = cell_of(pts[a]);
    const std::int64_t ia = a / stride, ja = a % stride;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = buckets.find(detail::cell_key(cx + dx, cy + dy));
        if (it == buckets.end()) continue;
        for (std::uint32_t b : it->second) {
          if (b <= a) continue;
          const std::int64_t ib = b / stride, jb = b % stride;
          if (std::abs(ia - ib) <= 1 && std::abs(ja - jb) <= 1) continue;
          const double limit = 0.5 * std::min(spacing[a], spacing[b]);
          if ((pts[a] - pts[b]).norm() < limit) ++rep.collisions;
        }
      }
    }
  }
  rep.injective = rep.collisions == 0;

  rep.curve_symmetry = curve_symmetry(d.curve);
  rep.width_asymmetry = d.width.width.evenness_residual();
  const double tol = d.curve.symmetry_tol;
  rep.symmetric = rep.curve_symmetry.curvature <= tol * std::max(1.0, d.curve.curvature.max_abs()) &&
                  rep.curve_symmetry.x <= tol * std::max(1.0, L) && rep.curve_symmetry.y <= tol * std::max(1.0, L) &&
                  rep.width_asymmetry <= d.width.evenness_tol * std::max(1.0, d.width.width.max_abs());

  if (!(rep.jacobian_min > 0.0))
    rep.failures.push_back("1 + r k(s) <= 0 somewhere (min " + std::to_string(rep.jacobian_min) + ")");
  if (!rep.injective) rep.failures.push_back("Fermi map folds: " + std::to_string(rep.collisions) + " collisions");
  if (!rep.symmetric) rep.failures.push_back("domain is not mirror symmetric");
  rep.valid = rep.failures.empty();
  return rep;
}

inline FermiDomain make_domain(CurveSpec curve, WidthProfile width, ValidationGrid grid = {}) {
  if (curve.size() != width.width.size() || std::abs(curve.length - width.width.length()) > 1e-12 * curve.length)
    throw Error(ErrorCode::InvalidDomain, "curve and width must share one sample grid");
  FermiDomain d;
  d.curve = std::move(curve);
  d.width = std::move(width);
  d.offset_curve.resize(d.curve.size());
  for (std::size_t i = 0; i < d.curve.size(); ++i) {
    const Vec2& t = d.curve.tangents[i];
    d.offset_curve[i] = d.curve.points[i] + d.width.width[i] * Vec2(t.y(), -t.x());
  }
  d.report = validate_domain(d, grid);
  d.jacobian_min = d.report.jacobian_min;
  d.injectivity_checked = true;
  d.valid = d.report.valid;
  return d;
}

/// Convenience: curvature and width given as functions of arc length.
inline FermiDomain make_domain(double length, const ScalarFunction& k, const ScalarFunction& delta,
                               std::size_t n = kDefaultSamples, ValidationGrid grid = {}) {
  CurveSpec curve = reconstruct_from_curvature(length, k, n);
  WidthProfile w = make_width(curve, delta);
  return make_domain(std::move(curve), std::move(w), grid);
}

/// Same curve, width multiplied by eps.
inline FermiDomain scale_width(const FermiDomain& d, double eps, ValidationGrid grid = {}) {
  std::vector<double> w(d.width.width.values().begin(), d.width.width.values().end());
  for (double& v : w) v *= eps;
  WidthProfile wp = make_width(SampledFunction(d.length(), std::move(w)), d.width.evenness_tol);
  return make_domain(d.curve, std::move(wp), grid);
}

/// Uniform dilation by c: L -> cL, k -> k/c, delta -> c delta.
inline FermiDomain dilate(const FermiDomain& d, double c, ValidationGrid grid = {}) {
  CurveSpec curve = d.curve;
  curve.length *= c;
  std::vector<double> k(d.curve.curvature.values().begin(), d.curve.curvature.values().end());
  for (double& v : k) v /= c;
  curve.curvature = SampledFunction(curve.length, std::move(k));
  for (auto& p : curve.points) p *= c;
  std::vector<double> w(d.width.width.values().begin(), d.width.width.values().end());
  for (double& v : w) v *= c;
  WidthProfile wp = make_width(SampledFunction(curve.length, std::move(w)), d.width.evenness_tol);
  return make_domain(std::move(curve), std::move(wp), grid);
}

}  // namespace fermi::geometry
