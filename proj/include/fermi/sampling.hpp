#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "fermi/error.hpp"

namespace fermi {

/// Values of a function on the uniform grid s_i = L i / (n - 1), i = 0..n-1.
/// Evaluation between nodes is piecewise linear; outside [0, L] it clamps.
class SampledFunction {
 public:
  SampledFunction() = default;

  SampledFunction(double length, std::vector<double> values) : length_(length), values_(std::move(values)) {
    if (values_.size() < 2) throw Error(ErrorCode::TooFewSamples, "a sampled function needs at least 2 nodes");
    if (!(length_ > 0.0)) throw Error(ErrorCode::InvalidDomain, "sample interval length must be positive");
  }

  template <class F>
  static SampledFunction from(double length, std::size_t n, F&& f) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = f(node_of(length, n, i));
    return SampledFunction(length, std::move(v));
  }

  static double node_of(double length, std::size_t n, std::size_t i) {
    return length * static_cast<double>(i) / static_cast<double>(n - 1);
  }

  double length() const noexcept { return length_; }
  std::size_t size() const noexcept { return values_.size(); }
  double step() const noexcept { return length_ / static_cast<double>(values_.size() - 1); }
  double node(std::size_t i) const noexcept { return node_of(length_, values_.size(), i); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  bool empty() const noexcept { return values_.empty(); }

  double operator()(double s) const noexcept {
    const auto [i, f] = locate(s);
    if (f == 0.0) return values_[i];
    return values_[i] + f * (values_[i + 1] - values_[i]);
  }

  /// Index of the interval holding s and the fractional offset in it. Nodes
  /// are snapped so that evaluating at a node returns the stored sample.
  std::pair<std::size_t, double> locate(double s) const noexcept {
    const std::size_t last = values_.size() - 1;
    const double x = s / length_ * static_cast<double>(last);
    if (!(x > 0.0)) return {0, 0.0};
    if (x >= static_cast<double>(last)) return {last, 0.0};
    const double nearest = std::round(x);
    if (std::abs(x - nearest) < 1e-11) return {static_cast<std::size_t>(nearest), 0.0};
    const auto i = static_cast<std::size_t>(x);
    return {i, x - static_cast<double>(i)};
  }

  /// Centered differences inside, one-sided (second order) at the ends.
  SampledFunction derivative() const {
    const std::size_t n = values_.size();
    const double h = step();
    std::vector<double> d(n);
    if (n == 2) {
      d[0] = d[1] = (values_[1] - values_[0]) / h;
    } else {
      for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (values_[i + 1] - values_[i - 1]) / (2.0 * h);
      d[0] = (-3.0 * values_[0] + 4.0 * values_[1] - values_[2]) / (2.0 * h);
      d[n - 1] = (3.0 * values_[n - 1] - 4.0 * values_[n - 2] + values_[n - 3]) / (2.0 * h);
    }
    return SampledFunction(length_, std::move(d));
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  /// max_i |f(L - s_i) - f(s_i)|
  double evenness_residual() const noexcept {
    double m = 0.0;
    const std::size_t n = values_.size();
    for (std::size_t i = 0; i < n / 2; ++i) m = std::max(m, std::abs(values_[n - 1 - i] - values_[i]));
    return m;
  }

 private:
  double length_ = 0.0;
  std::vector<double> values_;
};

namespace quadrature {

template <std::size_t N>
struct GaussRule {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};
};

/// N-point Gauss-Legendre rule on [-1, 1], nodes ascending.
template <std::size_t N>
const GaussRule<N>& gauss_legendre() {
  static const GaussRule<N> rule = [] {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < x.size(); ++i) {
      pts.emplace_back(x[i], w[i]);
      if (x[i] != 0.0) pts.emplace_back(-x[i], w[i]);
    }
    std::sort(pts.begin(), pts.end());
    GaussRule<N> r;
    for (std::size_t i = 0; i < N; ++i) {
      r.nodes[i] = pts[i].first;
      r.weights[i] = pts[i].second;
    }
    return r;
  }();
  return rule;
}

/// Composite N-point Gauss-Legendre over `panels` equal panels of [a, b].
template <std::size_t N = 10, class F>
double composite_gauss(F&& f, double a, double b, std::size_t panels) {
  const auto& rule = gauss_legendre<N>();
  const double h = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t k = 0; k < panels; ++k) {
    const double mid = a + (static_cast<double>(k) + 0.5) * h;
    double panel = 0.0;
    for (std::size_t q = 0; q < N; ++q) panel += rule.weights[q] * f(mid + 0.5 * h * rule.nodes[q]);
    total += 0.5 * h * panel;
  }
  return total;
}

/// Composite Simpson on uniform samples; an odd interval count finishes with
/// one Simpson 3/8 panel.
inline double simpson(std::span<const double> y, double h) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * h * (y[0] + y[1]);
  std::size_t intervals = n - 1;
  double total = 0.0;
  std::size_t end = intervals;
  if (intervals % 2 == 1) {
    if (intervals == 1) return 0.5 * h * (y[0] + y[1]);
    end = intervals - 3;
    total += 3.0 * h / 8.0 * (y[end] + 3.0 * y[end + 1] + 3.0 * y[end + 2] + y[end + 3]);
  }
  for (std::size_t i = 0; i + 2 <= end; i += 2) total += h / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2]);
  return total;
}

}  // namespace quadrature

namespace diff {

/// Finite-difference weights for derivatives 0..M at x0 over arbitrary nodes
/// (Fornberg's recursion). Returns w[m][j].
template <std::size_t M>
std::array<std::vector<double>, M + 1> fornberg_weights(double x0, std::span<const double> x) {
  const std::size_t n = x.size();
  std::array<std::vector<double>, M + 1> c;
  for (auto& row : c) row.assign(n, 0.0);
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min(i, M);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k)
          c[k][i] = c1 * (static_cast<double>(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - static_cast<double>(k) * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

/// First and second derivative of f at t from a 7-point stencil of spacing h,
/// shifted to stay inside [lo, hi].
template <class F>
std::pair<double, double> derivatives(F&& f, double t, double h, double lo, double hi) {
  constexpr int half = 3;
  double start = t - half * h;
  if (start < lo) start = lo;
  if (start + 2 * half * h > hi) start = hi - 2 * half * h;
  std::array<double, 2 * half + 1> x{};
  std::array<double, 2 * half + 1> y{};
  for (int j = 0; j <= 2 * half; ++j) {
    x[j] = start + j * h;
    y[j] = f(x[j]);
  }
  const auto w = fornberg_weights<2>(t, x);
  double d1 = 0.0;
  double d2 = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    d1 += w[1][j] * y[j];
    d2 += w[2][j] * y[j];
  }
  return {d1, d2};
}

}  // namespace diff

/// phi_p(z) = |z|^{p-2} z
inline double phi(double z, double p) noexcept {
  if (z == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(z), p - 1.0), z);
}

}  // namespace fermi
