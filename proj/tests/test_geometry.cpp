#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fermi/geometry.hpp"

namespace g = fermi::geometry;
using fermi::ErrorCode;
using std::numbers::pi;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const fermi::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

g::FermiDomain constant_domain(double L, double k, double delta) {
  return g::make_domain(L, [k](double) { return k; }, [delta](double) { return delta; });
}

}  // namespace

TEST(Parametric, StraightSegment) {
  const auto c = g::curvature_from_parametric([](double t) { return t; }, [](double) { return 0.0; }, -1.0, 1.0);
  EXPECT_NEAR(c.length, 2.0, 1e-12);
  EXPECT_LT(c.curvature.max_abs(), 1e-9);
}

TEST(Parametric, UnitCircleArc) {
  const auto c = g::curvature_from_parametric([](double t) { return std::sin(t); }, [](double t) { return std::cos(t); },
                                              -pi / 4, pi / 4);
  EXPECT_NEAR(c.length, pi / 2, 1e-12);
  for (double k : c.curvature.values()) EXPECT_NEAR(std::abs(k), 1.0, 1e-6);
}

TEST(Parametric, ParabolaMatchesClosedForm) {
  const auto c = g::curvature_from_parametric([](double t) { return t; }, [](double t) { return t * t; }, -1.0, 1.0);
  EXPECT_NEAR(c.length, std::sqrt(5.0) + std::asinh(2.0) / 2.0, 1e-11);
  EXPECT_NEAR(c.curvature[c.size() / 2], 2.0, 1e-6);
  // points[i].x() is the parameter t at that arc length
  for (std::size_t i = 0; i < c.size(); i += 16) {
    const double t = c.points[i].x();
    EXPECT_NEAR(c.curvature[i], 2.0 / std::pow(1.0 + 4.0 * t * t, 1.5), 1e-6) << t;
  }
}

TEST(Parametric, ZeroSpeedRejected) {
  EXPECT_EQ(code_of([] {
              g::curvature_from_parametric([](double t) { return t * t * t; }, [](double t) { return t * t * t * t; },
                                           -1.0, 1.0);
            }),
            ErrorCode::ZeroSpeed);
}

TEST(Parametric, AsymmetricCurveRejected) {
  EXPECT_EQ(code_of([] {
              g::curvature_from_parametric([](double t) { return t; }, [](double t) { return t * t * t; }, -1.0, 1.0);
            }),
            ErrorCode::SymmetryViolation);
}

TEST(Reconstruct, StraightSegment) {
  const auto c = g::reconstruct_from_curvature(2.0, [](double) { return 0.0; });
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(c.points[i].x(), c.node(i) - 1.0, 1e-14);
    EXPECT_NEAR(c.points[i].y(), 0.0, 1e-14);
  }
}

TEST(Reconstruct, HalfCircleMatchesClosedForm) {
  const auto c = g::reconstruct_from_curvature(pi, [](double) { return -1.0; });
  double err = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double a = c.node(i) - pi / 2;
    err = std::max(err, std::hypot(c.points[i].x() - std::sin(a), c.points[i].y() - (std::cos(a) - 1.0)));
  }
  EXPECT_LT(err, 1e-8);
  const auto mid = c.size() / 2;
  EXPECT_NEAR(c.tangents[mid].x(), 1.0, 1e-15);
  EXPECT_NEAR(c.tangents[mid].y(), 0.0, 1e-15);
}

TEST(Reconstruct, OddCurvatureRejected) {
  EXPECT_EQ(code_of([] { g::reconstruct_from_curvature(pi, [](double s) { return 0.7 * std::cos(s); }); }),
            ErrorCode::AsymmetricCurvature);
}

TEST(Reconstruct, UnitSpeedAndSymmetry) {
  const double L = 3.0;
  const auto c = g::reconstruct_from_curvature(L, [&](double s) { return 0.5 + 0.3 * std::cos(2 * pi * s / L); });
  const auto sym = g::curve_symmetry(c);
  EXPECT_LT(sym.unit_speed, 1e-8);
  EXPECT_LT(sym.worst(), 1e-10);
  const double h = c.curvature.step();
  for (std::size_t i = 0; i + 1 < c.size(); ++i) EXPECT_NEAR((c.points[i + 1] - c.points[i]).norm(), h, 1e-8);
}

TEST(Reconstruct, RoundTripThroughParametricForm) {
  const double L = 3.0;
  auto k = [&](double s) { return 0.5 + 0.3 * std::cos(2 * pi * s / L); };
  const auto c = g::reconstruct_from_curvature(L, k);
  const auto back = g::curvature_from_parametric([&](double t) { return g::smooth_position(c, t).x(); },
                                                 [&](double t) { return g::smooth_position(c, t).y(); }, 0.0, L);
  EXPECT_NEAR(back.length, L, 1e-9);
  double err = 0.0;
  for (std::size_t i = 0; i < back.size(); ++i) err = std::max(err, std::abs(back.curvature[i] - k(back.node(i))));
  EXPECT_LT(err, 1e-6);
}

TEST(FermiMap, StraightSegment) {
  const auto d = constant_domain(2.0, 0.0, 0.5);
  const auto p = g::fermi_map(d, 1.0, 0.3);
  EXPECT_NEAR(p.x(), 0.0, 1e-15);
  EXPECT_NEAR(p.y(), -0.3, 1e-15);
}

TEST(FermiMap, ZeroOffsetReturnsStoredSamples) {
  const double L = 3.0;
  const auto d = g::make_domain(L, [&](double s) { return 0.4 * std::cos(2 * pi * s / L); }, [](double) { return 0.2; });
  for (std::size_t i = 0; i < d.samples(); i += 7) {
    const auto p = g::fermi_map(d, d.curve.node(i), 0.0);
    EXPECT_EQ(p.x(), d.curve.points[i].x());
    EXPECT_EQ(p.y(), d.curve.points[i].y());
  }
}

TEST(FermiMap, CircleOffset) {
  const auto d = constant_domain(pi, -1.0, 0.6);
  const auto p = g::fermi_map(d, pi / 2, 0.5);
  EXPECT_NEAR(p.x(), 0.0, 1e-14);
  EXPECT_NEAR(p.y(), -0.5, 1e-14);
}

TEST(FermiMap, OutsideRejected) {
  const auto d = constant_domain(2.0, 0.0, 0.5);
  EXPECT_EQ(code_of([&] { g::fermi_map(d, 1.0, 0.51); }), ErrorCode::OutOfDomain);
  EXPECT_EQ(code_of([&] { g::fermi_map(d, 2.1, 0.1); }), ErrorCode::OutOfDomain);
}

TEST(FermiMap, MirrorSymmetry) {
  const double L = 2.5;
  const auto d = g::make_domain(L, [&](double s) { return -0.3 + 0.2 * std::cos(2 * pi * s / L); },
                                [&](double s) { return 0.3 + 0.1 * std::sin(pi * s / L); });
  for (int i = 0; i <= 40; ++i) {
    const double s = L * i / 40.0;
    for (int j = 0; j <= 5; ++j) {
      const double r = d.delta(s) * j / 5.0;
      const auto a = g::fermi_map(d, s, r);
      const auto b = g::fermi_map(d, L - s, r);
      EXPECT_NEAR(a.x(), -b.x(), 1e-7);
      EXPECT_NEAR(a.y(), b.y(), 1e-7);
    }
  }
}

TEST(Validate, Rectangle) {
  const auto d = constant_domain(pi, 0.0, 0.4);
  EXPECT_TRUE(d.valid);
  EXPECT_DOUBLE_EQ(d.jacobian_min, 1.0);
  EXPECT_TRUE(d.injectivity_checked);
}

TEST(Validate, InwardCircle) {
  const auto d = constant_domain(pi, -1.0, 0.5);
  EXPECT_TRUE(d.valid);
  EXPECT_NEAR(d.jacobian_min, 0.5, 1e-14);
}

TEST(Validate, JacobianSignChange) {
  const auto d = constant_domain(pi, -1.0, 1.2);
  EXPECT_FALSE(d.valid);
  EXPECT_LE(d.jacobian_min, -0.2 + 1e-14);
}

TEST(Validate, OverlappingTurnsDetected) {
  const auto d = constant_domain(2.5 * pi, 1.0, 0.8);
  EXPECT_GT(d.jacobian_min, 0.0);
  EXPECT_FALSE(d.report.injective);
  EXPECT_FALSE(d.valid);
}

TEST(Validate, JacobianBoundHoldsOnGrid) {
  const double L = 2.0;
  const auto d = g::make_domain(L, [&](double s) { return -0.8 + 0.5 * std::cos(2 * pi * s / L); },
                                [](double) { return 0.4; });
  ASSERT_TRUE(d.valid);
  for (int i = 0; i <= 200; ++i) {
    const double s = L * i / 200.0;
    for (int j = 0; j <= 10; ++j) EXPECT_GE(1.0 + d.delta(s) * j / 10.0 * d.k(s), d.jacobian_min - 1e-12);
  }
}

TEST(Width, Validation) {
  const auto c = g::reconstruct_from_curvature(2.0, [](double) { return 0.0; });
  EXPECT_EQ(code_of([&] { g::make_width(c, [](double s) { return s - 0.5; }); }), ErrorCode::InvalidDomain);
  EXPECT_EQ(code_of([&] { g::make_width(c, [](double s) { return 1.0 + 0.1 * s; }); }), ErrorCode::SymmetryViolation);
  const auto w = g::make_width(c, [](double s) { return 1.0 + 0.25 * s * (2.0 - s); });
  EXPECT_NEAR(w.slope(0.5), 0.25, 1e-12);
}

TEST(Transform, ScaleAndDilate) {
  const double L = 2.0;
  const auto d = g::make_domain(L, [](double) { return -0.5; }, [&](double s) { return 0.4 + 0.1 * std::sin(pi * s / L); });
  const auto e = g::scale_width(d, 0.5);
  EXPECT_DOUBLE_EQ(e.delta(0.7), 0.5 * d.delta(0.7));
  const auto big = g::dilate(d, 2.0);
  EXPECT_DOUBLE_EQ(big.length(), 4.0);
  EXPECT_DOUBLE_EQ(big.k(1.4), -0.25);
  EXPECT_DOUBLE_EQ(big.delta(1.4), 2.0 * d.delta(0.7));
  EXPECT_TRUE(big.valid);
  EXPECT_NEAR(big.jacobian_min, d.jacobian_min, 1e-14);
}
