#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <boost/numeric/odeint.hpp>
#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fermi/analysis.hpp"
#include "fermi/eig2d.hpp"

namespace e = fermi::eig2d;
namespace g = fermi::geometry;
using fermi::ErrorCode;
using std::numbers::pi;

namespace {

g::FermiDomain constant_domain(double L, double k, double delta) {
  return g::make_domain(L, [k](double) { return k; }, [delta](double) { return delta; });
}

g::FermiDomain wavy_domain() {
  const double L = 2.5;
  return g::make_domain(L, [=](double s) { return -0.3 + 0.2 * std::cos(2 * pi * s / L); },
                        [=](double s) { return 0.35 + 0.1 * std::sin(pi * s / L); });
}

double linear_mu(const g::FermiDomain& d, std::size_t ns, std::size_t nt) {
  return e::solve_mu1_linear(e::build_mesh(d, ns, nt)).mu;
}

double odd_mu(const g::FermiDomain& d, std::size_t ns, std::size_t nt) {
  return e::solve_mu1_odd_linear(e::build_mesh(d, ns, nt, e::Extent::half)).mu;
}

// Lowest eigenvalue of -(rho R')'/rho + nu^2 R / rho^2 = mu R on [a, b] with
// R'(a) = R'(b) = 0, by fixed-step RK4 shooting and bisection on the flux at b.
double radial_oracle(double a, double b, double nu, double lo, double hi) {
  using State = std::array<double, 2>;  // R, rho R'
  auto flux_at_end = [&](double mu) {
    State x{1.0, 0.0};
    auto rhs = [&](const State& y, State& dy, double rho) {
      dy[0] = y[1] / rho;
      dy[1] = (nu * nu / rho - mu * rho) * y[0];
    };
    boost::numeric::odeint::runge_kutta4<State> stepper;
    boost::numeric::odeint::integrate_const(stepper, rhs, x, a, b, (b - a) / 20000.0);
    return x[1];
  };
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (flux_at_end(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Mesh, RectangleMetricIsDiagonal) {
  const double L = pi, delta = 0.4;
  const std::size_t ns = 16, nt = 4;
  const auto m = e::build_mesh(constant_domain(L, 0.0, delta), ns, nt);
  EXPECT_EQ(m.node_count(), (ns + 1) * (nt + 1));
  EXPECT_EQ(m.nodes.size(), m.node_count());
  for (const auto& q : m.qp) {
    EXPECT_EQ(q.a12, 0.0);
    EXPECT_DOUBLE_EQ(q.a11, 1.0);
    EXPECT_DOUBLE_EQ(q.a22, 1.0 / delta);
    EXPECT_DOUBLE_EQ(q.fermi_factor, 1.0);
  }
  for (std::size_t c = 0; c < m.qp.size(); c += 4) {
    double area = 0.0;
    for (std::size_t k = 0; k < 4; ++k) area += m.qp[c + k].weight;
    EXPECT_NEAR(area, (L / ns) * (delta / nt), 1e-15);
  }
}

TEST(Mesh, AnnularSectorMass) {
  const auto m = e::build_mesh(constant_domain(pi, -0.5, 0.5), 64, 8);
  EXPECT_NEAR(m.total_mass(), pi * 0.4375, 1e-12);
  EXPECT_GT(m.det_min, 0.0);
}

TEST(Mesh, VariableWidthHasCrossTerms) {
  const auto m = e::build_mesh(wavy_domain(), 32, 4);
  double worst = 0.0;
  for (const auto& q : m.qp) worst = std::max(worst, std::abs(q.a12));
  EXPECT_GT(worst, 1e-3);
}

TEST(Mesh, Errors) {
  auto d = constant_domain(pi, -1.0, 1.2);
  ASSERT_FALSE(d.valid);
  try {
    e::build_mesh(d, 16, 4);
    ADD_FAILURE();
  } catch (const fermi::Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::InvalidDomain);
  }
  d.valid = true;  // force past validation to reach the cell check
  try {
    e::build_mesh(d, 16, 4);
    ADD_FAILURE();
  } catch (const fermi::Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::DegenerateCell);
  }
  EXPECT_THROW(e::build_mesh(constant_domain(pi, 0.0, 0.4), 15, 4, e::Extent::half), fermi::Error);
}

TEST(Mesh, MatchesPhysicalCoordinateAssembly) {
  const double L = pi, delta = 0.4;
  const auto m = e::build_mesh(constant_domain(L, 0.0, delta), 12, 3);
  const auto A = e::assemble(m);
  const Eigen::MatrixXd K = Eigen::MatrixXd(A.K), M = Eigen::MatrixXd(A.M);

  // isoparametric bilinear elements built from the physical node positions
  const int n = static_cast<int>(m.node_count());
  Eigen::MatrixXd Kp = Eigen::MatrixXd::Zero(n, n), Mp = Eigen::MatrixXd::Zero(n, n);
  const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  for (std::size_t i = 0; i < m.ns; ++i) {
    for (std::size_t j = 0; j < m.nt; ++j) {
      const int nd[4] = {m.index(i, j), m.index(i + 1, j), m.index(i, j + 1), m.index(i + 1, j + 1)};
      for (double xi : gp) {
        for (double eta : gp) {
          const double N[4] = {(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta};
          const double dxi[4] = {-(1 - eta), 1 - eta, -eta, eta};
          const double deta[4] = {-(1 - xi), -xi, 1 - xi, xi};
          Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
          for (int c = 0; c < 4; ++c) {
            J(0, 0) += dxi[c] * m.nodes[nd[c]].x();
            J(0, 1) += dxi[c] * m.nodes[nd[c]].y();
            J(1, 0) += deta[c] * m.nodes[nd[c]].x();
            J(1, 1) += deta[c] * m.nodes[nd[c]].y();
          }
          const double w = 0.25 * std::abs(J.determinant());
          const Eigen::Matrix2d Jinv = J.inverse();
          Eigen::Vector2d grad[4];
          for (int c = 0; c < 4; ++c) grad[c] = Jinv * Eigen::Vector2d(dxi[c], deta[c]);
          for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
              Kp(nd[a], nd[b]) += w * grad[a].dot(grad[b]);
              Mp(nd[a], nd[b]) += w * N[a] * N[b];
            }
          }
        }
      }
    }
  }
  EXPECT_LT((K - Kp).cwiseAbs().maxCoeff(), 1e-12 * K.cwiseAbs().maxCoeff());
  EXPECT_LT((M - Mp).cwiseAbs().maxCoeff(), 1e-12 * M.cwiseAbs().maxCoeff());
}

TEST(Mesh, ConstantsAreInTheKernel) {
  const auto A = e::assemble(e::build_mesh(wavy_domain(), 32, 6));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(A.K.rows());
  EXPECT_LT((A.K * ones).cwiseAbs().maxCoeff(), 1e-12 * Eigen::MatrixXd(A.K).cwiseAbs().maxCoeff());
  std::mt19937 rng(7);
  std::normal_distribution<double> gauss;
  const Eigen::VectorXd m1 = A.M * ones;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x(A.K.rows());
    for (auto& v : x) v = gauss(rng);
    x.array() -= m1.dot(x) / m1.sum();
    EXPECT_GT(x.dot(A.K * x), 0.0);
  }
}

TEST(Linear, RectangleFirstMode) {
  const auto d = constant_domain(pi, 0.0, 0.4);
  const auto r = e::solve_mu1_linear(e::build_mesh(d, 256, 16));
  EXPECT_NEAR(r.mu, 1.0, 1e-3);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.mode, e::Mode::full);
  EXPECT_LT(r.residual, 1e-8);
  EXPECT_NEAR(odd_mu(d, 256, 16), 1.0, 1e-3);
}

TEST(Linear, AnnularSectorAgainstRadialOracle) {
  // radius 2 arc of angle pi/2; the mapped domain is 1.5 < rho < 2 and the
  // first angular mode cos(2 theta) gives nu = 2
  const double oracle = radial_oracle(1.5, 2.0, 2.0, 0.0, 4.0);
  const double mu = linear_mu(constant_domain(pi, -0.5, 0.5), 256, 32);
  EXPECT_NEAR(mu / oracle, 1.0, 1e-3);
}

TEST(Linear, RefinementDecreasesMonotonically) {
  const auto d = wavy_domain();
  const double a = linear_mu(d, 32, 4), b = linear_mu(d, 64, 8), c = linear_mu(d, 128, 16);
  EXPECT_GT(a, b);
  EXPECT_GT(b, c);
  EXPECT_LT(b - c, a - b);
}

TEST(Linear, SquareHasDoubleEigenvalue) {
  const auto d = constant_domain(1.0, 0.0, 1.0);
  const double full = linear_mu(d, 64, 64), odd = odd_mu(d, 64, 64);
  EXPECT_NEAR(full / (pi * pi), 1.0, 1e-3);
  EXPECT_NEAR(odd / (pi * pi), 1.0, 1e-3);
  EXPECT_NEAR(full, odd, 1e-3 * full);
}

TEST(Linear, OddNotBelowFull) {
  for (const auto& d : {wavy_domain(), constant_domain(pi, -0.5, 0.5), constant_domain(2.0, 0.4, 0.6)}) {
    ASSERT_TRUE(d.valid);
    EXPECT_GE(odd_mu(d, 64, 8), linear_mu(d, 64, 8) * (1 - 1e-9));
  }
}

TEST(Linear, OddEigenfunctionVanishesOnSymmetryLine) {
  const auto m = e::build_mesh(wavy_domain(), 64, 8, e::Extent::half);
  const auto r = e::solve_mu1_odd_linear(m);
  for (int id : m.dirichlet) EXPECT_EQ(r.u[id], 0.0);
  EXPECT_GT(r.u.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Linear, WrongExtentRejected) {
  const auto d = constant_domain(pi, 0.0, 0.4);
  EXPECT_THROW(e::solve_mu1_linear(e::build_mesh(d, 16, 4, e::Extent::half)), fermi::Error);
  EXPECT_THROW(e::solve_mu1_odd_linear(e::build_mesh(d, 16, 4)), fermi::Error);
}

TEST(Nonlinear, QuadraticCaseMatchesLinear) {
  const auto d = wavy_domain();
  const auto full = e::build_mesh(d, 64, 8);
  const auto half = e::build_mesh(d, 64, 8, e::Extent::half);
  const auto nf = e::solve_mu1_nonlinear(full, 2.0, e::Mode::full);
  EXPECT_NEAR(nf.mu / e::solve_mu1_linear(full).mu, 1.0, 1e-6);
  EXPECT_TRUE(nf.estimate);
  const auto no = e::solve_mu1_nonlinear(half, 2.0, e::Mode::odd);
  EXPECT_NEAR(no.mu / e::solve_mu1_odd_linear(half).mu, 1.0, 1e-6);
}

TEST(Nonlinear, ThinRectangleApproachesOneDimensionalValue) {
  const double L = pi, p = 3.0;
  const double target = std::pow(fermi::analysis::pi_p(p) / L, p);
  const auto d = constant_domain(L, 0.0, 0.05);
  double prev = 0.0;
  for (std::size_t ns : {64u, 128u, 256u}) {
    const auto r = e::solve_mu1_nonlinear(e::build_mesh(d, ns, 4, e::Extent::half), p, e::Mode::odd);
    EXPECT_TRUE(r.converged);
    const double err = std::abs(r.mu - target) / target;
    if (prev > 0.0) EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Nonlinear, MonotoneUnderRefinement) {
  const auto d = constant_domain(pi, -0.5, 0.5);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t ns : {32u, 64u, 128u}) {
    const auto r = e::solve_mu1_nonlinear(e::build_mesh(d, ns, ns / 8), 3.0, e::Mode::full);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.mu, prev * (1 + 1e-8));
    prev = r.mu;
  }
}

TEST(Nonlinear, RejectsBadInput) {
  const auto m = e::build_mesh(constant_domain(pi, 0.0, 0.4), 16, 4);
  EXPECT_THROW(e::solve_mu1_nonlinear(m, 1.0, e::Mode::full), fermi::Error);
  EXPECT_THROW(e::solve_mu1_nonlinear(m, 3.0, e::Mode::odd), fermi::Error);
}

TEST(Sandwich, BoundsEncloseNumericValues) {
  const auto d = constant_domain(pi, -0.5, 0.5);
  for (double p : {1.5, 2.0, 3.0}) {
    const auto full = e::build_mesh(d, 128, 16);
    const auto half = e::build_mesh(d, 128, 16, e::Extent::half);
    const auto rf = p == 2.0 ? e::solve_mu1_linear(full) : e::solve_mu1_nonlinear(full, p, e::Mode::full);
    const auto ro = p == 2.0 ? e::solve_mu1_odd_linear(half) : e::solve_mu1_nonlinear(half, p, e::Mode::odd);
    EXPECT_TRUE(rf.converged && ro.converged) << p;
    const auto lower = fermi::analysis::lower_bound_constant_width(d, p);
    ASSERT_TRUE(lower.applicable);
    EXPECT_LE(lower.value, ro.mu) << p;
    EXPECT_GE(fermi::analysis::test_function_upper_bound(d, p), rf.mu) << p;
  }
}

TEST(Scaling, DilationLaw) {
  const auto d = wavy_domain();
  for (double c : {0.5, 2.0}) {
    const auto big = g::dilate(d, c);
    EXPECT_NEAR(linear_mu(big, 64, 8) / linear_mu(d, 64, 8), std::pow(c, -2.0), 1e-8);
    const auto r3 = e::solve_mu1_nonlinear(e::build_mesh(d, 64, 8), 3.0, e::Mode::full).mu;
    const auto b3 = e::solve_mu1_nonlinear(e::build_mesh(big, 64, 8), 3.0, e::Mode::full).mu;
    EXPECT_NEAR(b3 / r3 / std::pow(c, -3.0), 1.0, 1e-3);
  }
}
