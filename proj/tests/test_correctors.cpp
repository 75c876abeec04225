#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "thinhom/correctors.hpp"
#include "thinhom/errors.hpp"
#include "thinhom/homogenization.hpp"

using namespace thinhom;

namespace {

BoundaryProfile comb12() { return BoundaryProfile::comb(1.0, 2.0, 2.0); }

FemFunction1D cosine_1d(int n = 256) {
  FemFunction1D u{mesh_interval(n), {}};
  for (double x : u.mesh.nodes) u.values.push_back(std::cos(M_PI * x));
  return u;
}

std::shared_ptr<const TriangleMesh> thin_mesh(const ThinDomainSpec& spec, double cell_h = 0.25) {
  return std::make_shared<const TriangleMesh>(mesh_thin_domain(spec, cell_h * std::pow(spec.epsilon, spec.alpha)));
}

// Random points of R^eps by rejection against the profile.
std::vector<Point> sample_points(const ThinDomainSpec& spec, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uy(0.0, spec.epsilon * spec.profile.g1());
  std::vector<Point> points;
  while (static_cast<int>(points.size()) < count) {
    const Point pt{ux(rng), uy(rng)};
    if (pt.y < spec.height(pt.x)) points.push_back(pt);
  }
  return points;
}

// Brute-force containing element: the triangle whose barycentric coordinates are all >= -tol.
std::size_t brute_locate(const TriangleMesh& mesh, const Point& pt) {
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto& v = mesh.elements[e];
    const Point& a = mesh.nodes[static_cast<std::size_t>(v[0])];
    const Point& b = mesh.nodes[static_cast<std::size_t>(v[1])];
    const Point& c = mesh.nodes[static_cast<std::size_t>(v[2])];
    const double d = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    const double l1 = ((pt.x - a.x) * (c.y - a.y) - (pt.y - a.y) * (c.x - a.x)) / d;
    const double l2 = ((b.x - a.x) * (pt.y - a.y) - (b.y - a.y) * (pt.x - a.x)) / d;
    if (l1 >= -1e-12 && l2 >= -1e-12 && 1.0 - l1 - l2 >= -1e-12) return e;
  }
  return mesh.n_elements();
}

}  // namespace

TEST(Corrector, ConstantProfileResonant) {
  const auto g = BoundaryProfile::constant(1.0);
  const ThinDomainSpec spec(0.1, 1.0, g);
  const auto cell = std::make_shared<const CellSolution>(q_resonant(g, PLaplaceExponent(3.0), 0.125, {}));
  const auto u = cosine_1d();
  const CorrectorField W(spec, PLaplaceExponent(3.0), u, cell);
  for (const Point& pt : sample_points(spec, 200, 1)) {
    const Vec2 w = W(pt.x, pt.y);
    EXPECT_NEAR(w[0], u.derivative(pt.x), 1e-7);
    EXPECT_NEAR(w[1], 0.0, 1e-7);
  }
}

TEST(Corrector, WeakRegimeComb) {
  const ThinDomainSpec spec(0.1, 0.5, comb12());
  const auto u = cosine_1d();
  const CorrectorField W(spec, PLaplaceExponent(2.0), u);
  const double ea = std::sqrt(0.1);
  for (const Point& pt : sample_points(spec, 1000, 2)) {
    const double y1 = std::fmod(pt.x / ea, 2.0);
    const double g = y1 <= 1.0 ? 1.0 : 2.0;
    const Vec2 w = W(pt.x, pt.y);
    EXPECT_NEAR(w[0], u.derivative(pt.x) / (0.75 * g), 1e-13);
    EXPECT_EQ(w[1], 0.0);
  }
}

TEST(Corrector, WeakRegimeGeneralExponent) {
  // <g^-(p'-1)> for p = 3 on the comb is (1 + 2^(-1/2)) / 2
  const ThinDomainSpec spec(0.05, 0.5, comb12());
  const auto u = cosine_1d();
  const CorrectorField W(spec, PLaplaceExponent(3.0), u);
  const double mean = (1.0 + 1.0 / std::sqrt(2.0)) / 2.0;
  const double ea = std::sqrt(0.05);
  for (const Point& pt : sample_points(spec, 1000, 3)) {
    const double g = std::fmod(pt.x / ea, 2.0) <= 1.0 ? 1.0 : 2.0;
    EXPECT_NEAR(W(pt.x, pt.y)[0], u.derivative(pt.x) / (std::sqrt(g) * mean), 1e-12);
  }
}

TEST(Corrector, StrongRegimeSplit) {
  const ThinDomainSpec spec(0.1, 2.0, comb12());
  const auto u = cosine_1d();
  const CorrectorField W(spec, PLaplaceExponent(1.5), u);
  for (const Point& pt : sample_points(spec, 1000, 4)) {
    const Vec2 w = W(pt.x, pt.y);
    if (pt.y < 0.1) {
      EXPECT_EQ(w[0], u.derivative(pt.x));
    } else {
      EXPECT_EQ(w[0], 0.0);
    }
    EXPECT_EQ(w[1], 0.0);
  }
}

TEST(Corrector, ResonantMatchesCellGradient) {
  const auto g = comb12();
  const ThinDomainSpec spec(0.1, 1.0, g);
  const auto cell = std::make_shared<const CellSolution>(q_resonant(g, PLaplaceExponent(2.0), 0.25, {}));
  const auto u = cosine_1d();
  const CorrectorField W(spec, PLaplaceExponent(2.0), u, cell);
  const TriangleMesh& cm = *cell->w.mesh;
  for (const Point& pt : sample_points(spec, 300, 5)) {
    const Point fast{std::fmod(pt.x / 0.1, 2.0), pt.y / 0.1};
    const std::size_t e = brute_locate(cm, fast);
    ASSERT_LT(e, cm.n_elements());
    const Vec2 gv = cell->w.gradient(e);
    const double du = u.derivative(pt.x);
    const Vec2 w = W(pt.x, pt.y);
    EXPECT_NEAR(w[0], du * (1.0 + gv[0]), 1e-12);
    EXPECT_NEAR(w[1], du * gv[1], 1e-12);
  }
}

TEST(Corrector, ResonantNeedsCell) {
  const ThinDomainSpec spec(0.1, 1.0, comb12());
  try {
    CorrectorField W(spec, PLaplaceExponent(2.0), cosine_1d());
    FAIL() << "expected missing-cell-solution";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_cell_solution);
  }
}

TEST(Averaging, ConstantLinearAndHeight) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const ThinDomainSpec spec(0.1, alpha, comb12());
    const auto mesh = thin_mesh(spec);
    const auto c = average_V(spec, FemFunction::interpolate(mesh, [](double, double) { return 1.25; }));
    const auto x = average_V(spec, FemFunction::interpolate(mesh, [](double px, double) { return px; }));
    const auto y = average_V(spec, FemFunction::interpolate(mesh, [](double, double py) { return py; }));
    for (double s : {0.0, 0.013, 0.25, 0.5, 0.731, 1.0}) {
      EXPECT_NEAR(c(s), 1.25, 1e-13);
      EXPECT_NEAR(x(s), s, 1e-13);
      EXPECT_NEAR(y(s), 0.1 / 2.0, 1e-14);
    }
  }
}

TEST(Metrics, SyntheticExactInput) {
  const ThinDomainSpec spec(0.1, 1.0, comb12());
  const auto mesh = thin_mesh(spec);
  const auto lin = [](double x) { return 1.0 + 0.5 * x; };
  const FemFunction u_eps = FemFunction::interpolate(mesh, [&](double x, double) { return lin(x); });
  FemFunction1D u{mesh_interval(8), {}};
  for (double x : u.mesh.nodes) u.values.push_back(lin(x));
  const CorrectorField W(spec, PLaplaceExponent(2.0), u,
                         std::make_shared<const CellSolution>(q_resonant(comb12(), PLaplaceExponent(2.0), 0.25, {})));
  const auto m = error_metrics(spec, u_eps, u, W, PLaplaceExponent(2.0));
  EXPECT_LT(m.lp_error, 1e-14);
  EXPECT_LT(m.v_avg_error, 1e-14);
  EXPECT_GE(m.corrector_error, 0.0);
  EXPECT_FALSE(m.grad_rminus_error.has_value());
  EXPECT_GT(m.w1p_norm, 0.0);
}

TEST(Metrics, StrongRegimeSplitsPresent) {
  const ThinDomainSpec spec(0.1, 2.0, comb12());
  const auto mesh = thin_mesh(spec);
  const FemFunction u_eps = FemFunction::interpolate(mesh, [](double x, double) { return x; });
  FemFunction1D u{mesh_interval(8), {}};
  for (double x : u.mesh.nodes) u.values.push_back(x);
  const CorrectorField W(spec, PLaplaceExponent(2.0), u);
  const auto m = error_metrics(spec, u_eps, u, W, PLaplaceExponent(2.0));
  ASSERT_TRUE(m.grad_rminus_error.has_value());
  ASSERT_TRUE(m.grad_rplus_norm.has_value());
  EXPECT_LT(*m.grad_rminus_error, 1e-13);
  // grad u_eps = (1, 0) on R+ whose area is 0.05: |||.||| = (0.05 / 0.1)^(1/2)
  EXPECT_NEAR(*m.grad_rplus_norm, std::sqrt(0.5), 1e-13);
  EXPECT_NEAR(m.corrector_error, std::sqrt(0.5), 1e-13);
}

TEST(Metrics, ConstantProfileCorrectorErrorDecreases) {
  const auto g = BoundaryProfile::constant(1.0);
  const PLaplaceExponent exponent(2.0);
  const auto f = Forcing::x_only([](double x) { return std::cos(M_PI * x); });
  const auto cell = std::make_shared<const CellSolution>(q_resonant(g, exponent, 0.125, {}));
  const auto limit = solve_limit_1d(cell->q, exponent, f.x_function(), 4096, {});
  double previous = 1e300;
  for (double eps : {0.1, 0.05, 0.025}) {
    const ThinDomainSpec spec(eps, 1.0, g);
    const auto mesh = thin_mesh(spec, 0.125);
    const auto sol = solve_neumann(mesh, exponent, f, {});
    ASSERT_TRUE(sol.report.converged);
    const CorrectorField W(spec, exponent, limit.u, cell);
    const double err = error_metrics(spec, sol.u, limit.u, W, exponent).corrector_error;
    EXPECT_LT(err, previous);
    previous = err;
  }
}
