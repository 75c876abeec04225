#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "thinhom/errors.hpp"
#include "thinhom/geometry.hpp"

using namespace thinhom;

namespace {

BoundaryProfile comb12() { return BoundaryProfile::comb(1.0, 2.0, 2.0); }

std::vector<BoundaryProfile> all_kinds() {
  return {
      BoundaryProfile::constant(2.0),
      BoundaryProfile::piecewise_constant(2.0, {0.0, 0.5, 1.2}, {1.0, 3.0, 2.0}),
      BoundaryProfile::piecewise_linear(1.0, {0.0, 0.4}, {1.0, 2.0, 2.5, 1.5}),
      BoundaryProfile::cosine(2.0, 0.7, 1.5),
      BoundaryProfile::tabulated(1.0, {0.0, 0.25, 0.6}, {1.0, 1.8, 1.2}),
  };
}

}  // namespace

TEST(Profile, ConstantEvaluates) { EXPECT_EQ(BoundaryProfile::constant(2.0)(0.37), 2.0); }

TEST(Profile, CombPeriodicExtension) { EXPECT_EQ(comb12()(2.5), 1.0); }

TEST(Profile, CombJumpTakesMinimum) {
  const auto g = comb12();
  EXPECT_EQ(g(1.0), 1.0);
  EXPECT_EQ(g(0.0), 1.0);
  EXPECT_EQ(g(2.0), 1.0);
  EXPECT_EQ(g.left_limit(1.0), 1.0);
  EXPECT_EQ(g.right_limit(1.0), 2.0);
}

TEST(Profile, LowerSemicontinuousAtEveryJump) {
  for (const auto& g : all_kinds())
    for (double b : g.jump_points())
      EXPECT_EQ(g(b), std::min(g.left_limit(b), g.right_limit(b))) << g.describe() << " at " << b;
}

TEST(Profile, BoundsHoldOnRandomSamples) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  for (const auto& g : all_kinds()) {
    EXPECT_GT(g.g0(), 0.0);
    for (int i = 0; i < 1000; ++i) {
      const double v = g(dist(rng));
      EXPECT_LE(g.g0(), v);
      EXPECT_LE(v, g.g1());
    }
    for (double b : g.breakpoints()) {
      EXPECT_LE(g.g0(), g(b));
      EXPECT_LE(g(b), g.g1());
    }
  }
}

TEST(Profile, PeriodicityIsExact) {
  // dyadic samples keep y + L exact, so any difference would come from the wrap itself
  for (const auto& g : all_kinds())
    for (double y : {0.0, 0.125, 0.375, 0.5, 0.8125})
      EXPECT_EQ(g(y + g.period()), g(y)) << g.describe();
}

TEST(Profile, InvalidInputsRejected) {
  EXPECT_THROW(BoundaryProfile::constant(0.0), Error);
  EXPECT_THROW(BoundaryProfile::constant(1.0, -1.0), Error);
  EXPECT_THROW(BoundaryProfile::piecewise_constant(1.0, {0.2, 0.5}, {1.0, 2.0}), Error);
  EXPECT_THROW(BoundaryProfile::cosine(1.0, 1.0), Error);
}

TEST(Mean, CombIdentity) { EXPECT_DOUBLE_EQ(comb12().mean(), 1.5); }

TEST(Mean, CosineIdentity) { EXPECT_NEAR(BoundaryProfile::cosine(2.0, 1.0, 3.0).mean(), 2.0, 1e-12); }

TEST(Mean, CombInverseSquareRoot) {
  const double exact = (1.0 + 1.0 / std::sqrt(2.0)) / 2.0;
  EXPECT_NEAR(comb12().mean([](double g) { return std::pow(g, -0.5); }), exact, 1e-15);
}

TEST(Mean, ConstantIsExact) {
  for (double c : {0.3, 1.0, 7.25}) EXPECT_EQ(BoundaryProfile::constant(c, 1.7).mean(), c);
}

TEST(Mean, PiecewiseLinearSquareMatchesClosedForm) {
  // g rises linearly from 1 to 3 over the period: mean of g^2 is (3^3 - 1) / (3 * 2)
  const auto g = BoundaryProfile::piecewise_linear(1.0, {0.0}, {1.0, 3.0});
  EXPECT_NEAR(g.mean([](double t) { return t * t; }), 26.0 / 6.0, 1e-12);
}

TEST(Mean, CosineReciprocalMatchesClosedForm) {
  // <1/(a + b cos)> = 1/sqrt(a^2 - b^2)
  const auto g = BoundaryProfile::cosine(2.0, 1.0, 1.0);
  EXPECT_NEAR(g.mean([](double t) { return 1.0 / t; }), 1.0 / std::sqrt(3.0), 1e-12);
}

TEST(Exponent, Conjugate) {
  for (double p : {1.1, 1.5, 2.0, 3.0, 4.0, 10.0}) {
    const PLaplaceExponent e(p);
    EXPECT_NEAR(1.0 / p + 1.0 / e.p_conj(), 1.0, 1e-15);
    EXPECT_NEAR((e.p_conj() - 1.0) * (p - 1.0), 1.0, 1e-14);
  }
  EXPECT_THROW(PLaplaceExponent(1.0), Error);
  EXPECT_THROW(PLaplaceExponent(0.5), Error);
}

TEST(ThinDomain, RegimeClassification) {
  const auto g = comb12();
  EXPECT_EQ(ThinDomainSpec(0.1, 0.5, g).regime(), Regime::weak);
  EXPECT_EQ(ThinDomainSpec(0.1, 1.0, g).regime(), Regime::resonant);
  EXPECT_EQ(ThinDomainSpec(0.1, 2.0, g).regime(), Regime::strong);
  EXPECT_THROW(ThinDomainSpec(1.0, 1.0, g), Error);
  EXPECT_THROW(ThinDomainSpec(0.1, 0.0, g), Error);
}

TEST(Partition, TenExactCells) {
  const auto part = partition(ThinDomainSpec(0.1, 1.0, BoundaryProfile::constant(1.0)));
  EXPECT_EQ(part.n_cells, 10);
  EXPECT_TRUE(part.lambda_empty);
}

TEST(Partition, RemainderCell) {
  const auto part = partition(ThinDomainSpec(0.15, 1.0, BoundaryProfile::constant(1.0)));
  EXPECT_EQ(part.n_cells, 6);  // N_eps = 5
  EXPECT_FALSE(part.lambda_empty);
  EXPECT_NEAR(part.lambda_start, 0.9, 1e-15);
}

TEST(Partition, StrongRegimeExact) {
  const auto part = partition(ThinDomainSpec(0.25, 2.0, comb12()));
  EXPECT_DOUBLE_EQ(part.cell_length, 0.125);
  EXPECT_EQ(part.n_cells, 8);  // N_eps = 7
  EXPECT_TRUE(part.lambda_empty);
}

TEST(Partition, CellsAndRemainderTileTheInterval) {
  for (double eps : {0.3, 0.17, 0.1, 0.07, 0.033})
    for (double alpha : {0.5, 1.0, 1.5, 2.0}) {
      const auto part = partition(ThinDomainSpec(eps, alpha, comb12()));
      const double largest = part.cell_length * part.n_cells;
      EXPECT_LE(largest, 1.0 + 1e-15);
      EXPECT_GT(part.cell_length * (part.n_cells + 1), 1.0);
      double covered = 0.0;
      for (std::size_t k = 0; k < part.cell_origins.size(); ++k) {
        EXPECT_NEAR(part.cell_origins[k], static_cast<double>(k) * part.cell_length, 1e-15);
        covered += part.cell_length;
      }
      EXPECT_NEAR(covered + (1.0 - part.lambda_start), 1.0, 1e-14);
    }
}

TEST(CellGeometry, Areas) {
  const auto g = comb12();
  EXPECT_DOUBLE_EQ((CellGeometry{CellDomain::basic, g}.area()), 3.0);
  EXPECT_DOUBLE_EQ((CellGeometry{CellDomain::upper, g}.area()), 1.0);
  EXPECT_DOUBLE_EQ((CellGeometry{CellDomain::lower_rect, g}.area()), 1.0);
  EXPECT_DOUBLE_EQ((CellGeometry{CellDomain::upper_rect, g}.area()), 1.0);
}
