#include <gtest/gtest.h>

#include <numeric>

#include "homnet/depgraph.hpp"
#include "homnet/error.hpp"
#include "homnet/rng.hpp"

using namespace homnet;

namespace {

Matrix gaussian(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) x(i, j) = rng.normal();
  return x;
}

}  // namespace

TEST(Marginal, CopiedAndNegatedColumns) {
  Matrix x = gaussian(100, 4, 1);
  x.col(1) = x.col(0);
  x.col(2) = -3.0 * x.col(0);
  const auto m = marginal_dependency(x);
  EXPECT_NEAR(m(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(m(0, 2), 1.0, 1e-12);
  EXPECT_NEAR(m(1, 2), 1.0, 1e-12);
}

TEST(Marginal, SymmetricUnitDiagonalInRange) {
  const auto m = marginal_dependency(gaussian(50, 7, 3));
  for (int i = 0; i < 7; ++i) {
    EXPECT_EQ(m(i, i), 1.0);
    for (int j = 0; j < 7; ++j) {
      EXPECT_NEAR(m(i, j), m(j, i), 1e-12);
      EXPECT_GE(m(i, j), 0.0);
      EXPECT_LE(m(i, j), 1.0);
    }
  }
}

TEST(Marginal, ConstantColumnIsIndependent) {
  Matrix x = gaussian(30, 3, 5);
  x.col(1).setConstant(2.5);
  const auto m = marginal_dependency(x);
  EXPECT_EQ(m(0, 1), 0.0);
  EXPECT_EQ(m(1, 2), 0.0);
  EXPECT_EQ(m(1, 1), 1.0);
}

// Under independence n r^2 is approximately chi-square with one degree of
// freedom, so r^2 < 0.01 at n = 10000 fails with probability ~1e-23.
TEST(Marginal, IndependentColumnsHaveSmallDependence) {
  int below = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    if (marginal_dependency(gaussian(10000, 2, seed))(0, 1) < 0.01) ++below;
  EXPECT_EQ(below, 20);
}

TEST(Marginal, ScaleInvariance) {
  const Matrix x = gaussian(80, 5, 7);
  Matrix y = x;
  y.col(0) *= 1e3;
  y.col(3) *= -0.02;
  const auto a = marginal_dependency(x), b = marginal_dependency(y);
  EXPECT_LE((a.values - b.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Marginal, PermutationEquivariance) {
  Matrix x = gaussian(60, 5, 8);
  x.col(2) += 0.7 * x.col(0);
  const std::vector<int> perm = {3, 0, 4, 2, 1};
  Matrix y(60, 5);
  for (int j = 0; j < 5; ++j) y.col(j) = x.col(perm[static_cast<std::size_t>(j)]);
  const auto a = marginal_dependency(x), b = marginal_dependency(y);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      EXPECT_NEAR(b(i, j), a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]), 1e-12);
}

TEST(MedianSplit, EvenHalvesForDistinctTargets) {
  const Matrix x = gaussian(100, 3, 2);
  const Vector y = Vector::LinSpaced(100, 0, 99);
  const auto ms = median_split_dependency(x, y);
  EXPECT_EQ(ms.low_rows, 50);
  EXPECT_EQ(ms.high_rows, 50);
}

TEST(MedianSplit, TiesGoLow) {
  const Matrix x = gaussian(7, 2, 2);
  Vector y(7);
  y << 1, 2, 2, 2, 2, 3, 4;
  const auto ms = median_split_dependency(x, y);
  EXPECT_EQ(ms.low_rows, 5);
  EXPECT_EQ(ms.high_rows, 2);
}

TEST(MedianSplit, IdenticalHalvesAgree) {
  const Matrix half = gaussian(40, 4, 9);
  Matrix x(80, 4);
  x << half, half;
  Vector y(80);
  y << Vector::LinSpaced(40, 0, 39), Vector::LinSpaced(40, 100, 139);
  const auto ms = median_split_dependency(x, y);
  EXPECT_LE((ms.low.values - ms.high.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MedianSplit, PlantedHighRegimeCorrelation) {
  Matrix x = gaussian(2000, 3, 4);
  Vector y = Vector::LinSpaced(2000, 0, 1);
  for (int i = 1000; i < 2000; ++i) x(i, 1) = x(i, 0) + 0.1 * x(i, 1);
  const auto ms = median_split_dependency(x, y);
  EXPECT_GT(ms.high(0, 1), 0.9);
  EXPECT_LT(ms.low(0, 1), 0.05);
}

TEST(MedianSplit, TooFewRowsInAHalf) {
  const Matrix x = gaussian(4, 2, 1);
  Vector y(4);
  y << 1, 1, 1, 2;
  EXPECT_THROW(median_split_dependency(x, y), ConfigError);
}

TEST(Median, OddAndEven) {
  Vector a(3), b(4);
  a << 3, 1, 2;
  b << 4, 1, 3, 2;
  EXPECT_EQ(empirical_median(a), 2.0);
  EXPECT_EQ(empirical_median(b), 2.5);
}
