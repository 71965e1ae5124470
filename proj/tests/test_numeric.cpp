#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lmt/numeric.hpp"

using namespace lmt::numeric;

TEST(Quadrature, SimpsonPolynomialAndExp) {
  EXPECT_NEAR(adaptive_simpson([](double x) { return x * x * x; }, 0.0, 2.0, 1e-14), 4.0, 1e-13);
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0, 1e-13), std::exp(1.0) - 1.0, 1e-12);
  EXPECT_EQ(adaptive_simpson([](double) { return 1.0; }, 1.0, 1.0, 1e-12), 0.0);
}

TEST(Quadrature, GaussLegendreExactness) {
  const auto r = gauss_legendre(10);
  double wsum = 0.0;
  for (double w : r.weights) wsum += w;
  EXPECT_NEAR(wsum, 2.0, 1e-14);
  // exact for degree 2n-1 = 19
  EXPECT_NEAR(gauss_composite([](double x) { return std::pow(x, 18); }, -1.0, 1.0, 1, r), 2.0 / 19.0, 1e-14);
  EXPECT_NEAR(gauss_composite([](double x) { return std::sin(x); }, 0.0, M_PI, 4, r), 2.0, 1e-13);
}

TEST(Optimize, GoldenSection) {
  const double x = golden_section_max([](double x) { return -(x - 1.3) * (x - 1.3); }, 0.0, 3.0, 1e-8);
  EXPECT_NEAR(x, 1.3, 1e-7);
  EXPECT_NEAR(golden_section_min([](double x) { return std::cosh(x - 0.4); }, -2.0, 2.0, 1e-8), 0.4, 1e-7);
}

TEST(Roots, BisectSecant) {
  const double r = bisect_secant([](double x) { return x * x - 2.0; }, 0.0, 2.0, 1e-15, 1e-15);
  EXPECT_NEAR(r, std::sqrt(2.0), 1e-13);
  EXPECT_ANY_THROW(bisect_secant([](double x) { return x * x + 1.0; }, 0.0, 2.0, 1e-15, 1e-15));
}

TEST(Assignment, HungarianMatchesBruteForce) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5;
    std::vector<std::vector<double>> c(n, std::vector<double>(n));
    for (auto& row : c)
      for (auto& v : row) v = u(rng);
    const auto a = hungarian(c);
    double got = 0.0;
    for (int i = 0; i < n; ++i) got += c[i][a[i]];
    std::vector<int> p{0, 1, 2, 3, 4};
    double best = 1e300;
    do {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += c[i][p[i]];
      best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    EXPECT_NEAR(got, best, 1e-12);
  }
}

TEST(Interpolation, PchipReproducesLinesAndStaysMonotone) {
  Pchip p({0.0, 1.0, 2.0, 3.0}, {1.0, 3.0, 5.0, 7.0});
  EXPECT_NEAR(p(1.5), 4.0, 1e-14);
  Pchip q({0.0, 1.0, 2.0, 3.0, 4.0}, {0.0, 0.0, 1.0, 1.0, 1.0});
  double prev = -1.0;
  for (int i = 0; i <= 400; ++i) {
    const double v = q(i / 100.0);
    EXPECT_GE(v, prev - 1e-15);
    EXPECT_LE(v, 1.0 + 1e-15);
    prev = v;
  }
  EXPECT_THROW(Pchip({0.0, 0.0}, {1.0, 2.0}), lmt::PreconditionError);
}

TEST(Interpolation, Linear) {
  const std::vector<double> x{0.0, 1.0, 3.0}, y{0.0, 2.0, 0.0};
  EXPECT_NEAR(linear_interp(x, y, 2.0), 1.0, 1e-15);
  EXPECT_NEAR(linear_interp(x, y, 0.5), 1.0, 1e-15);
}

TEST(Wrap, Ranges) {
  EXPECT_NEAR(wrap(7.5, 2.0), 1.5, 1e-15);
  EXPECT_NEAR(wrap(-0.5, 2.0), 1.5, 1e-15);
  EXPECT_NEAR(wrap_signed(1.9, 2.0), -0.1, 1e-15);
  EXPECT_NEAR(wrap_signed(-0.3, 2.0), -0.3, 1e-15);
}
