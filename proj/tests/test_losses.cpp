// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mxql/error.hpp"
#include "mxql/losses.hpp"

namespace mxql {
namespace {

constexpr double kE = std::numbers::e;

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

// Central difference in the prediction h, residual = x - h.
template <class F>
double fd_grad(F loss_of_residual, double residual, double step = 1e-6) {
  return (loss_of_residual(residual - step) - loss_of_residual(residual + step)) / (2.0 * step);
}

TEST(GumbelLoss, ClosedFormValues) {
  EXPECT_EQ(gumbel_loss(0.0, 1.0), 0.0);
  EXPECT_NEAR(gumbel_loss(1.0, 1.0), kE - 2.0, 1e-15);
  EXPECT_NEAR(gumbel_loss(-1.0, 1.0), 1.0 / kE, 1e-15);
  EXPECT_NEAR(gumbel_loss(3.0, 2.0), std::exp(1.5) - 2.5, 1e-14);
}

TEST(GumbelLoss, SmallResidualsKeepRelativeAccuracy) {
  // e^z - z - 1 ~ z^2/2 + z^3/6 + z^4/24; naive evaluation loses all digits.
  for (double z : {1e-8, -1e-8, 1e-4, -3e-3, 0.1, -0.4}) {
    long double term = z, sum = 0.0L;
    for (int j = 2; j < 40; ++j) {
      term *= static_cast<long double>(z) / j;
      sum += term;
    }
    const double series = static_cast<double>(sum);
    EXPECT_NEAR(gumbel_loss(z, 1.0), series, 1e-14 * series + 1e-300) << z;
  }
}

TEST(GumbelLoss, OverflowIsFlaggedAsInfinity) {
  EXPECT_TRUE(std::isinf(gumbel_loss(1000.0, 1.0)));
  EXPECT_GT(gumbel_loss(1000.0, 1.0), 0.0);
  EXPECT_TRUE(std::isinf(gumbel_loss_grad(1000.0, 1.0)));
  EXPECT_LT(gumbel_loss_grad(1000.0, 1.0), 0.0);
  EXPECT_NEAR(gumbel_loss(-1000.0, 1.0), 999.0, 1e-12);
}

TEST(GumbelLoss, Gradient) {
  EXPECT_EQ(gumbel_loss_grad(0.0, 1.0), 0.0);
  EXPECT_NEAR(gumbel_loss_grad(1.0, 1.0), 1.0 - kE, 1e-15);
  EXPECT_NEAR(gumbel_loss_grad(2.0, 4.0), (1.0 - std::exp(0.5)) / 4.0, 1e-15);
}

TEST(GumbelLoss, RejectsBadInput) {
  EXPECT_THROW(gumbel_loss(std::nan(""), 1.0), InputError);
  EXPECT_THROW(gumbel_loss(INFINITY, 1.0), InputError);
  EXPECT_THROW(gumbel_loss(1.0, 0.0), ConfigError);
  EXPECT_THROW(gumbel_loss_grad(1.0, -1.0), ConfigError);
}

TEST(ClippedGumbelLoss, ListedExamples) {
  const std::vector<double> zero{0.0};
  EXPECT_EQ(clipped_gumbel_loss(zero, 1.0, 7.0), 0.0);

  const std::vector<double> pair{1.0, -1.0};
  const double expected = ((1.0 - 2.0 / kE) + 1.0 / (kE * kE)) / 2.0;
  EXPECT_NEAR(clipped_gumbel_loss(pair, 1.0, 7.0), expected, 1e-15);
  EXPECT_NEAR(expected, 0.1997882, 5e-8);

  const std::vector<double> big{100.0};
  const std::vector<double> seven{7.0};
  EXPECT_EQ(clipped_gumbel_loss(big, 1.0, 7.0), clipped_gumbel_loss(seven, 1.0, 7.0));
}

TEST(ClippedGumbelLoss, SingleResidualClosedForm) {
  for (double z = -1.0; z <= 7.0; z += 0.125) {
    const std::vector<double> r{2.0 * z};
    EXPECT_NEAR(clipped_gumbel_loss(r, 2.0, 7.0), 1.0 - (z + 1.0) * std::exp(-z), 1e-14) << z;
  }
}

TEST(ClippedGumbelLoss, MaxFloorAtMinusOne) {
  // All z below -1: m is replaced by -1.
  const std::vector<double> r{-3.0, -2.0};
  const double m = -1.0;
  double expected = 0.0;
  for (double z : r) expected += std::exp(z - m) - z * std::exp(-m) - std::exp(-m);
  EXPECT_NEAR(clipped_gumbel_loss(r, 1.0, 7.0), expected / 2.0, 1e-14);
}

TEST(ClippedGumbelLoss, GradientTreatsMaxAsConstant) {
  const std::vector<double> r{0.7, -0.4, 2.5, 30.0};
  const double beta = 0.5;
  const double clip = 3.0;
  const auto grads = clipped_gumbel_loss_grads(r, beta, clip);
  ASSERT_EQ(grads.size(), r.size());
  double m = -HUGE_VAL;
  for (double x : r) m = std::max(m, std::clamp(x / beta, -clip, clip));
  m = std::max(m, -1.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto frozen = [&](double residual) {
      const double z = std::clamp(residual / beta, -clip, clip);
      return std::exp(z - m) - z * std::exp(-m) - std::exp(-m);
    };
    const double z = r[i] / beta;
    if (std::abs(z) >= clip) {
      EXPECT_EQ(grads[i], 0.0);
    } else {
      EXPECT_NEAR(grads[i], fd_grad(frozen, r[i]), 1e-7);
    }
  }
}

TEST(ClippedGumbelLoss, RejectsEmptyBatch) {
  EXPECT_THROW(clipped_gumbel_loss({}, 1.0, 7.0), InputError);
  EXPECT_THROW(clipped_gumbel_loss_grads({}, 1.0, 7.0), InputError);
}

TEST(ExpandedGumbelLoss, DirectSeries) {
  EXPECT_EQ(expanded_gumbel_loss(0.0, 3.0, 8), 0.0);
  EXPECT_EQ(expanded_gumbel_loss(1.0, 1.0, 2), 0.5);
  EXPECT_DOUBLE_EQ(expanded_gumbel_loss(1.0, 1.0, 4), 17.0 / 24.0);
  for (int n : {2, 4, 6, 10, 20}) {
    for (double z : {-3.0, -0.5, 0.25, 2.0}) {
      double direct = 0.0;
      for (int j = 2; j <= n; ++j) direct += std::pow(z, j) / factorial(j);
      EXPECT_NEAR(expanded_gumbel_loss(z, 1.0, n), direct, 1e-13 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST(ExpandedGumbelLoss, Gradient) {
  EXPECT_EQ(expanded_gumbel_loss_grad(0.0, 1.0, 8), 0.0);
  EXPECT_EQ(expanded_gumbel_loss_grad(1.0, 1.0, 2), -1.0);
  EXPECT_NEAR(expanded_gumbel_loss_grad(2.0, 2.0, 4), -(1.0 + 0.5 + 1.0 / 6.0) / 2.0, 1e-15);
}

TEST(ExpandedGumbelLoss, HighOrderMatchesGumbel) {
  for (double z = -4.0; z <= 4.0; z += 0.5)
    EXPECT_NEAR(expanded_gumbel_loss(z, 1.0, 60), gumbel_loss(z, 1.0), 1e-12 * std::max(1.0, gumbel_loss(z, 1.0)));
}

TEST(ExpandedGumbelLoss, RejectsOddOrLowOrder) {
  EXPECT_THROW(LossSpec::expanded(1.0, 3), ConfigError);
  EXPECT_THROW(LossSpec::expanded(1.0, 0), ConfigError);
  EXPECT_THROW(LossSpec::expanded(1.0, kMaxOrder + 2), ConfigError);
  EXPECT_THROW(expanded_gumbel_loss(1.0, 1.0, 5), ConfigError);
  try {
    LossSpec::expanded(1.0, 3);
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("order must be even"), std::string::npos);
  }
}

TEST(ExpectileLoss, Values) {
  EXPECT_NEAR(expectile_loss(1.0, 0.7), 0.7, 1e-16);
  EXPECT_NEAR(expectile_loss(-1.0, 0.7), 0.3, 1e-16);
  EXPECT_EQ(expectile_loss(0.0, 0.3), 0.0);
  EXPECT_NEAR(expectile_loss_grad(2.0, 0.7), -2.0 * 0.7 * 2.0, 1e-15);
  EXPECT_NEAR(expectile_loss_grad(-2.0, 0.7), 2.0 * 0.3 * 2.0, 1e-15);
  EXPECT_THROW(expectile_loss(1.0, 0.0), ConfigError);
  EXPECT_THROW(expectile_loss(1.0, 1.0), ConfigError);
  EXPECT_THROW(LossSpec::expectile(1.5), ConfigError);
}

TEST(LossSpec, FactoriesAndLabels) {
  const auto g = LossSpec::gumbel(2.0);
  EXPECT_EQ(g.variant(), LossVariant::Gumbel);
  EXPECT_EQ(g.label(), "gumbel");
  EXPECT_EQ(LossSpec::expanded(1.0, 8).label(), "expanded_n8");
  EXPECT_EQ(LossSpec::l2().order(), 2);
  EXPECT_EQ(LossSpec::expanded(1.0, 8).with_beta(3.0).beta(), 3.0);
  EXPECT_EQ(LossSpec::expectile(0.7).with_beta(3.0), LossSpec::expectile(0.7));
  EXPECT_THROW(LossSpec::gumbel(0.0), ConfigError);
  EXPECT_THROW(LossSpec::clipped_gumbel(1.0, 0.0), ConfigError);
  EXPECT_EQ(parse_loss_variant("clipped"), LossVariant::ClippedGumbel);
  EXPECT_THROW(parse_loss_variant("huber"), ConfigError);
}

TEST(LossCurve, Examples) {
  const std::vector<double> grid{-1.0, 0.0, 1.0};
  const auto l2 = loss_curve(LossSpec::l2(), grid);
  ASSERT_EQ(l2.size(), 3u);
  EXPECT_EQ(l2[0].loss, 0.5);
  EXPECT_EQ(l2[1].loss, 0.0);
  EXPECT_EQ(l2[2].loss, 0.5);
  const std::vector<double> zero{0.0};
  EXPECT_EQ(loss_curve(LossSpec::gumbel(1.0), zero)[0].loss, 0.0);
}

TEST(LossCurve, HigherOrderTracksGumbelCloser) {
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(-2.0 + 0.01 * i);
  auto deviation = [&](int n) {
    double worst = 0.0;
    const auto e = loss_curve(LossSpec::expanded(1.0, n), grid);
    const auto g = loss_curve(LossSpec::gumbel(1.0), grid);
    for (std::size_t i = 0; i < grid.size(); ++i) worst = std::max(worst, std::abs(e[i].loss - g[i].loss));
    return worst;
  };
  EXPECT_LT(deviation(8), deviation(4));
}

// ---------------------------------------------------------------------------
// Properties over generated inputs

std::vector<LossSpec> all_specs(double beta) {
  return {LossSpec::gumbel(beta), LossSpec::l2(beta), LossSpec::expanded(beta, 2), LossSpec::expanded(beta, 4),
          LossSpec::expanded(beta, 8), LossSpec::expanded(beta, 20), LossSpec::expectile(0.3),
          LossSpec::clipped_gumbel(beta, 7.0)};
}

TEST(LossProperties, ZeroAtZero) {
  for (double beta : {0.1, 1.0, 7.5})
    for (const auto& s : all_specs(beta)) EXPECT_EQ(loss_value(s, 0.0), 0.0) << s.label();
}

TEST(LossProperties, Nonnegative) {
  // Deterministic pseudo-random residuals spanning many magnitudes.
  std::uint64_t state = 0x9e3779b97f4a7c15ull;
  auto next = [&] {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return static_cast<double>(state >> 11) * 0x1.0p-53;
  };
  for (int i = 0; i < 20000; ++i) {
    const double mag = std::pow(10.0, -6.0 + 8.0 * next());
    const double r = (next() < 0.5 ? -mag : mag);
    const double beta = std::pow(10.0, -1.0 + 2.0 * next());
    for (const auto& s : all_specs(beta)) EXPECT_GE(loss_value(s, r), 0.0) << s.label() << " r=" << r;
  }
}

TEST(LossProperties, OrderTwoIsL2) {
  for (double beta : {0.3, 1.0, 4.0})
    for (double r = -20.0; r <= 20.0; r += 0.37) {
      const double z = r / beta;
      EXPECT_NEAR(expanded_gumbel_loss(r, beta, 2), z * z / 2.0, 1e-15 * z * z) << r;
      EXPECT_EQ(loss_value(LossSpec::l2(beta), r), expanded_gumbel_loss(r, beta, 2));
    }
}

TEST(LossProperties, TaylorRemainderBound) {
  for (int n : {2, 4, 8, 12, 16}) {
    for (int i = -400; i <= 400; ++i) {
      const double z = i / 200.0;
      const double gap = std::abs(expanded_gumbel_loss(z, 1.0, n) - gumbel_loss(z, 1.0));
      const double bound = std::pow(std::abs(z), n + 1) * std::exp(std::abs(z)) / factorial(n + 1);
      // Both sides are rounded; a few ulps of the loss itself are allowed.
      const double slack = 16 * 0x1.0p-52 * std::exp(std::abs(z));
      EXPECT_LE(gap, bound + slack) << "n=" << n << " z=" << z;
    }
  }
}

TEST(LossProperties, GradientsMatchFiniteDifferences) {
  for (double beta : {0.5, 1.0, 2.0, 10.0}) {
    std::vector<LossSpec> specs{LossSpec::gumbel(beta), LossSpec::l2(beta), LossSpec::expectile(0.7)};
    for (int n : {2, 4, 8, 20}) specs.push_back(LossSpec::expanded(beta, n));
    for (const auto& s : specs) {
      for (int i = -100; i <= 100; ++i) {
        const double r = 5.0 * beta * i / 100.0;
        const double analytic = loss_grad(s, r);
        const double fd = fd_grad([&](double x) { return loss_value(s, x); }, r);
        EXPECT_LE(std::abs(analytic - fd) / std::max(1.0, std::abs(fd)), 1e-6) << s.label() << " r=" << r;
      }
    }
  }
}

TEST(LossProperties, ExpansionHasGentlerRightSlope) {
  for (int n : {2, 4, 8, 12, 20}) {
    for (double z = 0.0; z <= 10.0; z += 0.05) {
      const double e = std::abs(expanded_gumbel_loss_grad(z, 1.0, n));
      const double g = std::abs(gumbel_loss_grad(z, 1.0));
      EXPECT_LE(e, g * (1.0 + 4 * 0x1.0p-52)) << "n=" << n << " z=" << z;
      if (z == 0.0) EXPECT_EQ(e, g);
      if (z >= 0.5 && n <= 8) EXPECT_LT(e, g);
    }
  }
}

}  // namespace
}  // namespace mxql
