// Copyright 2026 The pmwcache Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pmwcache/mechanisms.h"

#include <quadmath.h>

#include <cmath>
#include <random>

#include "gtest/gtest.h"

namespace pmwcache {
namespace {

// Quad-precision references for the closed-form calibrations.
double QuadBudget(double alpha, double beta, uint64_t n) {
  __float128 a = alpha, b = beta, nn = static_cast<__float128>(n);
  return static_cast<double>(4 * logq(1 / b) / (nn * a));
}

double QuadBudgetSv(double alpha, double beta, uint64_t n) {
  __float128 a = alpha, b = beta, nn = static_cast<__float128>(n);
  return static_cast<double>(4 * logq(2 / b) / (nn * a));
}

double QuadGaussian(double alpha, uint64_t n, double eps, double tau) {
  __float128 a = alpha, e = eps, t = tau, nn = static_cast<__float128>(n);
  return static_cast<double>(t * a / sqrtq(18 * logq(static_cast<__float128>(2)) + 3 * t * nn * a * e));
}

double RelErr(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

TEST(CalibrateBudgetTest, FrozenExamples) {
  EXPECT_NEAR(CalibrateBudget({1.0, std::exp(-1.0)}, 4), 1.0, 1e-15);
  EXPECT_NEAR(CalibrateBudget({0.05, 0.001}, 1000), 0.5526204, 1e-7);
  EXPECT_NEAR(CalibrateBudget({0.05, 0.001}, 50'426'600), 1.0959e-5, 1e-9);
  EXPECT_NEAR(CalibrateBudgetSv({1.0, 2.0 * std::exp(-1.0)}, 4), 1.0, 1e-15);
  EXPECT_NEAR(CalibrateBudgetSv({0.05, 0.001}, 2000), 0.3040361, 1e-7);
  EXPECT_NEAR(CalibrateBudgetGaussian(0.05, 1000, 0.5526204, 0.05), 6.132e-4,
              1e-7);
  EXPECT_NEAR(CalibrateBudgetGaussian(0.05, 1000, 1e-300, 0.05),
              0.05 * 0.05 / std::sqrt(18.0 * std::log(2.0)), 1e-15);
}

TEST(CalibrateBudgetTest, MatchesQuadPrecisionOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> alpha(1e-3, 0.999);
  std::uniform_real_distribution<double> beta(1e-9, 0.999);
  std::uniform_int_distribution<uint64_t> n(1, 100'000'000);
  std::uniform_real_distribution<double> eps(1e-6, 5.0);
  std::uniform_real_distribution<double> tau(1e-3, 0.5);
  for (int i = 0; i < 1000; ++i) {
    const AccuracyTarget t{alpha(rng), beta(rng)};
    const uint64_t rows = n(rng);
    EXPECT_LT(RelErr(CalibrateBudget(t, rows),
                     QuadBudget(t.alpha, t.beta, rows)),
              1e-9);
    EXPECT_LT(RelErr(CalibrateBudgetSv(t, rows),
                     QuadBudgetSv(t.alpha, t.beta, rows)),
              1e-9);
    const double e = eps(rng);
    const double ta = tau(rng);
    EXPECT_LT(RelErr(CalibrateBudgetGaussian(t.alpha, rows, e, ta),
                     QuadGaussian(t.alpha, rows, e, ta)),
              1e-9);
  }
}

TEST(CalibrateBudgetTest, SvIsBudgetAtHalfBeta) {
  const AccuracyTarget t{0.05, 0.001};
  EXPECT_NEAR(CalibrateBudgetSv(t, 777), CalibrateBudget({0.05, 0.0005}, 777),
              1e-15);
}

TEST(CalibrateBudgetTightTest, BracketsTheBound) {
  const AccuracyTarget t{0.05, 0.001};
  const double eps = CalibrateBudgetTight(t, 1000);
  EXPECT_LE(PmwFailureBound(0.05 * 1000 * eps), 0.001);
  EXPECT_GT(PmwFailureBound(0.05 * 1000 * 0.999 * eps), 0.001);
  EXPECT_LE(eps, CalibrateBudget(t, 1000));
  EXPECT_NEAR(CalibrateBudgetTight({0.025, 0.001}, 2000), eps, 1e-9 * eps);
}

TEST(CalibrateBudgetTightTest, NeverAboveTheSimpleBudget) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> alpha(1e-3, 0.999);
  // Above beta ~ 0.79 the bound cannot be reached below the simple budget's
  // bracket; the tight form is only used for small beta.
  std::uniform_real_distribution<double> beta(1e-9, 0.5);
  std::uniform_int_distribution<uint64_t> n(1, 10'000'000);
  for (int i = 0; i < 1000; ++i) {
    const AccuracyTarget t{alpha(rng), beta(rng)};
    const uint64_t rows = n(rng);
    EXPECT_LE(CalibrateBudgetTight(t, rows), CalibrateBudget(t, rows));
  }
}

TEST(CalibrateBudgetTest, DecreasingInNAndAlpha) {
  const AccuracyTarget t{0.05, 0.001};
  EXPECT_GT(CalibrateBudget(t, 100), CalibrateBudget(t, 101));
  EXPECT_GT(CalibrateBudget({0.05, 0.001}, 100),
            CalibrateBudget({0.06, 0.001}, 100));
  EXPECT_GT(CalibrateBudgetTight(t, 100), CalibrateBudgetTight(t, 101));
  EXPECT_GT(CalibrateBudgetSv(t, 100), CalibrateBudgetSv(t, 101));
}

TEST(NoiseSourceTest, ScriptedValuesAndExhaustion) {
  NoiseSource s = NoiseSource::Scripted({0.5, -1.0});
  EXPECT_TRUE(s.is_scripted());
  EXPECT_EQ(*s.Laplace(3.0), 0.5);
  EXPECT_EQ(*s.Gaussian(2.0), -1.0);
  EXPECT_EQ(s.draws(), 2u);
  EXPECT_EQ(s.Laplace(1.0).status().code(), absl::StatusCode::kOutOfRange);
  EXPECT_FALSE(s.Laplace(0.0).ok());
}

TEST(NoiseSourceTest, LiveMomentsAndDeterminism) {
  NoiseSource a = NoiseSource::Live(9);
  NoiseSource b = NoiseSource::Live(9);
  constexpr int kSamples = 1'000'000;
  double sum = 0.0, sq = 0.0, gsq = 0.0, gsum = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const double x = *a.Laplace(2.0);
    ASSERT_EQ(x, *b.Laplace(2.0));
    sum += x;
    sq += x * x;
    const double g = *a.Gaussian(1.0);
    (void)b.Gaussian(1.0);
    gsum += g;
    gsq += g * g;
  }
  EXPECT_LT(std::abs(sum / kSamples), 0.02);
  EXPECT_NEAR(sq / kSamples, 8.0, 0.16);  // 2 b^2
  EXPECT_NEAR(gsq / kSamples - (gsum / kSamples) * (gsum / kSamples), 1.0,
              0.02);
}

TEST(NoiseSourceTest, GaussianTailWithinExponentialBound) {
  // Z ~ N(0, sigma^2 / n^2) with sigma from the Gaussian calibration.
  const double alpha = 0.05, tau = 0.05;
  const uint64_t n = 1000;
  const double eps = 0.5526204;
  const double sigma = CalibrateBudgetGaussian(alpha, n, eps, tau);
  NoiseSource s = NoiseSource::Live(4);
  constexpr int kSamples = 1'000'000;
  int above = 0;
  for (int i = 0; i < kSamples; ++i) {
    if (std::abs(*s.Gaussian(sigma / static_cast<double>(n))) > alpha) ++above;
  }
  const double bound = std::exp(-alpha * static_cast<double>(n) * eps);
  const double p = static_cast<double>(above) / kSamples;
  EXPECT_LE(p, bound + 3.0 * std::sqrt(bound / kSamples));
}

TEST(MonteCarloConfigTest, HoeffdingSize) {
  MonteCarloConfig mc = MonteCarloConfig::ForBeta(0.001);
  EXPECT_DOUBLE_EQ(mc.beta_mc, 0.001 / 20);
  EXPECT_EQ(mc.trials, static_cast<int64_t>(std::ceil(
                           std::log(2.0 / mc.beta_mc) /
                           (2.0 * 0.00025 * 0.00025))));
  EXPECT_TRUE(mc.Validate(0.001).ok());
  EXPECT_FALSE((MonteCarloConfig{0, 1e-5}).Validate(0.001).ok());
  EXPECT_FALSE((MonteCarloConfig{10, 0.001}).Validate(0.001).ok());
}

TEST(LaplaceAggTest, SingleTermIsAnalytic) {
  const AccuracyTarget t{0.05, 0.001};
  MonteCarloConfig mc = MonteCarloConfig::ForBeta(t.beta);
  NoiseSource s = NoiseSource::Scripted({});
  const double eps = *CalibrateBudgetLaplaceAgg(t, 1, 1000, mc, s);
  EXPECT_NEAR(std::exp(-1000 * 0.05 * eps), t.beta / 2 - mc.beta_mc, 1e-15);
}

TEST(LaplaceAggTest, TailHoldsUnderFreshSimulation) {
  // Larger beta keeps the Monte Carlo sample small.
  const AccuracyTarget t{0.05, 0.02};
  MonteCarloConfig mc = MonteCarloConfig::ForBeta(t.beta);
  mc.trials = 400'000;
  NoiseSource s = NoiseSource::Live(11);
  const uint64_t n_lap = 1000;
  const double eps4 = *CalibrateBudgetLaplaceAgg(t, 4, n_lap, mc, s);
  const double eps1 = *CalibrateBudgetLaplaceAgg(t, 1, n_lap, mc, s);
  EXPECT_GE(eps4, eps1);

  NoiseSource fresh = NoiseSource::Live(12345);
  constexpr int kTrials = 400'000;
  int above = 0;
  for (int i = 0; i < kTrials; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) sum += *fresh.Laplace(1.0 / eps4);
    if (std::abs(sum) > static_cast<double>(n_lap) * t.alpha) ++above;
  }
  const double p = static_cast<double>(above) / kTrials;
  EXPECT_LT(p, t.beta / 2 + 3.0 * std::sqrt(t.beta / 2 / kTrials));
}

TEST(LaplaceAggTest, ScriptedSourceIsRejectedForSampling) {
  const AccuracyTarget t{0.05, 0.02};
  MonteCarloConfig mc = MonteCarloConfig::ForBeta(t.beta);
  mc.trials = 1000;
  NoiseSource s = NoiseSource::Scripted({});
  EXPECT_EQ(CalibrateBudgetLaplaceAgg(t, 2, 100, mc, s).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_FALSE(CalibrateBudgetLaplaceAgg(t, 0, 100, mc, s).ok());
}

TEST(LaplaceAggCalibratorTest, MemoizedAndSeeded) {
  const AccuracyTarget t{0.05, 0.02};
  MonteCarloConfig mc = MonteCarloConfig::ForBeta(t.beta);
  mc.trials = 100'000;
  LaplaceAggCalibrator a(5, mc);
  LaplaceAggCalibrator b(5, mc);
  const double x = *a.Epsilon(t, 3, 5000);
  EXPECT_EQ(x, *a.Epsilon(t, 3, 5000));
  EXPECT_EQ(x, *b.Epsilon(t, 3, 5000));
  // Same tail, rescaled by the row count.
  EXPECT_NEAR(*a.Epsilon(t, 3, 10000), x / 2, 2e-3 * x);
}

}  // namespace
}  // namespace pmwcache
