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

// Noise sampling and the budget calibrations that tie a per-query accuracy
// target (alpha, beta) to a privacy parameter.

#ifndef PMWCACHE_MECHANISMS_H_
#define PMWCACHE_MECHANISMS_H_

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <tuple>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace pmwcache {

// Source of additive noise. Live mode samples from a seeded 64-bit Mersenne
// Twister. Scripted mode returns an injected sequence verbatim (the values are
// the noise itself, independent of the requested scale) and errors once it
// runs dry; it exists so that branch logic can be tested without randomness.
class NoiseSource {
 public:
  static NoiseSource Live(uint64_t seed);
  static NoiseSource Scripted(std::vector<double> values);

  bool is_scripted() const { return scripted_; }

  // Two-sided exponential with scale `scale` (variance 2 scale^2).
  absl::StatusOr<double> Laplace(double scale);
  // Zero-mean normal with standard deviation `sigma`.
  absl::StatusOr<double> Gaussian(double sigma);

  // Number of Laplace/Gaussian draws served so far.
  uint64_t draws() const { return draws_; }
  // Scripted values not yet consumed; 0 in live mode.
  size_t remaining() const { return script_.size(); }

  // Raw generator access for Monte Carlo routines. Live mode only.
  std::mt19937_64& engine() { return engine_; }

 private:
  NoiseSource() = default;

  absl::StatusOr<double> NextScripted();

  bool scripted_ = false;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::deque<double> script_;
  uint64_t draws_ = 0;
};

// Uniform draw in (0, 1] with 53 bits of resolution.
inline double UnitInterval(std::mt19937_64& engine) {
  return (static_cast<double>(engine() >> 11) + 1.0) * 0x1.0p-53;
}

// Per-query (alpha, beta)-accuracy: error above alpha with probability at
// most beta.
struct AccuracyTarget {
  double alpha = 0.05;
  double beta = 0.001;

  absl::Status Validate() const;
};

// Monte Carlo parameters for the aggregated-Laplace calibration: `trials`
// samples and the slack `beta_mc` subtracted from the target tail.
struct MonteCarloConfig {
  int64_t trials = 0;
  double beta_mc = 0.0;

  // beta_mc = beta / 20 and the Hoeffding sample size that keeps the
  // empirical tail within beta / 4 of the truth with probability
  // 1 - beta_mc.
  static MonteCarloConfig ForBeta(double beta);

  absl::Status Validate(double beta) const;
};

// 4 ln(1/beta) / (n alpha).
double CalibrateBudget(const AccuracyTarget& target, uint64_t n);

// The failure bound exp(-x) + (1/2 + x/8) exp(-x/2) as a function of
// x = alpha * n * epsilon. Strictly decreasing from 3/2 at x = 0.
double PmwFailureBound(double x);

// Smallest epsilon whose PmwFailureBound(alpha n epsilon) is at most beta,
// bisected to 1e-9 relative tolerance. Below CalibrateBudget for every
// beta up to roughly 0.79.
double CalibrateBudgetTight(const AccuracyTarget& target, uint64_t n);

// 4 ln(2/beta) / (n_sv alpha): the sparse-vector branch of a split query gets
// half the failure probability.
double CalibrateBudgetSv(const AccuracyTarget& target, uint64_t n_sv);

// Smallest epsilon such that the Monte Carlo estimate of
//   Pr[|Lap(1/eps)_1 + ... + Lap(1/eps)_k| > n_lap * alpha]
// is below beta/2 - beta_mc. Bisection to 1e-3 relative tolerance over a
// single fixed sample. k = 1 inverts the Laplace tail analytically and draws
// nothing. Requires a live source when k > 1.
absl::StatusOr<double> CalibrateBudgetLaplaceAgg(const AccuracyTarget& target,
                                                 int64_t k, uint64_t n_lap,
                                                 const MonteCarloConfig& mc,
                                                 NoiseSource& source);

// tau * alpha / sqrt(18 ln 2 + 3 tau n alpha epsilon): the standard deviation
// of Gaussian answer noise matching the Laplace tail bounds used for
// accuracy and convergence.
double CalibrateBudgetGaussian(double alpha, uint64_t n, double epsilon,
                               double tau);

// Memoized CalibrateBudgetLaplaceAgg. The Monte Carlo sample for a given
// number of sub-results depends only on (k, beta, mc), so it is drawn once,
// from a generator seeded by (seed, k), and reused for every n_lap and alpha.
// Thread-safe.
class LaplaceAggCalibrator {
 public:
  explicit LaplaceAggCalibrator(uint64_t seed, MonteCarloConfig mc = {})
      : seed_(seed), mc_(mc) {}

  absl::StatusOr<double> Epsilon(const AccuracyTarget& target, int64_t k,
                                 uint64_t n_lap);

 private:
  struct Tail;

  uint64_t seed_;
  MonteCarloConfig mc_;
  std::mutex mu_;
  std::map<std::tuple<int64_t, double, int64_t, double>,
           std::shared_ptr<const Tail>>
      tails_;
};

}  // namespace pmwcache

#endif  // PMWCACHE_MECHANISMS_H_
