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

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <utility>

#include "absl/strings/str_cat.h"

namespace pmwcache {

NoiseSource NoiseSource::Live(uint64_t seed) {
  NoiseSource source;
  source.engine_.seed(seed);
  return source;
}

NoiseSource NoiseSource::Scripted(std::vector<double> values) {
  NoiseSource source;
  source.scripted_ = true;
  source.script_.assign(values.begin(), values.end());
  return source;
}

absl::StatusOr<double> NoiseSource::NextScripted() {
  if (script_.empty()) {
    return absl::OutOfRangeError(
        absl::StrCat("scripted noise exhausted after ", draws_, " draws"));
  }
  const double value = script_.front();
  script_.pop_front();
  ++draws_;
  return value;
}

absl::StatusOr<double> NoiseSource::Laplace(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    return absl::InvalidArgumentError(
        absl::StrCat("Laplace scale must be positive and finite, got ", scale));
  }
  if (scripted_) return NextScripted();
  ++draws_;
  // One 64-bit word: the low bit picks the sign, the high 53 bits an
  // exponential magnitude.
  const uint64_t bits = engine_();
  const double u = (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  const double magnitude = -scale * std::log(u);
  return (bits & 1) ? -magnitude : magnitude;
}

absl::StatusOr<double> NoiseSource::Gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    return absl::InvalidArgumentError(
        absl::StrCat("Gaussian sigma must be positive and finite, got ", sigma));
  }
  if (scripted_) return NextScripted();
  ++draws_;
  return sigma * normal_(engine_);
}

absl::Status AccuracyTarget::Validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("alpha must lie in (0, 1), got ", alpha));
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("beta must lie in (0, 1), got ", beta));
  }
  return absl::OkStatus();
}

MonteCarloConfig MonteCarloConfig::ForBeta(double beta) {
  MonteCarloConfig mc;
  mc.beta_mc = beta / 20.0;
  const double deviation = beta / 4.0;
  mc.trials = static_cast<int64_t>(std::ceil(
      std::log(2.0 / mc.beta_mc) / (2.0 * deviation * deviation)));
  return mc;
}

absl::Status MonteCarloConfig::Validate(double beta) const {
  if (trials < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("Monte Carlo trials must be positive, got ", trials));
  }
  if (!(beta_mc > 0.0 && beta_mc < beta / 2.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("beta_mc must lie in (0, beta/2), got ", beta_mc));
  }
  return absl::OkStatus();
}

double CalibrateBudget(const AccuracyTarget& target, uint64_t n) {
  return 4.0 * std::log(1.0 / target.beta) /
         (static_cast<double>(n) * target.alpha);
}

double PmwFailureBound(double x) {
  return std::exp(-x) + (0.5 + x / 8.0) * std::exp(-x / 2.0);
}

namespace {

constexpr double kBisectionLowerBound = 1e-12;
constexpr int kMaxBracketDoublings = 200;

// Smallest epsilon with accept(epsilon), assuming accept is monotone. The
// result always satisfies accept.
absl::StatusOr<double> BisectMinimum(const std::function<bool(double)>& accept,
                                     double upper, double relative_tolerance) {
  double lo = kBisectionLowerBound;
  double hi = upper;
  if (accept(lo)) return lo;
  int doublings = 0;
  while (!accept(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > kMaxBracketDoublings || !std::isfinite(hi)) {
      return absl::InternalError("bisection failed to bracket the solution");
    }
  }
  while (hi - lo > relative_tolerance * hi) {
    const double mid = 0.5 * (lo + hi);
    if (accept(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace

double CalibrateBudgetTight(const AccuracyTarget& target, uint64_t n) {
  const double scale = target.alpha * static_cast<double>(n);
  auto accept = [&](double eps) {
    return PmwFailureBound(scale * eps) <= target.beta;
  };
  // The bound is decreasing and tends to 0, so bracketing cannot fail.
  return *BisectMinimum(accept, 10.0 * CalibrateBudget(target, n), 1e-9);
}

double CalibrateBudgetSv(const AccuracyTarget& target, uint64_t n_sv) {
  return 4.0 * std::log(2.0 / target.beta) /
         (static_cast<double>(n_sv) * target.alpha);
}

double CalibrateBudgetGaussian(double alpha, uint64_t n, double epsilon,
                               double tau) {
  return tau * alpha /
         std::sqrt(18.0 * std::log(2.0) +
                   3.0 * tau * static_cast<double>(n) * alpha * epsilon);
}

// The largest |S_k| values of a Monte Carlo sample, S_k a sum of k standard
// Laplace variables. Only the top `capacity` values matter: the calibration
// only asks whether fewer than tail * trials samples exceed a threshold.
struct LaplaceAggCalibrator::Tail {
  int64_t trials = 0;
  std::vector<double> top;  // descending
};

namespace {

// |Lap_1 + ... + Lap_k| as |log(prod v / prod u)|: the Laplace sum is a
// difference of two Gamma(k, 1) variables, each -log of a uniform product.
double SampleLaplaceSumMagnitude(int64_t k, std::mt19937_64& engine) {
  double log_ratio = 0.0;
  double prod_u = 1.0;
  double prod_v = 1.0;
  for (int64_t i = 0; i < k; ++i) {
    prod_u *= UnitInterval(engine);
    prod_v *= UnitInterval(engine);
    if ((i & 15) == 15) {
      log_ratio += std::log(prod_v / prod_u);
      prod_u = prod_v = 1.0;
    }
  }
  log_ratio += std::log(prod_v / prod_u);
  return std::abs(log_ratio);
}

std::vector<double> DrawTail(int64_t k, int64_t trials, size_t capacity,
                             std::mt19937_64& engine) {
  std::priority_queue<double, std::vector<double>, std::greater<>> heap;
  for (int64_t t = 0; t < trials; ++t) {
    const double value = SampleLaplaceSumMagnitude(k, engine);
    if (heap.size() < capacity) {
      heap.push(value);
    } else if (value > heap.top()) {
      heap.pop();
      heap.push(value);
    }
  }
  std::vector<double> top;
  top.reserve(heap.size());
  while (!heap.empty()) {
    top.push_back(heap.top());
    heap.pop();
  }
  std::reverse(top.begin(), top.end());
  return top;
}

double TailLimit(const AccuracyTarget& target, const MonteCarloConfig& mc) {
  return target.beta / 2.0 - mc.beta_mc;
}

size_t TailCapacity(double limit, int64_t trials) {
  return static_cast<size_t>(std::ceil(limit * static_cast<double>(trials))) +
         1;
}

absl::StatusOr<double> EpsilonFromTail(const AccuracyTarget& target,
                                       uint64_t n_lap, double limit,
                                       int64_t trials,
                                       const std::vector<double>& top) {
  const double scale = static_cast<double>(n_lap) * target.alpha;
  const double max_count = limit * static_cast<double>(trials);
  auto accept = [&](double eps) {
    const double x = scale * eps;
    const size_t above = static_cast<size_t>(
        std::upper_bound(top.begin(), top.end(), x, std::greater<>()) -
        top.begin());
    return static_cast<double>(above) < max_count;
  };
  return BisectMinimum(accept, 10.0 * CalibrateBudget(target, n_lap), 1e-3);
}

absl::Status ValidateAggInputs(const AccuracyTarget& target, int64_t k,
                               uint64_t n_lap, const MonteCarloConfig& mc) {
  if (absl::Status s = target.Validate(); !s.ok()) return s;
  if (k < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("need at least one Laplace sub-result, got ", k));
  }
  if (n_lap == 0) return absl::InvalidArgumentError("n_lap must be positive");
  return mc.Validate(target.beta);
}

double AnalyticSingleLaplace(const AccuracyTarget& target, uint64_t n_lap,
                             double limit) {
  return std::log(1.0 / limit) /
         (static_cast<double>(n_lap) * target.alpha);
}

}  // namespace

absl::StatusOr<double> CalibrateBudgetLaplaceAgg(const AccuracyTarget& target,
                                                 int64_t k, uint64_t n_lap,
                                                 const MonteCarloConfig& mc,
                                                 NoiseSource& source) {
  if (absl::Status s = ValidateAggInputs(target, k, n_lap, mc); !s.ok()) {
    return s;
  }
  const double limit = TailLimit(target, mc);
  if (k == 1) return AnalyticSingleLaplace(target, n_lap, limit);
  if (source.is_scripted()) {
    return absl::FailedPreconditionError(
        "Monte Carlo calibration needs a live noise source");
  }
  const std::vector<double> top = DrawTail(
      k, mc.trials, TailCapacity(limit, mc.trials), source.engine());
  return EpsilonFromTail(target, n_lap, limit, mc.trials, top);
}

absl::StatusOr<double> LaplaceAggCalibrator::Epsilon(
    const AccuracyTarget& target, int64_t k, uint64_t n_lap) {
  const MonteCarloConfig mc =
      mc_.trials > 0 ? mc_ : MonteCarloConfig::ForBeta(target.beta);
  if (absl::Status s = ValidateAggInputs(target, k, n_lap, mc); !s.ok()) {
    return s;
  }
  const double limit = TailLimit(target, mc);
  if (k == 1) return AnalyticSingleLaplace(target, n_lap, limit);

  std::shared_ptr<const Tail> tail;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(k, target.beta, mc.trials, mc.beta_mc);
    auto it = tails_.find(key);
    if (it == tails_.end()) {
      std::seed_seq seq{seed_, static_cast<uint64_t>(k)};
      std::mt19937_64 engine(seq);
      auto fresh = std::make_shared<Tail>();
      fresh->trials = mc.trials;
      fresh->top =
          DrawTail(k, mc.trials, TailCapacity(limit, mc.trials), engine);
      it = tails_.emplace(key, std::move(fresh)).first;
    }
    tail = it->second;
  }
  return EpsilonFromTail(target, n_lap, limit, tail->trials, tail->top);
}

}  // namespace pmwcache
