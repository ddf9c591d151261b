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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <quadmath.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "pmwcache/accountant.h"
#include "pmwcache/domain.h"
#include "pmwcache/exact_cache.h"
#include "pmwcache/experiment.h"
#include "pmwcache/mechanisms.h"
#include "pmwcache/pmw_bypass.h"
#include "pmwcache/sparse_vector.h"
#include "pmwcache/tree_cache.h"
#include "pmwcache/workload.h"

namespace pmwcache {
namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

DomainPtr Covid() {
  static const DomainPtr domain = *DataDomain::Create(
      {{"sex", 2}, {"age", 4}, {"positive", 2}, {"symptoms", 8}});
  return domain;
}

const std::vector<LinearQuery>& Pool() {
  static const std::vector<LinearQuery> pool = *BuildConjunctivePool(Covid());
  return pool;
}

BudgetAccount PureAccount(double cap, int64_t partitions) {
  AccountOptions options;
  options.epsilon_global = cap;
  BudgetAccount account = *BudgetAccount::Create(options);
  for (int64_t p = 0; p < partitions; ++p) (void)account.AddPartition(p);
  return account;
}

double RelErr(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

// ---------------------------------------------------------------------------
// 1. Calibration formulas against quad precision.
Verdict CalibrationExactness() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> alpha(1e-3, 0.999);
  std::uniform_real_distribution<double> beta(1e-9, 0.5);
  std::uniform_real_distribution<double> eps(1e-6, 5.0);
  std::uniform_real_distribution<double> tau(1e-3, 0.5);
  std::uniform_int_distribution<uint64_t> rows(1, 100'000'000);
  double worst = 0.0;
  int tight_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const AccuracyTarget t{alpha(rng), beta(rng)};
    const uint64_t n = rows(rng);
    const __float128 a = t.alpha, b = t.beta, nn = static_cast<__float128>(n);
    const double ref = static_cast<double>(4 * logq(1 / b) / (nn * a));
    const double ref_sv = static_cast<double>(4 * logq(2 / b) / (nn * a));
    const double e = eps(rng), ta = tau(rng);
    const __float128 qe = e, qt = ta;
    const double ref_g = static_cast<double>(
        qt * a / sqrtq(18 * logq(static_cast<__float128>(2)) + 3 * qt * nn * a * qe));
    worst = std::max({worst, RelErr(CalibrateBudget(t, n), ref),
                      RelErr(CalibrateBudgetSv(t, n), ref_sv),
                      RelErr(CalibrateBudgetGaussian(t.alpha, n, e, ta), ref_g)});
    const double star = CalibrateBudgetTight(t, n);
    const double x = t.alpha * static_cast<double>(n);
    if (!(PmwFailureBound(x * star) <= t.beta &&
          PmwFailureBound(x * 0.999 * star) > t.beta)) {
      ++tight_bad;
    }
  }
  return {worst <= 1e-9 && tight_bad == 0,
          absl::StrFormat("max rel err %.3g over 3x1000 inputs; tight bracket "
                          "violations %d/1000",
                          worst, tight_bad)};
}

// ---------------------------------------------------------------------------
// 2. Per-query accuracy over both branches with live noise.
Verdict PerQueryAccuracy() {
  const AccuracyTarget target{0.05, 0.001};
  const uint64_t n = 100'000;
  std::vector<Partition> data = *GenerateDataset(
      *Covid(), {1, n, DatasetLaw::kDrift, 1.0, 0.05}, 202);
  int64_t total = 0, bad = 0;
  int64_t paths[4] = {0, 0, 0, 0};
  // The heuristic engine mixes R1/R2/R3; the always-ready engine drives the
  // sparse-vector branch hard from an untrained histogram.
  for (int variant = 0; variant < 2; ++variant) {
    PmwConfig config;
    config.target = target;
    config.allow_empirical_params = true;
    config.heuristic.c0 = 5;
    if (variant == 1) {
      config.heuristic.always_ready = true;
      config.external_updates = false;
    }
    PmwBypass pmw = *PmwBypass::Create(Covid(), config, data);
    BudgetAccount account = PureAccount(1e15, 1);
    NoiseSource source = NoiseSource::Live(203 + variant);
    std::mt19937_64 rng(205 + variant);
    for (int i = 0; i < 500'000; ++i) {
      const LinearQuery& q = Pool()[rng() % Pool().size()];
      QueryOutcome out = *pmw.Answer(q, account, source);
      ++paths[static_cast<int>(out.path)];
      ++total;
      if (std::abs(out.value - out.true_answer) > target.alpha) ++bad;
    }
  }
  const double rate = static_cast<double>(bad) / static_cast<double>(total);
  const double limit = target.beta + 3.0 * std::sqrt(target.beta / 1e6);
  return {rate <= limit,
          absl::StrFormat("%d answers (R1 %d, R2 %d, R3 %d): error > alpha "
                          "rate %.3g <= %.3g",
                          total, paths[1], paths[2], paths[3], rate, limit)};
}

// ---------------------------------------------------------------------------
// 3. Charging exactness on a scripted run.
Verdict ChargingExactness() {
  std::vector<Partition> data = *GenerateDataset(
      *Covid(), {1, 100'000, DatasetLaw::kDrift, 1.0, 0.05}, 301);
  PmwConfig config;
  config.allow_empirical_params = true;
  config.heuristic.c0 = 3;
  PmwBypass pmw = *PmwBypass::Create(Covid(), config, data);
  const double eps = pmw.epsilon();

  // Pre-drawn noise replayed through a scripted source.
  NoiseSource live = NoiseSource::Live(302);
  std::vector<double> script;
  for (int i = 0; i < 40'000; ++i) {
    script.push_back(*live.Laplace(1.0 / (eps * 100'000)));
  }
  NoiseSource source = NoiseSource::Scripted(script);
  BudgetAccount account = PureAccount(1e12, 1);
  ExactCache cache;
  std::mt19937_64 rng(303);
  int64_t inits = 0, r1 = 0, r2 = 0, r3 = 0, hits = 0, free_bad = 0;
  __float128 oracle = 0;
  for (int i = 0; i < 10'000; ++i) {
    const uint64_t index = rng() % 2000;  // a narrow slice forces repeats
    const LinearQuery& q = Pool()[index];
    const double before = *account.Spent(0);
    const CacheKey key{q.key(), 0, 0, 0};
    if (cache.Lookup(key).has_value()) {
      ++hits;
      if (*account.Spent(0) != before) ++free_bad;
      continue;
    }
    QueryOutcome out = *pmw.Answer(q, account, source);
    cache.Insert(key, out.value);
    if (out.sv_init_charge > 0.0) {
      ++inits;
      oracle += static_cast<__float128>(3.0 * eps);
    }
    switch (out.path) {
      case AnswerPath::kR1:
        ++r1;
        if (*account.Spent(0) != before) ++free_bad;
        break;
      case AnswerPath::kR2:
        ++r2;
        oracle += static_cast<__float128>(4.0 * eps);
        break;
      default:
        ++r3;
        oracle += static_cast<__float128>(eps);
        break;
    }
  }
  const double ledger = *account.Spent(0);
  const std::string got = absl::StrFormat("%.17g", ledger);
  const std::string sum = absl::StrFormat("%.17g", static_cast<double>(oracle));
  const __float128 formula = 3 * static_cast<__float128>(eps) * inits +
                             4 * static_cast<__float128>(eps) * r2 +
                             static_cast<__float128>(eps) * r3;
  const std::string by_formula =
      absl::StrFormat("%.17g", static_cast<double>(formula));
  const bool pass = got == sum && got == by_formula && free_bad == 0 &&
                    source.is_scripted();
  return {pass, absl::StrFormat("ledger %s, sum of charges %s, "
                                "3e*%d + 4e*%d + e*%d = %s; R1 %d, exact hits "
                                "%d, nonzero free answers %d",
                                got, sum, inits, r2, r3, by_formula, r1, hits,
                                free_bad)};
}

// ---------------------------------------------------------------------------
// 4 and 5 share the demo workload.
ExperimentConfig DemoConfig(EngineKind engine) {
  ExperimentConfig c;
  c.name = "covid-demo";
  c.engine = engine;
  c.pmw.allow_empirical_params = true;
  // Large enough that no engine stops early, so whole curves compare.
  c.privacy.epsilon_global = 1e6;
  return c;
}

struct DemoRuns {
  ExperimentResult bypass;
  ExperimentResult vanilla;
  ExperimentResult laplace;
};

const DemoRuns& Demo() {
  static const DemoRuns runs = [] {
    return DemoRuns{*RunExperiment(DemoConfig(EngineKind::kPmwBypass)),
                    *RunExperiment(DemoConfig(EngineKind::kVanillaPmw)),
                    *RunExperiment(DemoConfig(EngineKind::kLaplace))};
  }();
  return runs;
}

Verdict DemoShape() {
  const DemoRuns& d = Demo();
  const auto& bypass = d.bypass.metrics;
  const auto& vanilla = d.vanilla.metrics;
  int64_t below = 0, first_below = -1;
  const size_t common = std::min(bypass.size(), vanilla.size());
  for (size_t i = 0; i < common; ++i) {
    if (vanilla[i].cumulative_max < bypass[i].cumulative_max) {
      ++below;
      if (first_below < 0) first_below = static_cast<int64_t>(i);
    }
  }
  const bool a = below == 0 && common == bypass.size();
  const double total = d.bypass.summary.final_max;
  const bool b = total <= d.laplace.summary.final_max;
  const size_t cut = bypass.size() - bypass.size() / 5;
  const double at_cut = cut == 0 ? 0.0 : bypass[cut - 1].cumulative_max;
  const double tail_share = total > 0 ? (total - at_cut) / total : 0.0;
  const bool c = tail_share < 0.15;
  return {a && b && c,
          absl::StrFormat(
              "(a) %s: vanilla below bypass at %d of %d indices (first %d); "
              "totals bypass %.4g, vanilla %.4g; (b) %s: laplace %.4g; (c) %s: "
              "final-20%% share %.3g",
              a ? "ok" : "FAILED", below, common, first_below, total,
              d.vanilla.summary.final_max, b ? "ok" : "FAILED",
              d.laplace.summary.final_max, c ? "ok" : "FAILED", tail_share)};
}

Verdict EmpiricalConvergence() {
  const DemoRuns& d = Demo();
  const std::optional<int64_t> demo = d.bypass.summary.convergence_updates;

  // Theory-valid parameters: lr/alpha = 0.125 < tau = 0.5.
  ExperimentConfig theory = DemoConfig(EngineKind::kPmwBypass);
  theory.pmw.tau = 0.5;
  theory.pmw.schedule = ScheduleConfig::Constant(0.00625);
  theory.pmw.allow_empirical_params = false;
  theory.validation.every = 10;
  ExperimentResult t = *RunExperiment(theory);
  const double bound = *ConvergenceBound(128, 0.00625, 0.5, 0.05);
  const std::optional<int64_t> tc = t.summary.convergence_updates;

  // Ordering at equal constant lr, measured on a fine cadence.
  std::optional<int64_t> order[2];
  const EngineKind engines[2] = {EngineKind::kPmwBypass, EngineKind::kVanillaPmw};
  for (int i = 0; i < 2; ++i) {
    ExperimentConfig c = DemoConfig(engines[i]);
    c.pmw.schedule = ScheduleConfig::Constant(0.025);
    c.validation.every = 10;
    order[i] = (*RunExperiment(c)).summary.convergence_updates;
  }
  auto show = [](std::optional<int64_t> v) {
    return v.has_value() ? absl::StrCat(*v) : std::string("not converged");
  };
  const bool p1 = demo.has_value();
  const bool p2 = tc.has_value() && static_cast<double>(*tc) <= bound;
  const bool p3 = order[0].has_value() && order[1].has_value() &&
                  *order[1] <= *order[0];
  return {p1 && p2 && p3,
          absl::StrFormat("demo run converges at %s updates; theory params "
                          "converge at %s <= bound %.0f; lr 0.025: vanilla %s "
                          "<= bypass %s",
                          show(demo), show(tc), bound, show(order[1]),
                          show(order[0]))};
}

// ---------------------------------------------------------------------------
// 6. MW update against brute force.
Verdict MwUpdateOracle() {
  std::mt19937_64 rng(601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> step(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    std::vector<double> w(128), q(128);
    for (double& x : w) x = u(rng) + 1e-4;
    for (double& x : q) x = (rng() % 2) ? u(rng) : static_cast<double>(rng() % 2);
    Histogram h = *Histogram::FromWeights(Covid(), w);
    const double s = step(rng);
    Histogram out = MwUpdate(h, *LinearQuery::Dense(Covid(), q), s);
    std::vector<double> g(128);
    double total = 0.0;
    for (size_t v = 0; v < 128; ++v) {
      g[v] = h[v] * std::exp(s * q[v]);
      total += g[v];
    }
    for (size_t v = 0; v < 128; ++v) {
      worst = std::max(worst, std::abs(out[v] - g[v] / total));
    }
  }
  return {worst <= 1e-12,
          absl::StrFormat("max abs diff %.3g over 10000 instances", worst)};
}

// ---------------------------------------------------------------------------
// 7. Tree oracles.
std::vector<NodeId> MinimalDyadicCover(int64_t a, int64_t b, int64_t T) {
  // Shortest path over dyadic nodes from a to b + 1.
  std::vector<int> dist(b + 2, std::numeric_limits<int>::max());
  std::vector<int64_t> prev(b + 2, -1);
  dist[a] = 0;
  for (int64_t x = a; x <= b; ++x) {
    if (dist[x] == std::numeric_limits<int>::max()) continue;
    for (int64_t len = 1; len <= T; len *= 2) {
      if (x % len != 0 || x + len - 1 > b) continue;
      if (dist[x] + 1 < dist[x + len]) {
        dist[x + len] = dist[x] + 1;
        prev[x + len] = x;
      }
    }
  }
  std::vector<NodeId> cover;
  for (int64_t y = b + 1; y != a; y = prev[y]) {
    cover.push_back({0, prev[y], y - 1});
  }
  std::reverse(cover.begin(), cover.end());
  return cover;
}

std::vector<NodeId> SubsetScan(const std::vector<NodeId>& nodes) {
  std::vector<NodeId> best;
  const size_t count = nodes.size();
  for (uint32_t mask = 1; mask < (1u << count); ++mask) {
    std::vector<NodeId> subset;
    for (size_t i = 0; i < count; ++i) {
      if (mask & (1u << i)) subset.push_back(nodes[i]);
    }
    bool contiguous = true;
    for (size_t i = 1; i < subset.size() && contiguous; ++i) {
      contiguous = subset[i].a == subset[i - 1].b + 1;
    }
    if (!contiguous) continue;
    if (subset.size() > best.size() ||
        (subset.size() == best.size() && subset[0].a < best[0].a)) {
      best = subset;
    }
  }
  return best;
}

Verdict TreeOracles() {
  int64_t ranges = 0, split_bad = 0;
  for (int64_t T = 2; T <= 64; T *= 2) {
    for (int64_t a = 0; a < T; ++a) {
      for (int64_t b = a; b < T; ++b) {
        ++ranges;
        if (*SplitQuery(a, b, T) != MinimalDyadicCover(a, b, T)) ++split_bad;
      }
    }
  }

  // Every subset of a fixed ten-node layout with gaps and mixed lengths, and
  // every subset of twelve unit leaves with at most ten nodes.
  int64_t sets = 0, lcs_bad = 0;
  const std::vector<NodeId> layout = {{0, 0, 1},   {0, 2, 3},   {0, 4, 4},
                                      {0, 6, 7},   {0, 8, 8},   {0, 9, 9},
                                      {0, 12, 15}, {0, 16, 16}, {0, 17, 17},
                                      {0, 19, 19}};
  for (uint32_t mask = 0; mask < (1u << layout.size()); ++mask) {
    std::vector<NodeId> nodes;
    for (size_t i = 0; i < layout.size(); ++i) {
      if (mask & (1u << i)) nodes.push_back(layout[i]);
    }
    ++sets;
    if (LargestContiguousSubset(nodes) != SubsetScan(nodes)) ++lcs_bad;
  }
  for (uint32_t mask = 0; mask < (1u << 12); ++mask) {
    if (std::popcount(mask) > 10) continue;
    std::vector<NodeId> nodes;
    for (int64_t i = 0; i < 12; ++i) {
      if (mask & (1u << i)) nodes.push_back({0, i, i});
    }
    ++sets;
    if (LargestContiguousSubset(nodes) != SubsetScan(nodes)) ++lcs_bad;
  }

  const std::vector<Partition> data = *GenerateDataset(
      *Covid(), {16, 20'000, DatasetLaw::kDrift, 1.0, 0.05}, 701);
  TreeConfig config;
  config.pmw.allow_empirical_params = true;
  TreeCache tree = *TreeCache::Create(Covid(), config);
  for (const Partition& p : data) (void)tree.AddPartition(p);
  std::mt19937_64 rng(702);
  double worst = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const int64_t a = static_cast<int64_t>(rng() % 16);
    const int64_t b = a + static_cast<int64_t>(rng() % (16 - a));
    const LinearQuery& q = Pool()[rng() % Pool().size()];
    std::vector<std::pair<double, uint64_t>> parts;
    const std::vector<NodeId> cover = *tree.Cover(a, b);
    for (const NodeId& node : cover) {
      parts.emplace_back(tree.NodeTruth(q, node), tree.NodeRows(node));
    }
    const double whole = *EvalOnPartitions(
        q, absl::MakeConstSpan(data).subspan(a, b - a + 1));
    worst = std::max(worst, std::abs(*Aggregate(parts) - whole));
  }
  return {split_bad == 0 && lcs_bad == 0 && worst <= 1e-12,
          absl::StrFormat("split mismatches %d/%d ranges; contiguous-subset "
                          "mismatches %d/%d sets; aggregate max diff %.3g",
                          split_bad, ranges, lcs_bad, sets, worst)};
}

// ---------------------------------------------------------------------------
// 8. Parallel composition in a 16-partition run.
Verdict ParallelComposition() {
  const std::vector<Partition> data = *GenerateDataset(
      *Covid(), {16, 20'000, DatasetLaw::kDrift, 1.0, 0.05}, 801);
  WorkloadSpec spec;
  spec.pool_size = Pool().size();
  spec.queries = 3000;
  spec.seed = 802;
  spec.range = {RangeLaw::kGaussianWindow, 16, 16, 0, 0, 8.0, 5.0};
  const std::vector<WorkloadItem> items = *SampleWorkload(spec);
  auto shared = std::make_shared<LaplaceAggCalibrator>(
      803, [] {
        MonteCarloConfig mc = MonteCarloConfig::ForBeta(0.001);
        mc.trials = 1'000'000;
        return mc;
      }());

  int64_t equal_bad = 0, subset_bad = 0, sv_queries = 0;
  for (int variant = 0; variant < 2; ++variant) {
    TreeConfig config;
    config.window = 16;
    config.pmw.allow_empirical_params = true;
    // Variant 0 never trusts a histogram, so every covered node pays.
    config.pmw.heuristic.c0 = variant == 0 ? 1'000'000'000 : 3;
    TreeCache tree = *TreeCache::Create(Covid(), config, shared);
    for (const Partition& p : data) (void)tree.AddPartition(p);
    BudgetAccount account = PureAccount(1e12, 16);
    NoiseSource source = NoiseSource::Live(804 + variant);
    for (const WorkloadItem& item : items) {
      std::vector<double> before(16);
      for (int p = 0; p < 16; ++p) before[p] = *account.Spent(p);
      TreeOutcome out = *tree.Answer(Pool()[item.query_index], item.a, item.b,
                                     account, source);
      std::set<int64_t> changed, span;
      for (int p = 0; p < 16; ++p) {
        if (*account.Spent(p) != before[p]) changed.insert(p);
      }
      for (const NodeId& node : out.cover) {
        for (int64_t t = node.a; t <= node.b; ++t) span.insert(t);
      }
      if (variant == 0 && changed != span) ++equal_bad;
      if (variant == 1) {
        if (!out.sv_nodes.empty()) ++sv_queries;
        if (!std::includes(span.begin(), span.end(), changed.begin(),
                           changed.end())) {
          ++subset_bad;
        }
      }
    }
  }
  return {equal_bad == 0 && subset_bad == 0,
          absl::StrFormat("all-paying run: changed != cover span on %d/%d "
                          "queries; default run (%d with a sparse-vector "
                          "branch): changed outside span on %d",
                          equal_bad, items.size(), sv_queries, subset_bad)};
}

// ---------------------------------------------------------------------------
// 9. Tree accuracy over all-bypass nodes with calibrated budgets.
Verdict TreeAccuracy() {
  const AccuracyTarget target{0.05, 0.001};
  const std::vector<Partition> data = *GenerateDataset(
      *Covid(), {16, 10'000, DatasetLaw::kDrift, 1.0, 0.05}, 901);
  TreeConfig config;
  config.window = 16;
  config.pmw.target = target;
  config.pmw.allow_empirical_params = true;
  config.pmw.heuristic.c0 = 1'000'000'000;
  config.calibration_seed = 902;
  // monte_carlo left at zero: the Hoeffding sample size for beta.
  TreeCache tree = *TreeCache::Create(Covid(), config);
  for (const Partition& p : data) (void)tree.AddPartition(p);
  BudgetAccount account = PureAccount(1e15, 16);
  NoiseSource source = NoiseSource::Live(903);
  std::mt19937_64 rng(904);
  constexpr int kQueries = 100'000;
  int bad = 0;
  size_t max_k = 0;
  for (int i = 0; i < kQueries; ++i) {
    const int64_t a = static_cast<int64_t>(rng() % 16);
    const int64_t b = a + static_cast<int64_t>(rng() % (16 - a));
    TreeOutcome out =
        *tree.Answer(Pool()[rng() % Pool().size()], a, b, account, source);
    max_k = std::max(max_k, out.lap_nodes.size());
    if (std::abs(out.value - out.true_answer) > target.alpha) ++bad;
  }
  const double rate = static_cast<double>(bad) / kQueries;
  const double limit = target.beta + 3.0 * std::sqrt(target.beta / kQueries);
  return {rate <= limit,
          absl::StrFormat("%d range queries (up to %d nodes): error > alpha "
                          "rate %.3g <= %.3g",
                          kQueries, max_k, rate, limit)};
}

// ---------------------------------------------------------------------------
// 10. Warm start in streaming runs.
Verdict WarmStart() {
  double totals[2];
  for (int warm = 0; warm < 2; ++warm) {
    ExperimentConfig c;
    c.name = "stream";
    c.use_case = UseCase::kPartitionedStreaming;
    c.engine = EngineKind::kPmwBypass;
    c.queries = 20'000;
    c.window = 16;
    c.pmw.allow_empirical_params = true;
    c.privacy.epsilon_global = 1e6;
    c.warm_start = warm == 1;
    c.mc_trials = 2'000'000;
    ExperimentResult r = *RunExperiment(c);
    double total = 0.0;
    for (const auto& [id, spent] : r.ledger) total += spent;
    totals[warm] = total;
  }

  // Floor preservation inside a live stream tree: each new leaf is probed
  // with noise that releases its own estimate, so the copy is inspected
  // before any update touches it.
  const std::vector<Partition> data = *GenerateDataset(
      *Covid(), {10, 50'000, DatasetLaw::kDrift, 1.0, 0.05}, 1001);
  TreeConfig config;
  config.mode = TreeMode::kStream;
  config.window = 4;
  config.warm_start = true;
  config.pmw.allow_empirical_params = true;
  config.pmw.heuristic.c0 = 20;
  config.monte_carlo = MonteCarloConfig::ForBeta(config.pmw.target.beta);
  config.monte_carlo.trials = 1'000'000;
  TreeCache tree = *TreeCache::Create(Covid(), config);
  BudgetAccount account = PureAccount(1e12, 10);
  NoiseSource source = NoiseSource::Live(1002);
  std::mt19937_64 rng(1003);
  int checked = 0, floor_bad = 0, copy_bad = 0;
  auto min_weight = [](const Histogram& h) {
    return *std::min_element(h.weights().begin(), h.weights().end());
  };
  for (int64_t t = 0; t < 10; ++t) {
    (void)tree.AddPartition(data[t]);
    if (t > 0) {
      const int64_t tree_id = *LocateTree(t, t, config.window);
      const PmwNodeState* src = nullptr;
      for (int64_t p = t - 1; p >= 0 && src == nullptr; --p) {
        for (int64_t k : {tree_id, p / config.window, p / config.window - 1}) {
          if (k >= 0 && src == nullptr) src = tree.FindNode({k, p, p});
        }
      }
      if (src != nullptr) {
        const Histogram source_h = src->histogram;
        const LinearQuery& q = Pool()[rng() % Pool().size()];
        const double estimate = *EvalOnHistogram(q, source_h);
        const double truth = tree.NodeTruth(q, {tree_id, t, t});
        // A ready copy takes the sparse-vector branch instead; the zeros
        // feed its threshold and check draws.
        NoiseSource exact = NoiseSource::Scripted({estimate - truth, 0, 0, 0});
        absl::StatusOr<TreeOutcome> probed = tree.Answer(q, t, t, account, exact);
        if (!probed.ok()) {
          return {false, absl::StrCat("probe failed: ", probed.status().ToString())};
        }
        const TreeOutcome& out = *probed;
        const PmwNodeState* leaf = tree.FindNode({tree_id, t, t});
        if (out.updates == 0 && leaf != nullptr) {
          ++checked;
          if (min_weight(leaf->histogram) < min_weight(source_h)) ++floor_bad;
          if (leaf->histogram.weights()[0] != source_h.weights()[0]) ++copy_bad;
        }
      }
    }
    for (int i = 0; i < 400; ++i) {
      const int64_t w = 1 + static_cast<int64_t>(rng() % std::min<int64_t>(t + 1, 4));
      (void)tree.Answer(Pool()[rng() % Pool().size()], t - w + 1, t, account,
                        source);
    }
  }
  // Internal warm starts average trained children.
  int internal = 0;
  for (int64_t t = 0; t + 1 < 10; t += 2) {
    const int64_t k = *LocateTree(t, t + 1, config.window);
    const PmwNodeState* l = tree.FindNode({k, t, t});
    const PmwNodeState* r = tree.FindNode({k, t + 1, t + 1});
    if (l == nullptr || r == nullptr) continue;
    const Histogram children[] = {l->histogram, r->histogram};
    const Histogram mean = *WarmStartInternal(children);
    ++internal;
    if (min_weight(mean) <
        std::min(min_weight(l->histogram), min_weight(r->histogram))) {
      ++floor_bad;
    }
  }
  const bool budget_ok = totals[1] <= totals[0];
  return {budget_ok && floor_bad == 0 && copy_bad == 0 && checked > 0,
          absl::StrFormat("total spend warm %.4g <= cold %.4g: %s; floor "
                          "violations %d over %d leaf copies and %d averages; "
                          "inexact copies %d",
                          totals[1], totals[0], budget_ok ? "ok" : "FAILED",
                          floor_bad, checked, internal, copy_bad)};
}

// ---------------------------------------------------------------------------
// 11. RDP accounting.
Verdict RdpAccounting() {
  const double laplace_limit = std::abs(RdpCostLaplace(1.0, 1e6) - 1.0);
  const double sv_limit = std::abs(RdpCostSv(1.0, 1e6) - 3.0);

  // a/(2 sigma^2) + L/(a-1) is convex in a with minimizer 1 + sigma sqrt(2L).
  const std::vector<double> orders = DefaultRdpOrders();
  double worst_gap = 0.0;
  int minimizer_bad = 0;
  for (double sigma : {0.7, 1.0, 2.0, 5.0}) {
    for (double delta : {1e-5, 1e-6, 1e-8}) {
      const double L = std::log(1.0 / delta);
      std::vector<double> spent;
      for (double a : orders) spent.push_back(RdpCostGaussian(sigma, a));
      const double grid = *RdpToDp(spent, orders, delta);
      const double a_star = 1.0 + sigma * std::sqrt(2.0 * L);
      auto f = [&](double a) {
        return a / (2 * sigma * sigma) + L / (a - 1.0);
      };
      // Neighbouring grid orders around the continuous minimizer.
      double lo = orders.front(), hi = orders.back();
      for (double a : orders) {
        if (a <= a_star) lo = a;
        if (a >= a_star) {
          hi = a;
          break;
        }
      }
      const double resolution = std::min(f(lo), f(hi));
      if (grid < f(a_star) - 1e-12 || std::abs(grid - resolution) > 1e-12) {
        ++minimizer_bad;
      }
      worst_gap = std::max(worst_gap, grid - f(a_star));
    }
  }

  int monotone_bad = 0;
  for (RdpAcceptance acceptance :
       {RdpAcceptance::kAnyOrder, RdpAcceptance::kAllOrders}) {
    bool rejected = false;
    for (int m = 1; m <= 2000; ++m) {
      AccountOptions options;
      options.mode = AccountingMode::kRdp;
      options.epsilon_global = 3.0;
      options.delta_global = 1e-6;
      options.acceptance = acceptance;
      BudgetAccount account = *BudgetAccount::Create(options);
      (void)account.AddPartition(0);
      RdpCurve curve = account.LaplaceCurve(0.01);
      for (double& c : curve) c *= m;
      const bool ok = *account.CanAfford(std::vector<PartitionId>{0}, curve);
      if (rejected && ok) ++monotone_bad;
      rejected = rejected || !ok;
    }
  }
  const bool pass = laplace_limit <= 1e-5 && sv_limit <= 1e-5 &&
                    minimizer_bad == 0 && monotone_bad == 0;
  return {pass, absl::StrFormat("laplace limit err %.2g, sv limit err %.2g; "
                                "grid minimizer mismatches %d/12 (max gap to "
                                "continuous optimum %.3g); filter "
                                "non-monotone steps %d",
                                laplace_limit, sv_limit, minimizer_bad,
                                worst_gap, monotone_bad)};
}

// ---------------------------------------------------------------------------
// 12. Determinism.
Verdict Determinism() {
  const std::string first = MetricsCsv(Demo().bypass);
  const std::string again =
      MetricsCsv(*RunExperiment(DemoConfig(EngineKind::kPmwBypass)));
  ExperimentConfig stream;
  stream.use_case = UseCase::kPartitionedStreaming;
  stream.queries = 5000;
  stream.pmw.allow_empirical_params = true;
  stream.privacy.epsilon_global = 1e6;
  stream.mc_trials = 200'000;
  const std::string s1 = MetricsCsv(*RunExperiment(stream));
  const std::string s2 = MetricsCsv(*RunExperiment(stream));
  return {first == again && s1 == s2,
          absl::StrFormat("non-partitioned: %d bytes %s; streaming tree: %d "
                          "bytes %s",
                          first.size(), first == again ? "identical" : "DIFFER",
                          s1.size(), s1 == s2 ? "identical" : "DIFFER")};
}

}  // namespace
}  // namespace pmwcache

int main() {
  struct Criterion {
    const char* name;
    std::function<pmwcache::Verdict()> run;
    double limit_seconds;  // 0 when the criterion has no runtime bound
  };
  const Criterion criteria[] = {
      {"calibration exactness", pmwcache::CalibrationExactness, 10},
      {"per-query accuracy", pmwcache::PerQueryAccuracy, 120},
      {"charging exactness", pmwcache::ChargingExactness, 0},
      {"demo experiment shape", pmwcache::DemoShape, 600},
      {"empirical convergence", pmwcache::EmpiricalConvergence, 900},
      {"mw-update oracle", pmwcache::MwUpdateOracle, 0},
      {"tree oracles", pmwcache::TreeOracles, 0},
      {"parallel composition", pmwcache::ParallelComposition, 0},
      {"tree end-to-end accuracy", pmwcache::TreeAccuracy, 300},
      {"warm start", pmwcache::WarmStart, 0},
      {"rdp accounting", pmwcache::RdpAccounting, 0},
      {"determinism", pmwcache::Determinism, 0},
  };
  int failed = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    const auto start = pmwcache::Clock::now();
    pmwcache::Verdict v = c.run();
    const double seconds = pmwcache::Seconds(start);
    if (c.limit_seconds > 0 && seconds > c.limit_seconds) {
      v.pass = false;
      v.detail += absl::StrFormat("; runtime %.1fs over the %.0fs limit",
                                  seconds, c.limit_seconds);
    }
    if (!v.pass) ++failed;
    std::printf("%s %2d %s (%.1fs): %s\n", v.pass ? "PASS" : "FAIL", index,
                c.name, seconds, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
