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

#include "pmwcache/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "absl/container/flat_hash_map.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "pmwcache/exact_cache.h"
#include "pmwcache/tree_cache.h"

namespace pmwcache {

namespace {

// Independent component seeds derived from the top-level seed.
uint64_t SplitMix(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + stream * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum SeedStream : uint64_t {
  kDatasetSeed = 1,
  kWorkloadSeed = 2,
  kNoiseSeed = 3,
  kValidationSeed = 4,
  kCalibrationSeed = 5,
};

struct Answered {
  double value = 0.0;
  double true_answer = 0.0;
  AnswerPath path = AnswerPath::kR3;
};

Cost LaplaceCost(const BudgetAccount& account, double epsilon) {
  if (account.mode() == AccountingMode::kPureDp) return epsilon;
  return account.LaplaceCurve(epsilon);
}

std::vector<PartitionId> RangeIds(int64_t a, int64_t b) {
  std::vector<PartitionId> ids;
  for (int64_t t = a; t <= b; ++t) ids.push_back(t);
  return ids;
}

class Engine {
 public:
  virtual ~Engine() = default;
  virtual absl::Status AddPartition(const Partition& partition) = 0;
  virtual absl::StatusOr<Answered> Answer(const LinearQuery& query, int64_t a,
                                          int64_t b, BudgetAccount& account,
                                          NoiseSource& source) = 0;
  // The histogram checked by validation; null when there is no single one.
  virtual const Histogram* histogram() const { return nullptr; }
  virtual double epsilon() const { return 0.0; }
  virtual std::string warning() const { return ""; }

  int64_t updates() const { return updates_; }
  int64_t sv_inits() const { return sv_inits_; }

 protected:
  int64_t updates_ = 0;
  int64_t sv_inits_ = 0;
};

// Calibrated Laplace on the exact answer over [a, b]; no state.
class DirectLaplaceEngine : public Engine {
 public:
  explicit DirectLaplaceEngine(AccuracyTarget target) : target_(target) {}

  absl::Status AddPartition(const Partition& partition) override {
    partitions_.push_back(partition);
    return absl::OkStatus();
  }

  absl::StatusOr<Answered> Answer(const LinearQuery& query, int64_t a,
                                  int64_t b, BudgetAccount& account,
                                  NoiseSource& source) override {
    const absl::Span<const Partition> range =
        absl::MakeConstSpan(partitions_).subspan(a, b - a + 1);
    uint64_t rows = 0;
    for (const Partition& p : range) rows += p.rows;
    if (rows == 0) {
      return absl::FailedPreconditionError("query range holds no rows");
    }
    epsilon_ = CalibrateBudget(target_, rows);
    absl::StatusOr<double> truth = EvalOnPartitions(query, range);
    if (!truth.ok()) return truth.status();
    if (absl::Status s =
            account.Pay(RangeIds(a, b), LaplaceCost(account, epsilon_));
        !s.ok()) {
      return s;
    }
    absl::StatusOr<double> noise =
        source.Laplace(1.0 / (epsilon_ * static_cast<double>(rows)));
    if (!noise.ok()) return noise.status();
    return Answered{std::clamp(*truth + *noise, 0.0, 1.0), *truth,
                    AnswerPath::kR3};
  }

  double epsilon() const override { return epsilon_; }

 private:
  AccuracyTarget target_;
  std::vector<Partition> partitions_;
  double epsilon_ = 0.0;
};

// One histogram over every partition (non-partitioned use case).
class SinglePmwEngine : public Engine {
 public:
  static absl::StatusOr<std::unique_ptr<SinglePmwEngine>> Create(
      DomainPtr domain, const PmwConfig& config,
      absl::Span<const Partition> data) {
    absl::StatusOr<PmwBypass> pmw = PmwBypass::Create(domain, config, data);
    if (!pmw.ok()) return pmw.status();
    return std::unique_ptr<SinglePmwEngine>(
        new SinglePmwEngine(*std::move(pmw)));
  }

  absl::Status AddPartition(const Partition&) override {
    return absl::FailedPreconditionError(
        "the single-histogram engine is built over a fixed dataset");
  }

  absl::StatusOr<Answered> Answer(const LinearQuery& query, int64_t, int64_t,
                                  BudgetAccount& account,
                                  NoiseSource& source) override {
    absl::StatusOr<QueryOutcome> outcome = pmw_.Answer(query, account, source);
    if (!outcome.ok()) return outcome.status();
    updates_ = pmw_.node().applied_updates;
    sv_inits_ = static_cast<int64_t>(pmw_.sv_inits());
    return Answered{outcome->value, outcome->true_answer, outcome->path};
  }

  const Histogram* histogram() const override {
    return &pmw_.node().histogram;
  }
  double epsilon() const override { return pmw_.epsilon(); }
  std::string warning() const override { return pmw_.warning(); }

 private:
  explicit SinglePmwEngine(PmwBypass pmw) : pmw_(std::move(pmw)) {}
  PmwBypass pmw_;
};

class TreeEngine : public Engine {
 public:
  explicit TreeEngine(TreeCache tree) : tree_(std::move(tree)) {}

  absl::Status AddPartition(const Partition& partition) override {
    return tree_.AddPartition(partition);
  }

  absl::StatusOr<Answered> Answer(const LinearQuery& query, int64_t a,
                                  int64_t b, BudgetAccount& account,
                                  NoiseSource& source) override {
    absl::StatusOr<TreeOutcome> outcome =
        tree_.Answer(query, a, b, account, source);
    if (!outcome.ok()) return outcome.status();
    updates_ += outcome->updates;
    if (outcome->sv_initialized) ++sv_inits_;
    epsilon_ = std::max(outcome->epsilon_sv, outcome->epsilon_lap);
    return Answered{outcome->value, outcome->true_answer, outcome->path};
  }

  double epsilon() const override { return epsilon_; }
  std::string warning() const override { return tree_.warning(); }

 private:
  TreeCache tree_;
  double epsilon_ = 0.0;
};

// Tree geometry with an exact cache per node; missed nodes get calibrated
// Laplace noise.
class TreeExactEngine : public Engine {
 public:
  TreeExactEngine(TreeCache tree, AccuracyTarget target,
                  std::shared_ptr<LaplaceAggCalibrator> calibrator)
      : tree_(std::move(tree)),
        target_(target),
        calibrator_(std::move(calibrator)) {}

  absl::Status AddPartition(const Partition& partition) override {
    return tree_.AddPartition(partition);
  }

  absl::StatusOr<Answered> Answer(const LinearQuery& query, int64_t a,
                                  int64_t b, BudgetAccount& account,
                                  NoiseSource& source) override {
    absl::StatusOr<std::vector<NodeId>> cover = tree_.Cover(a, b);
    if (!cover.ok()) return cover.status();
    std::vector<std::pair<double, uint64_t>> released;
    std::vector<std::pair<double, uint64_t>> truths;
    std::vector<NodeId> missed;
    uint64_t missed_rows = 0;
    std::vector<PartitionId> ids;
    for (const NodeId& node : *cover) {
      const uint64_t rows = tree_.NodeRows(node);
      if (rows == 0) {
        return absl::FailedPreconditionError(
            absl::StrCat("node ", NodeName(node), " holds no rows"));
      }
      truths.emplace_back(tree_.NodeTruth(query, node), rows);
      if (std::optional<double> hit = cache_.Peek(KeyOf(query, node))) {
        released.emplace_back(*hit, rows);
      } else {
        missed.push_back(node);
        missed_rows += rows;
        for (int64_t t = node.a; t <= node.b; ++t) ids.push_back(t);
      }
    }
    Answered answered;
    absl::StatusOr<double> truth = Aggregate(truths);
    if (!truth.ok()) return truth.status();
    answered.true_answer = *truth;
    answered.path = AnswerPath::kExactHit;
    if (!missed.empty()) {
      absl::StatusOr<double> eps = calibrator_->Epsilon(
          target_, static_cast<int64_t>(missed.size()), missed_rows);
      if (!eps.ok()) return eps.status();
      epsilon_ = *eps;
      if (absl::Status s = account.Pay(ids, LaplaceCost(account, *eps));
          !s.ok()) {
        return s;
      }
      for (const NodeId& node : missed) {
        const uint64_t rows = tree_.NodeRows(node);
        absl::StatusOr<double> noise =
            source.Laplace(1.0 / (*eps * static_cast<double>(rows)));
        if (!noise.ok()) return noise.status();
        const double value =
            std::clamp(tree_.NodeTruth(query, node) + *noise, 0.0, 1.0);
        cache_.Insert(KeyOf(query, node), value);
        released.emplace_back(value, rows);
      }
      answered.path = AnswerPath::kR3;
    }
    absl::StatusOr<double> value = Aggregate(released);
    if (!value.ok()) return value.status();
    answered.value = *value;
    return answered;
  }

  double epsilon() const override { return epsilon_; }

 private:
  // A node is only materialized once all its partitions have arrived, so
  // its data never changes; the tree index keeps stream trees apart.
  static CacheKey KeyOf(const LinearQuery& query, const NodeId& node) {
    return CacheKey{query.key(), node.a, node.b, node.tree};
  }

  TreeCache tree_;
  AccuracyTarget target_;
  std::shared_ptr<LaplaceAggCalibrator> calibrator_;
  ExactCache cache_;
  double epsilon_ = 0.0;
};

absl::StatusOr<std::unique_ptr<Engine>> MakeEngine(
    const ExperimentConfig& config, const DomainPtr& domain,
    absl::Span<const Partition> data) {
  const bool partitioned = config.use_case != UseCase::kNonPartitioned;
  switch (config.engine) {
    case EngineKind::kLaplace:
    case EngineKind::kExactCache:
      return std::unique_ptr<Engine>(
          new DirectLaplaceEngine(config.pmw.target));
    case EngineKind::kVanillaPmw:
    case EngineKind::kPmwBypass:
      if (!partitioned) {
        PmwConfig pmw = config.pmw;
        if (config.engine == EngineKind::kVanillaPmw) {
          pmw.heuristic.always_ready = true;
          pmw.external_updates = false;
        }
        absl::StatusOr<std::unique_ptr<SinglePmwEngine>> engine =
            SinglePmwEngine::Create(domain, pmw, data);
        if (!engine.ok()) return engine.status();
        return std::unique_ptr<Engine>(*std::move(engine));
      }
      break;
    case EngineKind::kTreeExactCache:
    case EngineKind::kFlatPmwBypass:
      break;
  }

  TreeConfig tree;
  tree.mode = config.use_case == UseCase::kPartitionedStreaming
                  ? TreeMode::kStream
                  : TreeMode::kBoundedStatic;
  tree.window = config.window;
  tree.pmw = config.pmw;
  tree.warm_start =
      config.warm_start && config.use_case == UseCase::kPartitionedStreaming;
  tree.leaves_only = config.engine == EngineKind::kFlatPmwBypass;
  tree.monte_carlo = MonteCarloConfig::ForBeta(config.pmw.target.beta);
  if (config.mc_trials > 0) tree.monte_carlo.trials = config.mc_trials;
  tree.calibration_seed = SplitMix(config.seed, kCalibrationSeed);
  auto calibrator = std::make_shared<LaplaceAggCalibrator>(
      tree.calibration_seed, tree.monte_carlo);
  absl::StatusOr<TreeCache> cache = TreeCache::Create(domain, tree, calibrator);
  if (!cache.ok()) return cache.status();
  if (config.engine == EngineKind::kTreeExactCache) {
    return std::unique_ptr<Engine>(new TreeExactEngine(
        *std::move(cache), config.pmw.target, std::move(calibrator)));
  }
  return std::unique_ptr<Engine>(new TreeEngine(*std::move(cache)));
}

RangeSpec MakeRange(const ExperimentConfig& config) {
  RangeSpec range;
  range.partitions = config.dataset.partitions;
  range.sd_window = config.sd_window;
  range.mean_window = config.mean_window;
  switch (config.use_case) {
    case UseCase::kNonPartitioned:
      range.law = RangeLaw::kStatic;
      range.max_window = config.dataset.partitions;
      range.a = 0;
      range.b = config.dataset.partitions - 1;
      break;
    case UseCase::kPartitionedStatic:
      range.max_window = config.window;
      if (config.mean_window > 0.0) {
        range.law = RangeLaw::kGaussianWindow;
      } else {
        range.law = RangeLaw::kStatic;
        range.a = 0;
        range.b = config.dataset.partitions - 1;
      }
      break;
    case UseCase::kPartitionedStreaming:
      range.law = RangeLaw::kStreamingLatest;
      range.max_window = config.window;
      break;
  }
  return range;
}

// Lazily materialized pool queries.
class QueryPool {
 public:
  explicit QueryPool(DomainPtr domain) : domain_(std::move(domain)) {}

  absl::StatusOr<const LinearQuery*> Get(uint64_t index) {
    auto it = cache_.find(index);
    if (it == cache_.end()) {
      absl::StatusOr<LinearQuery> query = ConjunctiveQueryAt(domain_, index);
      if (!query.ok()) return query.status();
      it = cache_.emplace(index, *std::move(query)).first;
    }
    return &it->second;
  }

 private:
  DomainPtr domain_;
  absl::flat_hash_map<uint64_t, LinearQuery> cache_;
};

// Spend of every partition in [a, b]; empty spends for unknown ids.
absl::StatusOr<std::vector<double>> SpendOver(const BudgetAccount& account,
                                              int64_t a, int64_t b) {
  std::vector<double> spend;
  for (int64_t t = a; t <= b; ++t) {
    absl::StatusOr<double> s = account.Spent(t);
    if (!s.ok()) return s.status();
    spend.push_back(*s);
  }
  return spend;
}

std::string Num(double x) { return absl::StrFormat("%.17g", x); }

}  // namespace

std::optional<int64_t> FirstConvergence(
    const std::vector<ValidationPoint>& points, double target) {
  for (const ValidationPoint& p : points) {
    if (p.accuracy >= target) return p.updates;
  }
  return std::nullopt;
}

double ValidationAccuracy(const Histogram& histogram,
                          const std::vector<LinearQuery>& queries,
                          const std::vector<double>& truths, double alpha) {
  if (queries.empty()) return 0.0;
  int64_t good = 0;
  for (size_t i = 0; i < queries.size(); ++i) {
    absl::StatusOr<double> estimate = EvalOnHistogram(queries[i], histogram);
    if (estimate.ok() && std::abs(*estimate - truths[i]) < alpha / 2.0) {
      ++good;
    }
  }
  return static_cast<double>(good) / static_cast<double>(queries.size());
}

absl::StatusOr<ExperimentResult> RunExperiment(const ExperimentConfig& config) {
  if (absl::Status s = ValidateExperimentConfig(config); !s.ok()) return s;
  absl::StatusOr<DomainPtr> domain = DataDomain::Create(config.attributes);
  if (!domain.ok()) return domain.status();
  absl::StatusOr<uint64_t> pool_size = ConjunctivePoolSize(**domain);
  if (!pool_size.ok()) return pool_size.status();

  absl::StatusOr<std::vector<Partition>> data = GenerateDataset(
      **domain, config.dataset, SplitMix(config.seed, kDatasetSeed));
  if (!data.ok()) return data.status();

  WorkloadSpec spec;
  spec.pool_size = *pool_size;
  spec.k_zipf = config.k_zipf;
  spec.queries = config.queries;
  spec.seed = SplitMix(config.seed, kWorkloadSeed);
  spec.range = MakeRange(config);
  absl::StatusOr<std::vector<WorkloadItem>> items = SampleWorkload(spec);
  if (!items.ok()) return items.status();

  absl::StatusOr<BudgetAccount> account =
      BudgetAccount::Create(config.privacy);
  if (!account.ok()) return account.status();

  const bool streaming = config.use_case == UseCase::kPartitionedStreaming;
  absl::StatusOr<std::unique_ptr<Engine>> engine =
      MakeEngine(config, *domain, *data);
  if (!engine.ok()) return engine.status();
  const bool needs_feed = config.use_case != UseCase::kNonPartitioned ||
                          config.engine == EngineKind::kLaplace ||
                          config.engine == EngineKind::kExactCache;
  int64_t arrived = 0;
  auto arrive_until = [&](int64_t count) -> absl::Status {
    for (; arrived < count; ++arrived) {
      if (absl::Status s = account->AddPartition((*data)[arrived].id);
          !s.ok()) {
        return s;
      }
      if (needs_feed) {
        if (absl::Status s = (*engine)->AddPartition((*data)[arrived]);
            !s.ok()) {
          return s;
        }
      }
    }
    return absl::OkStatus();
  };
  if (!streaming) {
    if (absl::Status s = arrive_until(config.dataset.partitions); !s.ok()) {
      return s;
    }
  }

  // Validation runs against the single histogram, with exact answers on the
  // pooled data.
  const Histogram* histogram = (*engine)->histogram();
  const bool validate = config.validation.enabled && histogram != nullptr;
  std::vector<LinearQuery> validation_queries;
  std::vector<double> validation_truths;
  if (validate) {
    std::mt19937_64 rng(SplitMix(config.seed, kValidationSeed));
    std::uniform_int_distribution<uint64_t> pick(0, *pool_size - 1);
    for (int64_t i = 0; i < config.validation.queries; ++i) {
      absl::StatusOr<LinearQuery> q = ConjunctiveQueryAt(*domain, pick(rng));
      if (!q.ok()) return q.status();
      absl::StatusOr<double> truth = EvalOnPartitions(*q, *data);
      if (!truth.ok()) return truth.status();
      validation_queries.push_back(*std::move(q));
      validation_truths.push_back(*truth);
    }
  }

  ExperimentResult result;
  ExperimentSummary& summary = result.summary;
  summary.queries_requested = config.queries;
  summary.pool_size = *pool_size;
  summary.warning = (*engine)->warning();

  int64_t next_mark = 0;
  auto maybe_validate = [&] {
    if (!validate) return;
    const int64_t updates = (*engine)->updates();
    if (updates < next_mark) return;
    result.validation.push_back(
        {updates, ValidationAccuracy(*histogram, validation_queries,
                                     validation_truths,
                                     config.pmw.target.alpha)});
    next_mark = (updates / config.validation.every + 1) *
                config.validation.every;
  };
  maybe_validate();

  const bool use_exact_cache =
      config.engine == EngineKind::kExactCache ||
      (config.exact_cache && config.engine != EngineKind::kLaplace);
  ExactCache exact;
  QueryPool pool(*domain);
  NoiseSource source = NoiseSource::Live(SplitMix(config.seed, kNoiseSeed));

  for (const WorkloadItem& item : *items) {
    if (streaming) {
      if (absl::Status s = arrive_until(item.available); !s.ok()) return s;
    }
    absl::StatusOr<const LinearQuery*> query = pool.Get(item.query_index);
    if (!query.ok()) return query.status();

    const auto start = std::chrono::steady_clock::now();
    absl::StatusOr<std::vector<double>> before =
        SpendOver(*account, item.a, item.b);
    if (!before.ok()) return before.status();

    const CacheKey key{(*query)->key(), item.a, item.b,
                       DatabaseVersion(item.b, arrived - 1)};
    Answered answered;
    std::optional<double> hit;
    if (use_exact_cache) hit = exact.Lookup(key);
    if (hit.has_value()) {
      answered.value = *hit;
      answered.path = AnswerPath::kExactHit;
      absl::StatusOr<double> truth = EvalOnPartitions(
          **query, absl::MakeConstSpan(*data).subspan(
                       item.a, item.b - item.a + 1));
      if (!truth.ok()) return truth.status();
      answered.true_answer = *truth;
    } else {
      absl::StatusOr<Answered> out = (*engine)->Answer(
          **query, item.a, item.b, *account, source);
      if (absl::IsResourceExhausted(out.status())) {
        summary.exhausted = true;
        break;
      }
      if (!out.ok()) return out.status();
      answered = *out;
      if (use_exact_cache) exact.Insert(key, answered.value);
    }

    absl::StatusOr<std::vector<double>> after =
        SpendOver(*account, item.a, item.b);
    if (!after.ok()) return after.status();
    const auto stop = std::chrono::steady_clock::now();

    MetricsRecord record;
    record.index = item.arrival;
    record.query_index = item.query_index;
    record.a = item.a;
    record.b = item.b;
    record.path = answered.path;
    for (size_t i = 0; i < after->size(); ++i) {
      record.charged = std::max(record.charged, (*after)[i] - (*before)[i]);
    }
    record.cumulative_max = account->MaxSpent();
    record.cumulative_mean = account->MeanSpent();
    record.updates = (*engine)->updates();
    record.value = answered.value;
    record.true_answer = answered.true_answer;
    record.elapsed_ns =
        std::chrono::duration<double, std::nano>(stop - start).count();
    result.metrics.push_back(record);

    switch (answered.path) {
      case AnswerPath::kExactHit:
        ++summary.exact_hits;
        break;
      case AnswerPath::kR1:
        ++summary.r1;
        break;
      case AnswerPath::kR2:
        ++summary.r2;
        break;
      case AnswerPath::kR3:
        ++summary.r3;
        break;
    }
    maybe_validate();
  }

  summary.queries_served = static_cast<int64_t>(result.metrics.size());
  summary.sv_inits = (*engine)->sv_inits();
  summary.updates = (*engine)->updates();
  summary.convergence_updates = FirstConvergence(
      result.validation, config.validation.target_accuracy);
  summary.final_max = account->MaxSpent();
  summary.final_mean = account->MeanSpent();
  summary.epsilon = (*engine)->epsilon();
  for (PartitionId id : account->partitions()) {
    absl::StatusOr<double> spent = account->Spent(id);
    if (!spent.ok()) return spent.status();
    result.ledger.emplace_back(id, *spent);
  }
  return result;
}

std::string MetricsCsv(const ExperimentResult& result) {
  std::string out =
      "index,query_index,a,b,path,charged,cumulative_max,cumulative_mean,"
      "updates,value,true_answer\n";
  for (const MetricsRecord& r : result.metrics) {
    absl::StrAppend(&out, r.index, ",", r.query_index, ",", r.a, ",", r.b,
                    ",", AnswerPathName(r.path), ",", Num(r.charged), ",",
                    Num(r.cumulative_max), ",", Num(r.cumulative_mean), ",",
                    r.updates, ",", Num(r.value), ",", Num(r.true_answer),
                    "\n");
  }
  return out;
}

absl::Status WriteExperimentOutputs(const ExperimentResult& result,
                                    const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    return absl::PermissionDeniedError(
        absl::StrCat("cannot create ", dir, ": ", ec.message()));
  }
  auto write = [&](const std::string& name,
                   const std::string& body) -> absl::Status {
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    out << body;
    out.close();
    if (!out) return absl::DataLossError(absl::StrCat("failed writing ", path));
    return absl::OkStatus();
  };

  std::string timing = "index,path,elapsed_ns\n";
  for (const MetricsRecord& r : result.metrics) {
    absl::StrAppend(&timing, r.index, ",", AnswerPathName(r.path), ",",
                    absl::StrFormat("%.0f", r.elapsed_ns), "\n");
  }
  std::string ledger = "partition,spent_epsilon\n";
  for (const auto& [id, spent] : result.ledger) {
    absl::StrAppend(&ledger, id, ",", Num(spent), "\n");
  }
  std::string validation = "updates,accuracy\n";
  for (const ValidationPoint& p : result.validation) {
    absl::StrAppend(&validation, p.updates, ",", Num(p.accuracy), "\n");
  }
  const ExperimentSummary& s = result.summary;
  std::string summary = "key,value\n";
  absl::StrAppend(
      &summary, "queries_requested,", s.queries_requested, "\n",
      "queries_served,", s.queries_served, "\n", "exhausted,",
      s.exhausted ? "true" : "false", "\n", "exact_hits,", s.exact_hits,
      "\n", "r1,", s.r1, "\n", "r2,", s.r2, "\n", "r3,", s.r3, "\n",
      "sv_inits,", s.sv_inits, "\n", "updates,", s.updates, "\n",
      "convergence_updates,",
      s.convergence_updates ? absl::StrCat(*s.convergence_updates)
                            : std::string("not_converged"),
      "\n", "final_max_spent,", Num(s.final_max), "\n", "final_mean_spent,",
      Num(s.final_mean), "\n", "pool_size,", s.pool_size, "\n",
      "last_epsilon,", Num(s.epsilon), "\n");

  if (absl::Status st = write("metrics.csv", MetricsCsv(result)); !st.ok()) {
    return st;
  }
  if (absl::Status st = write("timing.csv", timing); !st.ok()) return st;
  if (absl::Status st = write("ledger.csv", ledger); !st.ok()) return st;
  if (absl::Status st = write("validation.csv", validation); !st.ok()) {
    return st;
  }
  return write("summary.csv", summary);
}

}  // namespace pmwcache
