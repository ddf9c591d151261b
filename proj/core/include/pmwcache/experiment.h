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

// Experiment harness: a JSON-configured dataset and workload replayed
// through one engine, with per-query budget metrics and periodic histogram
// validation.

#ifndef PMWCACHE_EXPERIMENT_H_
#define PMWCACHE_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pmwcache/accountant.h"
#include "pmwcache/domain.h"
#include "pmwcache/mechanisms.h"
#include "pmwcache/pmw_bypass.h"
#include "pmwcache/workload.h"

namespace pmwcache {

enum class UseCase { kNonPartitioned, kPartitionedStatic, kPartitionedStreaming };

enum class EngineKind {
  kPmwBypass,      // "pmw-bypass": single histogram, or a tree when partitioned
  kVanillaPmw,     // "pmw": always-ready heuristic, no external updates
  kLaplace,        // "laplace": direct noise, no cache
  kExactCache,     // "exact-cache": direct noise behind an exact cache
  kTreeExactCache, // "tree-exact-cache": exact caches per tree node
  kFlatPmwBypass,  // "flat-pmw-bypass": one histogram per partition
};

absl::StatusOr<UseCase> ParseUseCase(const std::string& name);
absl::StatusOr<EngineKind> ParseEngineKind(const std::string& name);
std::string UseCaseName(UseCase use_case);
std::string EngineKindName(EngineKind engine);

struct ValidationConfig {
  bool enabled = true;
  int64_t queries = 500;
  // Evaluate after every `every` applied histogram updates.
  int64_t every = 250;
  double target_accuracy = 0.9;
};

struct ExperimentConfig {
  std::string name = "experiment";
  UseCase use_case = UseCase::kNonPartitioned;
  EngineKind engine = EngineKind::kPmwBypass;
  // Put an exact-match cache in front of the engine (ignored by "laplace").
  bool exact_cache = true;
  uint64_t seed = 1;

  std::vector<Attribute> attributes = {
      {"sex", 2}, {"age", 4}, {"positive", 2}, {"symptoms", 8}};
  DatasetSpec dataset = {10, 100'000, DatasetLaw::kDrift, 1.0, 0.05};

  int64_t queries = 35'000;
  double k_zipf = 0.0;
  // Partitioned use cases: largest window (power of two), Gaussian window
  // mean, and the static range when mean_window is 0.
  int64_t window = 16;
  double mean_window = 8.0;
  double sd_window = 5.0;

  AccountOptions privacy;
  PmwConfig pmw;
  bool warm_start = true;
  // 0 selects the Hoeffding sample size.
  int64_t mc_trials = 0;

  ValidationConfig validation;
};

// Parses the JSON form; unknown keys and bad values are reported with their
// dotted path ("pmw.tau: ..."). Missing keys keep their defaults.
absl::StatusOr<ExperimentConfig> ParseExperimentConfig(const std::string& json);
absl::Status ValidateExperimentConfig(const ExperimentConfig& config);
std::string ExperimentConfigToJson(const ExperimentConfig& config);

struct MetricsRecord {
  int64_t index = 0;
  uint64_t query_index = 0;
  int64_t a = 0;
  int64_t b = 0;
  AnswerPath path = AnswerPath::kR3;
  // Largest charge any single partition received for this query.
  double charged = 0.0;
  double cumulative_max = 0.0;
  double cumulative_mean = 0.0;
  int64_t updates = 0;
  double value = 0.0;
  double true_answer = 0.0;
  double elapsed_ns = 0.0;
};

struct ValidationPoint {
  int64_t updates = 0;
  double accuracy = 0.0;
};

struct ExperimentSummary {
  int64_t queries_requested = 0;
  int64_t queries_served = 0;
  bool exhausted = false;
  int64_t exact_hits = 0;
  int64_t r1 = 0;
  int64_t r2 = 0;
  int64_t r3 = 0;
  int64_t sv_inits = 0;
  int64_t updates = 0;
  std::optional<int64_t> convergence_updates;
  double final_max = 0.0;
  double final_mean = 0.0;
  uint64_t pool_size = 0;
  double epsilon = 0.0;
  std::string warning;
};

struct ExperimentResult {
  std::vector<MetricsRecord> metrics;
  std::vector<ValidationPoint> validation;
  std::vector<std::pair<PartitionId, double>> ledger;
  ExperimentSummary summary;
};

absl::StatusOr<ExperimentResult> RunExperiment(const ExperimentConfig& config);

// First evaluation reaching `target`; nullopt when none does.
std::optional<int64_t> FirstConvergence(
    const std::vector<ValidationPoint>& points, double target);

// Fraction of `queries` whose histogram answer is within alpha/2 of truth.
double ValidationAccuracy(const Histogram& histogram,
                          const std::vector<LinearQuery>& queries,
                          const std::vector<double>& truths, double alpha);

// metrics.csv (deterministic), timing.csv, ledger.csv, validation.csv and
// summary.csv under `dir`, which is created if needed.
absl::Status WriteExperimentOutputs(const ExperimentResult& result,
                                    const std::string& dir);
std::string MetricsCsv(const ExperimentResult& result);

}  // namespace pmwcache

#endif  // PMWCACHE_EXPERIMENT_H_
