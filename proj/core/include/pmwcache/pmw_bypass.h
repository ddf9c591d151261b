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

// Private multiplicative weights with a bypass branch. A per-bin readiness
// heuristic decides whether a query goes through the sparse-vector test
// against the histogram (paths R1/R2) or straight to the noise mechanism
// (path R3), whose answer may still train the histogram.

#ifndef PMWCACHE_PMW_BYPASS_H_
#define PMWCACHE_PMW_BYPASS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "pmwcache/accountant.h"
#include "pmwcache/domain.h"
#include "pmwcache/mechanisms.h"
#include "pmwcache/sparse_vector.h"

namespace pmwcache {

enum class NoiseKind { kLaplace, kGaussian };
enum class AnswerPath { kExactHit, kR1, kR2, kR3 };
enum class UpdateKind { kNone, kInternal, kExternal };

const char* AnswerPathName(AnswerPath path);

struct HeuristicConfig {
  int64_t c0 = 100;
  int64_t s0 = 5;
  // Vanilla PMW: every query is treated as ready.
  bool always_ready = false;

  absl::Status Validate() const;
};

// Per-bin update counters c(v) and thresholds C(v). A query is ready when
// every bin it touches has c(v) >= C(v).
class HeuristicState {
 public:
  static HeuristicState Create(size_t bins, const HeuristicConfig& config);
  static absl::StatusOr<HeuristicState> FromParts(
      const HeuristicConfig& config, std::vector<int64_t> counters,
      std::vector<int64_t> thresholds);

  const HeuristicConfig& config() const { return config_; }
  const std::vector<int64_t>& counters() const { return counters_; }
  const std::vector<int64_t>& thresholds() const { return thresholds_; }

  bool IsReady(const LinearQuery& query) const;
  // C(v) += S0 for the touched bins with the smallest c(v).
  void Penalize(const LinearQuery& query);
  // c(v) += 1 for every touched bin.
  void RecordUpdate(const LinearQuery& query);

 private:
  HeuristicConfig config_;
  std::vector<int64_t> counters_;
  std::vector<int64_t> thresholds_;
};

struct ScheduleConfig {
  double initial_lr = 0.25;
  double final_lr = 0.025;
  // Applied updates over which lr decays geometrically from initial to
  // final. 0 keeps lr at its initial value.
  int64_t decay_updates = 2000;

  static ScheduleConfig Constant(double lr) { return {lr, lr, 0}; }
  absl::Status Validate() const;
};

class LearningRateSchedule {
 public:
  explicit LearningRateSchedule(ScheduleConfig config, int64_t position = 0)
      : config_(config), position_(position) {}

  const ScheduleConfig& config() const { return config_; }
  int64_t position() const { return position_; }
  double lr() const;
  void Advance() { ++position_; }

 private:
  ScheduleConfig config_;
  int64_t position_;
};

// g(v) = h(v) exp(s q(v)), renormalized.
Histogram MwUpdate(const Histogram& h, const LinearQuery& q, double s);

// +lr above estimate + tau alpha, -lr below estimate - tau alpha, else 0.
double ExternalUpdateSign(double r3, double estimate, double tau, double alpha,
                          double lr);

// ln(N) / (lr (tau alpha - lr) / 2). Requires lr/alpha < tau <= 1/2.
absl::StatusOr<double> ConvergenceBound(uint64_t domain_size, double lr,
                                        double tau, double alpha);

// The trainable state behind one histogram: weights, heuristic and schedule.
struct PmwNodeState {
  Histogram histogram;
  HeuristicState heuristic;
  LearningRateSchedule schedule;
  int64_t applied_updates = 0;

  static PmwNodeState Fresh(DomainPtr domain, const HeuristicConfig& heuristic,
                            const ScheduleConfig& schedule);

  double lr() const { return schedule.lr(); }
  bool IsReady(const LinearQuery& query) const;
  // A nonzero step updates the histogram, counts the touched bins and
  // advances the schedule. A zero step is a no-op.
  void ApplyUpdate(const LinearQuery& query, double step);
};

// Versioned text form of a node state, round-tripping weights exactly.
std::string SerializeNodeState(const PmwNodeState& state);
absl::StatusOr<PmwNodeState> ParseNodeState(DomainPtr domain,
                                            const std::string& text);

struct PmwConfig {
  AccuracyTarget target;
  double tau = 0.05;
  ScheduleConfig schedule;
  HeuristicConfig heuristic;
  NoiseKind noise = NoiseKind::kLaplace;
  bool external_updates = true;
  // Accept parameters that violate lr/alpha < tau <= 1/2.
  bool allow_empirical_params = false;

  // Also returns the warning text when a violation is tolerated.
  absl::StatusOr<std::string> Validate() const;
};

struct QueryOutcome {
  double value = 0.0;
  AnswerPath path = AnswerPath::kR3;
  // Nominal pure-DP charge of the path: 0, 4 eps or eps.
  double charged = 0.0;
  // 3 eps when this query also initialized the first sparse vector.
  double sv_init_charge = 0.0;
  UpdateKind update = UpdateKind::kNone;
  double step = 0.0;
  double estimate = 0.0;
  double true_answer = 0.0;

  double total_charge() const { return charged + sv_init_charge; }
};

// PMW-Bypass over a fixed set of partitions. Every payment names all of
// them.
class PmwBypass {
 public:
  static absl::StatusOr<PmwBypass> Create(DomainPtr domain,
                                          const PmwConfig& config,
                                          absl::Span<const Partition> data);

  const PmwConfig& config() const { return config_; }
  const std::string& warning() const { return warning_; }
  double epsilon() const { return epsilon_; }
  double sigma() const { return sigma_; }
  uint64_t rows() const { return rows_; }
  const std::vector<PartitionId>& partitions() const { return partitions_; }
  const PmwNodeState& node() const { return node_; }
  PmwNodeState& mutable_node() { return node_; }
  const std::optional<SvState>& sv() const { return sv_; }
  uint64_t sv_inits() const { return sv_inits_; }

  double TrueAnswer(const LinearQuery& query) const;

  // Refusals return ResourceExhausted and leave this object, the account and
  // the noise source untouched.
  absl::StatusOr<QueryOutcome> Answer(const LinearQuery& query,
                                      BudgetAccount& account,
                                      NoiseSource& source);

  std::string Snapshot() const;
  absl::Status Restore(const std::string& text);

 private:
  PmwBypass(DomainPtr domain, PmwConfig config, PmwNodeState node)
      : domain_(std::move(domain)),
        config_(std::move(config)),
        node_(std::move(node)) {}

  Cost SvInitCost(const BudgetAccount& account) const;
  Cost ReleaseCost(const BudgetAccount& account) const;
  Cost R2Cost(const BudgetAccount& account) const;
  absl::StatusOr<double> ReleaseNoise(NoiseSource& source) const;

  DomainPtr domain_;
  PmwConfig config_;
  std::string warning_;
  PmwNodeState node_;
  std::vector<PartitionId> partitions_;
  std::vector<uint64_t> pooled_;
  uint64_t rows_ = 0;
  double epsilon_ = 0.0;
  double sigma_ = 0.0;
  std::optional<SvState> sv_;
  uint64_t sv_inits_ = 0;
};

}  // namespace pmwcache

#endif  // PMWCACHE_PMW_BYPASS_H_
