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

// A dyadic tree of PMW-Bypass histograms over time partitions. A range query
// is split into the minimal set of tree nodes; the largest contiguous run of
// heuristic-ready nodes shares one sparse vector, and every other node is
// answered with calibrated Laplace noise.
//
// Bounded mode holds one tree over [0, T). Stream mode holds a family of
// overlapping trees, tree k spanning [kT, (k+2)T), so that any window of at
// most T partitions fits in one tree.

#ifndef PMWCACHE_TREE_CACHE_H_
#define PMWCACHE_TREE_CACHE_H_

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "pmwcache/accountant.h"
#include "pmwcache/domain.h"
#include "pmwcache/mechanisms.h"
#include "pmwcache/pmw_bypass.h"
#include "pmwcache/sparse_vector.h"

namespace pmwcache {

// Node covering partitions [a, b] of tree `tree`.
struct NodeId {
  int64_t tree = 0;
  int64_t a = 0;
  int64_t b = 0;

  int64_t length() const { return b - a + 1; }
  auto operator<=>(const NodeId&) const = default;
};

std::string NodeName(const NodeId& node);

// Minimal set of nodes tiling [a, b], left to right. Nodes are aligned to
// `offset`: a node of length 2^k starts at offset + j 2^k. No node is longer
// than `max_length` (a power of two). Errors when b - a + 1 > max_length or
// a < offset.
absl::StatusOr<std::vector<NodeId>> SplitRange(int64_t a, int64_t b,
                                               int64_t offset,
                                               int64_t max_length,
                                               int64_t tree = 0);

// Bounded-tree form: offset 0, window at most T.
absl::StatusOr<std::vector<NodeId>> SplitQuery(int64_t a, int64_t b,
                                               int64_t T);

// Largest k with [a, b] inside [kT, (k+2)T - 1].
absl::StatusOr<int64_t> LocateTree(int64_t a, int64_t b, int64_t T);

// Longest run of nodes (by count) in which each node starts right after the
// previous one ends. `nodes` must be sorted by start. Ties go to the
// leftmost run.
std::vector<NodeId> LargestContiguousSubset(absl::Span<const NodeId> nodes);

// Sum_i (n_i / Sum_j n_j) value_i.
absl::StatusOr<double> Aggregate(
    absl::Span<const std::pair<double, uint64_t>> results);

// (ceil(log2 T) + 1) times the single-histogram bound.
absl::StatusOr<double> TreeConvergenceBound(int64_t T, uint64_t domain_size,
                                            double lr, double tau,
                                            double alpha);
// Stream family with T = 2^m: (m + 2) times the single-histogram bound, per
// tree.
absl::StatusOr<double> StreamConvergenceBound(int64_t T, uint64_t domain_size,
                                              double lr, double tau,
                                              double alpha);

Histogram WarmStartLeaf(const Histogram& previous);
absl::StatusOr<Histogram> WarmStartInternal(
    absl::Span<const Histogram> children);

enum class TreeMode { kBoundedStatic, kStream };

struct TreeConfig {
  TreeMode mode = TreeMode::kBoundedStatic;
  // Largest queryable window; a power of two.
  int64_t window = 16;
  PmwConfig pmw;
  // Stream mode only: new leaves copy the closest earlier leaf and new
  // internal nodes average their children.
  bool warm_start = false;
  // Flat baseline: one histogram per partition, no internal nodes.
  bool leaves_only = false;
  // Laplace aggregation calibration. trials = 0 selects the Hoeffding size.
  MonteCarloConfig monte_carlo;
  uint64_t calibration_seed = 0x5eed;

  absl::StatusOr<std::string> Validate() const;
};

struct TreeOutcome {
  double value = 0.0;
  double true_answer = 0.0;
  // R1: every node was served by a passing sparse vector. R2: the sparse
  // vector failed. R3: otherwise (at least one Laplace node).
  AnswerPath path = AnswerPath::kR3;
  std::vector<NodeId> cover;
  std::vector<NodeId> sv_nodes;
  std::vector<NodeId> lap_nodes;
  std::optional<SvResult> sv_result;
  bool sv_initialized = false;
  double epsilon_sv = 0.0;
  double epsilon_lap = 0.0;
  int64_t updates = 0;
};

class TreeCache {
 public:
  // `calibrator` may be shared between caches; null creates a private one.
  static absl::StatusOr<TreeCache> Create(
      DomainPtr domain, TreeConfig config,
      std::shared_ptr<LaplaceAggCalibrator> calibrator = nullptr);

  const TreeConfig& config() const { return config_; }
  const std::string& warning() const { return warning_; }
  int64_t num_partitions() const {
    return static_cast<int64_t>(partitions_.size());
  }

  // Partitions arrive in order: the id must equal num_partitions(). Bounded
  // mode accepts at most `window` partitions.
  absl::Status AddPartition(Partition partition);

  absl::StatusOr<std::vector<NodeId>> Cover(int64_t a, int64_t b) const;
  uint64_t NodeRows(const NodeId& node) const;
  double NodeTruth(const LinearQuery& query, const NodeId& node) const;

  // Refusals return ResourceExhausted; neither the cache nor the account is
  // changed.
  absl::StatusOr<TreeOutcome> Answer(const LinearQuery& query, int64_t a,
                                     int64_t b, BudgetAccount& account,
                                     NoiseSource& source);

  size_t num_nodes() const { return nodes_.size(); }
  const PmwNodeState* FindNode(const NodeId& node) const;
  bool HasLiveSv(absl::Span<const NodeId> nodes) const;

  std::string Snapshot() const;
  absl::Status Restore(const std::string& text);

 private:
  using NodeMap = std::map<NodeId, PmwNodeState>;

  TreeCache(DomainPtr domain, TreeConfig config,
            std::shared_ptr<LaplaceAggCalibrator> calibrator)
      : domain_(std::move(domain)),
        config_(std::move(config)),
        calibrator_(std::move(calibrator)) {}

  std::vector<PartitionId> PartitionsOf(const NodeId& node) const;
  // Returns the node state, materializing it (and, for warm starts, its
  // sources) into `staged` when it does not exist yet.
  const PmwNodeState& Materialize(const NodeId& node, NodeMap& staged);
  const PmwNodeState* FindIn(const NodeId& node, const NodeMap& staged) const;
  PmwNodeState FreshNode() const;
  std::optional<PmwNodeState> WarmLeafSource(const NodeId& node,
                                             const NodeMap& staged) const;

  DomainPtr domain_;
  TreeConfig config_;
  std::string warning_;
  std::shared_ptr<LaplaceAggCalibrator> calibrator_;
  std::vector<Partition> partitions_;
  NodeMap nodes_;
  std::map<std::vector<NodeId>, SvState> live_svs_;
};

}  // namespace pmwcache

#endif  // PMWCACHE_TREE_CACHE_H_
