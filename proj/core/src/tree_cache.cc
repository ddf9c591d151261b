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

#include "pmwcache/tree_cache.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"

namespace pmwcache {
namespace {

bool IsPowerOfTwo(int64_t x) {
  return x > 0 && std::has_single_bit(static_cast<uint64_t>(x));
}

}  // namespace

std::string NodeName(const NodeId& node) {
  return absl::StrCat(node.tree, ":[", node.a, ",", node.b, "]");
}

absl::StatusOr<std::vector<NodeId>> SplitRange(int64_t a, int64_t b,
                                               int64_t offset,
                                               int64_t max_length,
                                               int64_t tree) {
  if (!IsPowerOfTwo(max_length)) {
    return absl::InvalidArgumentError("node length bound must be 2^k");
  }
  if (a < offset || b < a) {
    return absl::InvalidArgumentError(
        absl::StrCat("invalid range [", a, ",", b, "] at offset ", offset));
  }
  if (b - a + 1 > max_length) {
    return absl::OutOfRangeError(absl::StrCat(
        "window [", a, ",", b, "] is longer than ", max_length));
  }
  // Greedy from the left: the longest aligned node that fits is always part
  // of the minimal cover.
  std::vector<NodeId> cover;
  int64_t x = a;
  while (x <= b) {
    int64_t length = max_length;
    while ((x - offset) % length != 0 || x + length - 1 > b) length /= 2;
    cover.push_back({tree, x, x + length - 1});
    x += length;
  }
  return cover;
}

absl::StatusOr<std::vector<NodeId>> SplitQuery(int64_t a, int64_t b,
                                               int64_t T) {
  if (b >= T) {
    return absl::OutOfRangeError(
        absl::StrCat("partition ", b, " is outside the tree of size ", T));
  }
  return SplitRange(a, b, 0, T);
}

absl::StatusOr<int64_t> LocateTree(int64_t a, int64_t b, int64_t T) {
  if (!IsPowerOfTwo(T) || a < 0 || b < a) {
    return absl::InvalidArgumentError("invalid range or window");
  }
  if (b - a + 1 > T) {
    return absl::OutOfRangeError(
        absl::StrCat("window [", a, ",", b, "] is longer than ", T));
  }
  // a < (k+1)T for k = a/T, and b <= a + T - 1 < (k+2)T.
  return a / T;
}

std::vector<NodeId> LargestContiguousSubset(absl::Span<const NodeId> nodes) {
  size_t best_start = 0;
  size_t best_length = 0;
  size_t start = 0;
  for (size_t i = 0; i <= nodes.size(); ++i) {
    const bool breaks = i == nodes.size() ||
                        (i > start && nodes[i].a != nodes[i - 1].b + 1);
    if (!breaks) continue;
    if (i - start > best_length) {
      best_start = start;
      best_length = i - start;
    }
    start = i;
  }
  return std::vector<NodeId>(nodes.begin() + best_start,
                             nodes.begin() + best_start + best_length);
}

absl::StatusOr<double> Aggregate(
    absl::Span<const std::pair<double, uint64_t>> results) {
  uint64_t total = 0;
  for (const auto& [value, n] : results) total += n;
  if (total == 0) {
    return absl::InvalidArgumentError("aggregate over zero rows");
  }
  double sum = 0.0;
  for (const auto& [value, n] : results) {
    sum += static_cast<double>(n) / static_cast<double>(total) * value;
  }
  return sum;
}

absl::StatusOr<double> TreeConvergenceBound(int64_t T, uint64_t domain_size,
                                            double lr, double tau,
                                            double alpha) {
  if (T < 1) return absl::InvalidArgumentError("T must be positive");
  absl::StatusOr<double> single = ConvergenceBound(domain_size, lr, tau, alpha);
  if (!single.ok()) return single.status();
  const int levels = std::bit_width(static_cast<uint64_t>(T - 1)) + 1;
  return levels * *single;
}

absl::StatusOr<double> StreamConvergenceBound(int64_t T, uint64_t domain_size,
                                              double lr, double tau,
                                              double alpha) {
  if (!IsPowerOfTwo(T)) return absl::InvalidArgumentError("T must be 2^m");
  absl::StatusOr<double> single = ConvergenceBound(domain_size, lr, tau, alpha);
  if (!single.ok()) return single.status();
  const int m = std::countr_zero(static_cast<uint64_t>(T));
  return (m + 2) * *single;
}

Histogram WarmStartLeaf(const Histogram& previous) { return previous; }

absl::StatusOr<Histogram> WarmStartInternal(
    absl::Span<const Histogram> children) {
  if (children.empty()) return absl::InvalidArgumentError("no children");
  std::vector<double> mean(children[0].size(), 0.0);
  for (const Histogram& child : children) {
    if (!SameDomain(child.domain(), children[0].domain())) {
      return absl::InvalidArgumentError("children have different domains");
    }
    for (size_t v = 0; v < mean.size(); ++v) mean[v] += child[v];
  }
  for (double& w : mean) w /= static_cast<double>(children.size());
  return Histogram::FromWeights(children[0].domain(), std::move(mean));
}

absl::StatusOr<std::string> TreeConfig::Validate() const {
  if (!IsPowerOfTwo(window)) {
    return absl::InvalidArgumentError(
        absl::StrCat("tree window must be a power of two, got ", window));
  }
  if (pmw.noise != NoiseKind::kLaplace) {
    return absl::InvalidArgumentError("tree caches only use Laplace noise");
  }
  if (pmw.heuristic.always_ready) {
    return absl::InvalidArgumentError(
        "tree caches need the readiness heuristic");
  }
  if (monte_carlo.trials != 0) {
    if (absl::Status s = monte_carlo.Validate(pmw.target.beta); !s.ok()) {
      return s;
    }
  }
  return pmw.Validate();
}

absl::StatusOr<TreeCache> TreeCache::Create(
    DomainPtr domain, TreeConfig config,
    std::shared_ptr<LaplaceAggCalibrator> calibrator) {
  absl::StatusOr<std::string> warning = config.Validate();
  if (!warning.ok()) return warning.status();
  if (calibrator == nullptr) {
    calibrator = std::make_shared<LaplaceAggCalibrator>(
        config.calibration_seed, config.monte_carlo);
  }
  TreeCache cache(std::move(domain), std::move(config), std::move(calibrator));
  cache.warning_ = *std::move(warning);
  return cache;
}

absl::Status TreeCache::AddPartition(Partition partition) {
  if (partition.id != num_partitions()) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected partition ", num_partitions(), ", got ",
                     partition.id));
  }
  if (partition.counts.size() != domain_->size()) {
    return absl::InvalidArgumentError("partition does not match the domain");
  }
  if (config_.mode == TreeMode::kBoundedStatic &&
      num_partitions() >= config_.window) {
    return absl::OutOfRangeError(absl::StrCat(
        "bounded tree holds at most ", config_.window, " partitions"));
  }
  partitions_.push_back(std::move(partition));
  return absl::OkStatus();
}

absl::StatusOr<std::vector<NodeId>> TreeCache::Cover(int64_t a,
                                                     int64_t b) const {
  if (a < 0 || b < a || b >= num_partitions()) {
    return absl::OutOfRangeError(
        absl::StrCat("range [", a, ",", b, "] outside the ", num_partitions(),
                     " available partitions"));
  }
  const int64_t T = config_.window;
  if (config_.leaves_only) {
    if (b - a + 1 > T) {
      return absl::OutOfRangeError(
          absl::StrCat("window [", a, ",", b, "] is longer than ", T));
    }
    int64_t tree = 0;
    if (config_.mode == TreeMode::kStream) {
      absl::StatusOr<int64_t> located = LocateTree(a, b, T);
      if (!located.ok()) return located.status();
      tree = *located;
    }
    std::vector<NodeId> leaves;
    for (int64_t t = a; t <= b; ++t) leaves.push_back({tree, t, t});
    return leaves;
  }
  if (config_.mode == TreeMode::kBoundedStatic) return SplitQuery(a, b, T);
  absl::StatusOr<int64_t> tree = LocateTree(a, b, T);
  if (!tree.ok()) return tree.status();
  return SplitRange(a, b, *tree * T, 2 * T, *tree);
}

std::vector<PartitionId> TreeCache::PartitionsOf(const NodeId& node) const {
  std::vector<PartitionId> ids;
  for (int64_t t = node.a; t <= node.b; ++t) ids.push_back(t);
  return ids;
}

uint64_t TreeCache::NodeRows(const NodeId& node) const {
  uint64_t rows = 0;
  for (int64_t t = node.a; t <= node.b; ++t) rows += partitions_[t].rows;
  return rows;
}

double TreeCache::NodeTruth(const LinearQuery& query,
                            const NodeId& node) const {
  double count = 0.0;
  for (int64_t t = node.a; t <= node.b; ++t) {
    count += WeightedCount(query, partitions_[t].counts);
  }
  return count / static_cast<double>(NodeRows(node));
}

const PmwNodeState* TreeCache::FindNode(const NodeId& node) const {
  auto it = nodes_.find(node);
  return it == nodes_.end() ? nullptr : &it->second;
}

const PmwNodeState* TreeCache::FindIn(const NodeId& node,
                                      const NodeMap& staged) const {
  if (const PmwNodeState* found = FindNode(node)) return found;
  auto it = staged.find(node);
  return it == staged.end() ? nullptr : &it->second;
}

bool TreeCache::HasLiveSv(absl::Span<const NodeId> nodes) const {
  return live_svs_.contains(std::vector<NodeId>(nodes.begin(), nodes.end()));
}

PmwNodeState TreeCache::FreshNode() const {
  return PmwNodeState::Fresh(domain_, config_.pmw.heuristic,
                             config_.pmw.schedule);
}

std::optional<PmwNodeState> TreeCache::WarmLeafSource(
    const NodeId& node, const NodeMap& staged) const {
  const int64_t T = config_.window;
  for (int64_t p = node.a - 1; p >= 0; --p) {
    // Leaves of partition p live in trees p/T and p/T - 1; prefer the
    // node's own tree.
    std::vector<int64_t> trees = {node.tree, p / T, p / T - 1};
    for (int64_t tree : trees) {
      if (tree < 0) continue;
      if (const PmwNodeState* found = FindIn({tree, p, p}, staged)) {
        return *found;
      }
    }
  }
  return std::nullopt;
}

const PmwNodeState& TreeCache::Materialize(const NodeId& node,
                                           NodeMap& staged) {
  if (const PmwNodeState* found = FindIn(node, staged)) return *found;
  const bool warm = config_.warm_start && config_.mode == TreeMode::kStream;
  if (!warm) return staged.emplace(node, FreshNode()).first->second;

  if (node.length() == 1) {
    std::optional<PmwNodeState> source = WarmLeafSource(node, staged);
    if (!source.has_value()) {
      return staged.emplace(node, FreshNode()).first->second;
    }
    PmwNodeState copy{WarmStartLeaf(source->histogram), source->heuristic,
                      source->schedule, 0};
    return staged.emplace(node, std::move(copy)).first->second;
  }

  const int64_t half = node.length() / 2;
  const PmwNodeState left =
      Materialize({node.tree, node.a, node.a + half - 1}, staged);
  const PmwNodeState right =
      Materialize({node.tree, node.a + half, node.b}, staged);
  const Histogram children[] = {left.histogram, right.histogram};
  Histogram mean = *WarmStartInternal(children);
  std::vector<int64_t> counters(domain_->size());
  std::vector<int64_t> thresholds(domain_->size());
  for (size_t v = 0; v < counters.size(); ++v) {
    counters[v] = std::min(left.heuristic.counters()[v],
                           right.heuristic.counters()[v]);
    thresholds[v] = std::max(left.heuristic.thresholds()[v],
                             right.heuristic.thresholds()[v]);
  }
  HeuristicState heuristic =
      *HeuristicState::FromParts(config_.pmw.heuristic, std::move(counters),
                                 std::move(thresholds));
  LearningRateSchedule schedule(
      config_.pmw.schedule,
      std::min(left.schedule.position(), right.schedule.position()));
  PmwNodeState state{std::move(mean), std::move(heuristic), schedule, 0};
  return staged.emplace(node, std::move(state)).first->second;
}

absl::StatusOr<TreeOutcome> TreeCache::Answer(const LinearQuery& query,
                                              int64_t a, int64_t b,
                                              BudgetAccount& account,
                                              NoiseSource& source) {
  if (!SameDomain(query.domain(), domain_)) {
    return absl::InvalidArgumentError("query domain does not match");
  }
  if (account.mode() != AccountingMode::kPureDp) {
    return absl::FailedPreconditionError(
        "tree caches use pure-DP accounting");
  }
  absl::StatusOr<std::vector<NodeId>> cover = Cover(a, b);
  if (!cover.ok()) return cover.status();
  for (int64_t t = a; t <= b; ++t) {
    if (partitions_[t].rows == 0) {
      return absl::FailedPreconditionError(
          absl::StrCat("partition ", t, " holds no rows"));
    }
  }
  const AccuracyTarget& target = config_.pmw.target;

  TreeOutcome outcome;
  outcome.cover = *cover;

  // Allocate nodes to the two branches against staged copies, so that a
  // refused query leaves the cache untouched.
  NodeMap staged;
  std::vector<NodeId> ready;
  for (const NodeId& node : outcome.cover) {
    if (Materialize(node, staged).IsReady(query)) ready.push_back(node);
  }
  outcome.sv_nodes = LargestContiguousSubset(ready);
  for (const NodeId& node : outcome.cover) {
    if (!std::binary_search(outcome.sv_nodes.begin(), outcome.sv_nodes.end(),
                            node)) {
      outcome.lap_nodes.push_back(node);
    }
  }

  uint64_t n_sv = 0;
  for (const NodeId& node : outcome.sv_nodes) n_sv += NodeRows(node);
  uint64_t n_lap = 0;
  for (const NodeId& node : outcome.lap_nodes) n_lap += NodeRows(node);
  std::vector<PartitionId> sv_parts;
  if (!outcome.sv_nodes.empty()) {
    for (int64_t t = outcome.sv_nodes.front().a;
         t <= outcome.sv_nodes.back().b; ++t) {
      sv_parts.push_back(t);
    }
    outcome.epsilon_sv = CalibrateBudgetSv(target, n_sv);
  }
  if (!outcome.lap_nodes.empty()) {
    absl::StatusOr<double> eps = calibrator_->Epsilon(
        target, static_cast<int64_t>(outcome.lap_nodes.size()), n_lap);
    if (!eps.ok()) return eps.status();
    outcome.epsilon_lap = *eps;
  }

  // Worst case per partition; branches touch disjoint partitions.
  const bool needs_init =
      !outcome.sv_nodes.empty() && !live_svs_.contains(outcome.sv_nodes);
  if (!outcome.sv_nodes.empty()) {
    const double worst =
        (needs_init ? 3.0 * outcome.epsilon_sv : 0.0) + outcome.epsilon_sv;
    absl::StatusOr<bool> ok = account.CanAfford(sv_parts, worst);
    if (!ok.ok()) return ok.status();
    if (!*ok) return absl::ResourceExhaustedError("privacy budget exhausted");
  }
  for (const NodeId& node : outcome.lap_nodes) {
    absl::StatusOr<bool> ok =
        account.CanAfford(PartitionsOf(node), outcome.epsilon_lap);
    if (!ok.ok()) return ok.status();
    if (!*ok) return absl::ResourceExhaustedError("privacy budget exhausted");
  }
  nodes_.merge(staged);

  std::vector<std::pair<double, uint64_t>> parts;
  if (!outcome.sv_nodes.empty()) {
    if (needs_init) {
      if (absl::Status s = account.Pay(sv_parts, 3.0 * outcome.epsilon_sv);
          !s.ok()) {
        return s;
      }
      absl::StatusOr<SvState> sv =
          SvInit(outcome.epsilon_sv, n_sv, target.alpha, source);
      if (!sv.ok()) return sv.status();
      live_svs_[outcome.sv_nodes] = *sv;
      outcome.sv_initialized = true;
    }
    std::vector<std::pair<double, uint64_t>> estimates;
    std::vector<std::pair<double, uint64_t>> truths;
    for (const NodeId& node : outcome.sv_nodes) {
      const uint64_t rows = NodeRows(node);
      estimates.emplace_back(*EvalOnHistogram(query, nodes_.at(node).histogram),
                             rows);
      truths.emplace_back(NodeTruth(query, node), rows);
    }
    const double r_h = *Aggregate(estimates);
    const double r_true = *Aggregate(truths);
    SvState& sv = live_svs_.at(outcome.sv_nodes);
    absl::StatusOr<SvResult> check = SvCheck(sv, r_true, r_h, source);
    if (!check.ok()) return check.status();
    outcome.sv_result = *check;
    double r_sv = r_h;
    if (*check == SvResult::kFail) {
      if (absl::Status s = account.Pay(sv_parts, outcome.epsilon_sv);
          !s.ok()) {
        return s;
      }
      live_svs_.erase(outcome.sv_nodes);
      absl::StatusOr<double> noise = source.Laplace(
          1.0 / (outcome.epsilon_sv * static_cast<double>(n_sv)));
      if (!noise.ok()) return noise.status();
      r_sv = std::clamp(r_true + *noise, 0.0, 1.0);
      const double sign = r_sv > r_h ? 1.0 : (r_sv < r_h ? -1.0 : 0.0);
      for (const NodeId& node : outcome.sv_nodes) {
        PmwNodeState& state = nodes_.at(node);
        if (sign != 0.0) {
          state.ApplyUpdate(query, sign * state.lr());
          ++outcome.updates;
        }
        state.heuristic.Penalize(query);
      }
    }
    parts.emplace_back(r_sv, n_sv);
  }

  if (!outcome.lap_nodes.empty()) {
    std::vector<std::pair<double, uint64_t>> answers;
    for (const NodeId& node : outcome.lap_nodes) {
      if (absl::Status s = account.Pay(PartitionsOf(node), outcome.epsilon_lap);
          !s.ok()) {
        return s;
      }
      const uint64_t rows = NodeRows(node);
      absl::StatusOr<double> noise = source.Laplace(
          1.0 / (outcome.epsilon_lap * static_cast<double>(rows)));
      if (!noise.ok()) return noise.status();
      const double r = std::clamp(NodeTruth(query, node) + *noise, 0.0, 1.0);
      PmwNodeState& state = nodes_.at(node);
      const double estimate = *EvalOnHistogram(query, state.histogram);
      const double step = ExternalUpdateSign(r, estimate, config_.pmw.tau,
                                             target.alpha, state.lr());
      if (config_.pmw.external_updates && step != 0.0) {
        state.ApplyUpdate(query, step);
        ++outcome.updates;
      }
      answers.emplace_back(r, rows);
    }
    parts.emplace_back(*Aggregate(answers), n_lap);
  }

  outcome.value = *Aggregate(parts);
  std::vector<std::pair<double, uint64_t>> truths;
  for (const NodeId& node : outcome.cover) {
    truths.emplace_back(NodeTruth(query, node), NodeRows(node));
  }
  outcome.true_answer = *Aggregate(truths);
  if (outcome.sv_result == SvResult::kFail) {
    outcome.path = AnswerPath::kR2;
  } else if (outcome.lap_nodes.empty()) {
    outcome.path = AnswerPath::kR1;
  } else {
    outcome.path = AnswerPath::kR3;
  }
  return outcome;
}

namespace {

constexpr char kTreeMagic[] = "pmwcache-tree 1";
constexpr size_t kNodeLines = 7;

std::string NodeList(absl::Span<const NodeId> nodes) {
  return absl::StrJoin(nodes, " ", [](std::string* out, const NodeId& n) {
    absl::StrAppend(out, n.tree, ":", n.a, ":", n.b);
  });
}

absl::StatusOr<NodeId> ParseNodeId(const std::string& text) {
  std::vector<std::string> parts = absl::StrSplit(text, ':');
  NodeId id;
  if (parts.size() != 3 || !absl::SimpleAtoi(parts[0], &id.tree) ||
      !absl::SimpleAtoi(parts[1], &id.a) || !absl::SimpleAtoi(parts[2], &id.b)) {
    return absl::InvalidArgumentError(absl::StrCat("bad node id '", text, "'"));
  }
  return id;
}

}  // namespace

std::string TreeCache::Snapshot() const {
  std::string out = absl::StrCat(kTreeMagic, "\n");
  absl::StrAppend(&out, "nodes ", nodes_.size(), "\n");
  for (const auto& [id, state] : nodes_) {
    absl::StrAppend(&out, "node ", NodeList({id}), "\n",
                    SerializeNodeState(state));
  }
  absl::StrAppend(&out, "svs ", live_svs_.size(), "\n");
  for (const auto& [key, sv] : live_svs_) {
    absl::StrAppendFormat(&out, "sv %.17g %d %.17g %s\n", sv.epsilon, sv.n,
                          sv.noisy_threshold, NodeList(key));
  }
  return out;
}

absl::Status TreeCache::Restore(const std::string& text) {
  std::vector<std::string> lines =
      absl::StrSplit(text, '\n', absl::SkipEmpty());
  auto bad = [](absl::string_view why) {
    return absl::InvalidArgumentError(absl::StrCat("tree snapshot: ", why));
  };
  if (lines.size() < 3 || lines[0] != kTreeMagic) return bad("header");
  size_t i = 1;
  size_t count = 0;
  if (!absl::StartsWith(lines[i], "nodes ") ||
      !absl::SimpleAtoi(lines[i].substr(6), &count)) {
    return bad("node count");
  }
  ++i;
  NodeMap nodes;
  for (size_t k = 0; k < count; ++k) {
    if (i + kNodeLines >= lines.size() ||
        !absl::StartsWith(lines[i], "node ")) {
      return bad("node entry");
    }
    absl::StatusOr<NodeId> id = ParseNodeId(lines[i].substr(5));
    if (!id.ok()) return id.status();
    const std::string body = absl::StrJoin(
        lines.begin() + i + 1, lines.begin() + i + 1 + kNodeLines, "\n");
    absl::StatusOr<PmwNodeState> state = ParseNodeState(domain_, body);
    if (!state.ok()) return state.status();
    nodes.emplace(*id, *std::move(state));
    i += 1 + kNodeLines;
  }
  if (i >= lines.size() || !absl::StartsWith(lines[i], "svs ") ||
      !absl::SimpleAtoi(lines[i].substr(4), &count)) {
    return bad("sv count");
  }
  ++i;
  std::map<std::vector<NodeId>, SvState> svs;
  for (size_t k = 0; k < count; ++k, ++i) {
    if (i >= lines.size()) return bad("truncated sv list");
    std::vector<std::string> fields =
        absl::StrSplit(lines[i], ' ', absl::SkipEmpty());
    SvState sv;
    if (fields.size() < 5 || fields[0] != "sv" ||
        !absl::SimpleAtod(fields[1], &sv.epsilon) ||
        !absl::SimpleAtoi(fields[2], &sv.n) ||
        !absl::SimpleAtod(fields[3], &sv.noisy_threshold)) {
      return bad("sv entry");
    }
    sv.status = SvStatus::kFresh;
    std::vector<NodeId> key;
    for (size_t f = 4; f < fields.size(); ++f) {
      absl::StatusOr<NodeId> id = ParseNodeId(fields[f]);
      if (!id.ok()) return id.status();
      key.push_back(*id);
    }
    svs.emplace(std::move(key), sv);
  }
  nodes_ = std::move(nodes);
  live_svs_ = std::move(svs);
  return absl::OkStatus();
}

}  // namespace pmwcache
