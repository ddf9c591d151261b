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

#include "pmwcache/domain.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"

namespace pmwcache {

absl::StatusOr<uint64_t> DomainSize(absl::Span<const Attribute> attributes) {
  if (attributes.empty()) {
    return absl::InvalidArgumentError("domain has no attributes");
  }
  uint64_t size = 1;
  for (const Attribute& attribute : attributes) {
    if (attribute.cardinality < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("attribute '", attribute.name,
                       "' has cardinality ", attribute.cardinality));
    }
    const auto card = static_cast<uint64_t>(attribute.cardinality);
    if (size > std::numeric_limits<uint64_t>::max() / card) {
      return absl::OutOfRangeError("domain size overflows 64-bit bin index");
    }
    size *= card;
  }
  return size;
}

DataDomain::DataDomain(std::vector<Attribute> attributes, uint64_t size)
    : attributes_(std::move(attributes)),
      strides_(attributes_.size()),
      size_(size) {
  uint64_t stride = 1;
  for (size_t j = attributes_.size(); j-- > 0;) {
    strides_[j] = stride;
    stride *= static_cast<uint64_t>(attributes_[j].cardinality);
  }
}

absl::StatusOr<DomainPtr> DataDomain::Create(
    std::vector<Attribute> attributes) {
  absl::StatusOr<uint64_t> size = DomainSize(attributes);
  if (!size.ok()) return size.status();
  for (size_t i = 0; i < attributes.size(); ++i) {
    for (size_t j = i + 1; j < attributes.size(); ++j) {
      if (attributes[i].name == attributes[j].name) {
        return absl::InvalidArgumentError(
            absl::StrCat("duplicate attribute name '", attributes[i].name,
                         "'"));
      }
    }
  }
  return DomainPtr(new DataDomain(std::move(attributes), *size));
}

int DataDomain::AttributeIndex(const std::string& name) const {
  for (size_t j = 0; j < attributes_.size(); ++j) {
    if (attributes_[j].name == name) return static_cast<int>(j);
  }
  return -1;
}

absl::StatusOr<uint64_t> DataDomain::BinIndex(
    absl::Span<const int64_t> point) const {
  if (point.size() != attributes_.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("point has ", point.size(), " coordinates, domain has ",
                     attributes_.size(), " attributes"));
  }
  uint64_t bin = 0;
  for (size_t j = 0; j < point.size(); ++j) {
    if (point[j] < 0 || point[j] >= attributes_[j].cardinality) {
      return absl::OutOfRangeError(
          absl::StrCat("value ", point[j], " out of range for attribute '",
                       attributes_[j].name, "'"));
    }
    bin += static_cast<uint64_t>(point[j]) * strides_[j];
  }
  return bin;
}

std::vector<int64_t> DataDomain::PointAt(uint64_t bin) const {
  std::vector<int64_t> point(attributes_.size());
  for (size_t j = 0; j < attributes_.size(); ++j) {
    point[j] = static_cast<int64_t>(bin / strides_[j]);
    bin %= strides_[j];
  }
  return point;
}

bool SameDomain(const DomainPtr& a, const DomainPtr& b) {
  if (a == b) return true;
  if (a == nullptr || b == nullptr) return false;
  return *a == *b;
}

// ---------------------------------------------------------------------------
// Histogram

Histogram Histogram::Uniform(DomainPtr domain) {
  const size_t n = domain->size();
  return Histogram(std::move(domain),
                   std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

absl::StatusOr<Histogram> Histogram::FromWeights(DomainPtr domain,
                                                 std::vector<double> weights) {
  if (weights.size() != domain->size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("histogram has ", weights.size(), " bins, domain has ",
                     domain->size()));
  }
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      return absl::InvalidArgumentError("histogram weights must be finite "
                                        "and non-negative");
    }
    total += w;
  }
  if (total <= 0.0) {
    return absl::InvalidArgumentError("histogram weights sum to zero");
  }
  for (double& w : weights) w /= total;
  return Histogram(std::move(domain), std::move(weights));
}

absl::StatusOr<Histogram> Histogram::Restore(DomainPtr domain,
                                             std::vector<double> weights) {
  absl::StatusOr<Histogram> normalized = FromWeights(domain, weights);
  if (!normalized.ok()) return normalized.status();
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    return absl::InvalidArgumentError(
        absl::StrCat("restored histogram sums to ", total));
  }
  return Histogram(std::move(domain), std::move(weights));
}

double Histogram::MinWeight() const {
  return *std::min_element(weights_.begin(), weights_.end());
}

void Histogram::ApplyMultiplicativeUpdate(const LinearQuery& query,
                                          double step) {
  if (step == 0.0) return;
  absl::Span<const uint32_t> support = query.support();
  for (size_t k = 0; k < support.size(); ++k) {
    weights_[support[k]] *= std::exp(step * query.support_weight(k));
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  for (double& w : weights_) w /= total;
}

// ---------------------------------------------------------------------------
// LinearQuery

namespace {

std::string SubsetsKey(const std::vector<std::vector<int64_t>>& subsets) {
  std::vector<std::string> parts;
  parts.reserve(subsets.size());
  for (const auto& subset : subsets) parts.push_back(absl::StrJoin(subset, ","));
  return absl::StrJoin(parts, ";");
}

}  // namespace

absl::StatusOr<LinearQuery> LinearQuery::Predicate(
    DomainPtr domain, std::vector<std::vector<int64_t>> subsets) {
  if (domain == nullptr) return absl::InvalidArgumentError("null domain");
  if (subsets.size() != domain->num_attributes()) {
    return absl::InvalidArgumentError(
        absl::StrCat("query has ", subsets.size(),
                     " attribute subsets, domain has ",
                     domain->num_attributes()));
  }
  if (domain->size() > std::numeric_limits<uint32_t>::max()) {
    return absl::OutOfRangeError("domain too large for query support");
  }
  for (size_t j = 0; j < subsets.size(); ++j) {
    auto& subset = subsets[j];
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    if (subset.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("empty value subset for attribute '",
                       domain->attributes()[j].name, "'"));
    }
    if (subset.front() < 0 ||
        subset.back() >= domain->attributes()[j].cardinality) {
      return absl::OutOfRangeError(
          absl::StrCat("value subset out of range for attribute '",
                       domain->attributes()[j].name, "'"));
    }
  }

  LinearQuery query;
  query.key_ = SubsetsKey(subsets);
  // Enumerate the cartesian product in row-major order, so support comes out
  // sorted.
  size_t support_size = 1;
  for (const auto& subset : subsets) support_size *= subset.size();
  query.support_.reserve(support_size);
  std::vector<size_t> cursor(subsets.size(), 0);
  while (true) {
    uint64_t bin = 0;
    for (size_t j = 0; j < subsets.size(); ++j) {
      bin += static_cast<uint64_t>(subsets[j][cursor[j]]) * domain->stride(j);
    }
    query.support_.push_back(static_cast<uint32_t>(bin));
    size_t j = subsets.size();
    while (j > 0 && ++cursor[j - 1] == subsets[j - 1].size()) {
      cursor[j - 1] = 0;
      --j;
    }
    if (j == 0) break;
  }
  query.domain_ = std::move(domain);
  query.subsets_ = std::move(subsets);
  return query;
}

absl::StatusOr<LinearQuery> LinearQuery::Dense(DomainPtr domain,
                                               std::vector<double> weights) {
  if (domain == nullptr) return absl::InvalidArgumentError("null domain");
  if (weights.size() != domain->size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("query has ", weights.size(), " weights, domain has ",
                     domain->size()));
  }
  LinearQuery query;
  query.is_predicate_ = false;
  std::vector<std::string> key_parts;
  key_parts.reserve(weights.size());
  for (size_t v = 0; v < weights.size(); ++v) {
    const double w = weights[v];
    if (!(w >= 0.0 && w <= 1.0)) {
      return absl::InvalidArgumentError("query weights must lie in [0, 1]");
    }
    if (w > 0.0) {
      query.support_.push_back(static_cast<uint32_t>(v));
      query.support_weights_.push_back(w);
    }
    key_parts.push_back(absl::StrCat(w));
  }
  query.key_ = absl::StrCat("dense:", absl::StrJoin(key_parts, ","));
  query.domain_ = std::move(domain);
  return query;
}

absl::StatusOr<LinearQuery> LinearQuery::FromKey(DomainPtr domain,
                                                 const std::string& key) {
  std::vector<std::vector<int64_t>> subsets;
  for (absl::string_view part : absl::StrSplit(key, ';')) {
    std::vector<int64_t> subset;
    for (absl::string_view token : absl::StrSplit(part, ',')) {
      int64_t value;
      if (!absl::SimpleAtoi(token, &value)) {
        return absl::InvalidArgumentError(
            absl::StrCat("malformed query key '", key, "'"));
      }
      subset.push_back(value);
    }
    subsets.push_back(std::move(subset));
  }
  return Predicate(std::move(domain), std::move(subsets));
}

double LinearQuery::Weight(uint64_t bin) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), bin);
  if (it == support_.end() || *it != bin) return 0.0;
  return support_weight(static_cast<size_t>(it - support_.begin()));
}

std::vector<double> LinearQuery::DenseWeights() const {
  std::vector<double> dense(domain_->size(), 0.0);
  for (size_t k = 0; k < support_.size(); ++k) {
    dense[support_[k]] = support_weight(k);
  }
  return dense;
}

// ---------------------------------------------------------------------------
// Partitions and evaluation

absl::StatusOr<Partition> Partition::Create(PartitionId id,
                                            std::vector<uint64_t> counts) {
  if (id < 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("partition id must be non-negative, got ", id));
  }
  Partition partition;
  partition.id = id;
  for (uint64_t c : counts) partition.rows += c;
  partition.counts = std::move(counts);
  return partition;
}

absl::StatusOr<double> EvalOnHistogram(const LinearQuery& query,
                                       const Histogram& histogram) {
  if (!SameDomain(query.domain(), histogram.domain())) {
    return absl::InvalidArgumentError("query and histogram domains differ");
  }
  double total = 0.0;
  absl::Span<const uint32_t> support = query.support();
  for (size_t k = 0; k < support.size(); ++k) {
    total += query.support_weight(k) * histogram[support[k]];
  }
  return total;
}

double WeightedCount(const LinearQuery& query,
                     absl::Span<const uint64_t> counts) {
  double total = 0.0;
  absl::Span<const uint32_t> support = query.support();
  for (size_t k = 0; k < support.size(); ++k) {
    total += query.support_weight(k) * static_cast<double>(counts[support[k]]);
  }
  return total;
}

absl::StatusOr<double> EvalOnPartitions(const LinearQuery& query,
                                        absl::Span<const Partition> parts) {
  const size_t n = query.domain()->size();
  double selected = 0.0;
  uint64_t rows = 0;
  for (const Partition& part : parts) {
    if (part.counts.size() != n) {
      return absl::InvalidArgumentError(
          absl::StrCat("partition ", part.id, " has ", part.counts.size(),
                       " bins, query domain has ", n));
    }
    selected += WeightedCount(query, part.counts);
    rows += part.rows;
  }
  if (rows == 0) {
    return absl::FailedPreconditionError("query over empty data");
  }
  return selected / static_cast<double>(rows);
}

std::vector<uint64_t> PooledCounts(absl::Span<const Partition> parts,
                                   size_t domain_size) {
  std::vector<uint64_t> pooled(domain_size, 0);
  for (const Partition& part : parts) {
    for (size_t v = 0; v < domain_size && v < part.counts.size(); ++v) {
      pooled[v] += part.counts[v];
    }
  }
  return pooled;
}

}  // namespace pmwcache
