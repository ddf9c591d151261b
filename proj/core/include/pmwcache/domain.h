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

// Discrete data domains, normalized histograms over them, linear queries and
// partitioned count-vector datasets. Everything here is exact and
// non-private: it is the trusted data path the mechanisms sit on top of.

#ifndef PMWCACHE_DOMAIN_H_
#define PMWCACHE_DOMAIN_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"

namespace pmwcache {

struct Attribute {
  std::string name;
  int64_t cardinality = 1;

  bool operator==(const Attribute&) const = default;
};

// Product of the cardinalities, with an explicit error on overflow of the
// 64-bit bin index space.
absl::StatusOr<uint64_t> DomainSize(absl::Span<const Attribute> attributes);

// An ordered list of categorical attributes. Points are enumerated in
// row-major order over the declared attribute order (the last attribute varies
// fastest), which fixes the bin index of every point.
class DataDomain {
 public:
  static absl::StatusOr<std::shared_ptr<const DataDomain>> Create(
      std::vector<Attribute> attributes);

  const std::vector<Attribute>& attributes() const { return attributes_; }
  size_t num_attributes() const { return attributes_.size(); }
  uint64_t size() const { return size_; }

  // Returns -1 when no attribute carries `name`.
  int AttributeIndex(const std::string& name) const;

  absl::StatusOr<uint64_t> BinIndex(absl::Span<const int64_t> point) const;
  std::vector<int64_t> PointAt(uint64_t bin) const;

  uint64_t stride(size_t attribute) const { return strides_[attribute]; }

  bool operator==(const DataDomain& other) const {
    return attributes_ == other.attributes_;
  }

 private:
  explicit DataDomain(std::vector<Attribute> attributes, uint64_t size);

  std::vector<Attribute> attributes_;
  std::vector<uint64_t> strides_;
  uint64_t size_;
};

using DomainPtr = std::shared_ptr<const DataDomain>;

bool SameDomain(const DomainPtr& a, const DomainPtr& b);

class LinearQuery;

// A probability distribution over the bins of a domain. Weights are kept
// non-negative and renormalized after every mutation.
class Histogram {
 public:
  static Histogram Uniform(DomainPtr domain);
  // Normalizes `weights`; rejects negative, non-finite or all-zero input.
  static absl::StatusOr<Histogram> FromWeights(DomainPtr domain,
                                               std::vector<double> weights);
  // Takes already-normalized weights verbatim (sum within 1e-9 of 1), so
  // that a serialized histogram restores bit-identically.
  static absl::StatusOr<Histogram> Restore(DomainPtr domain,
                                           std::vector<double> weights);

  const DomainPtr& domain() const { return domain_; }
  absl::Span<const double> weights() const { return weights_; }
  size_t size() const { return weights_.size(); }
  double operator[](size_t bin) const { return weights_[bin]; }
  double MinWeight() const;

  // h(v) <- h(v) * exp(step * q(v)), then renormalize.
  void ApplyMultiplicativeUpdate(const LinearQuery& query, double step);

 private:
  Histogram(DomainPtr domain, std::vector<double> weights)
      : domain_(std::move(domain)), weights_(std::move(weights)) {}

  DomainPtr domain_;
  std::vector<double> weights_;
};

// A linear query with per-bin weights in [0, 1]. The canonical form is a
// conjunction of per-attribute value subsets (weight 1 inside, 0 outside);
// a dense weight vector is accepted for test oracles.
class LinearQuery {
 public:
  // `subsets[j]` lists the admitted values of attribute j. Subsets are sorted
  // and deduplicated; every subset must be non-empty and in range.
  static absl::StatusOr<LinearQuery> Predicate(
      DomainPtr domain, std::vector<std::vector<int64_t>> subsets);
  static absl::StatusOr<LinearQuery> Dense(DomainPtr domain,
                                           std::vector<double> weights);
  // Inverse of key() for predicate queries.
  static absl::StatusOr<LinearQuery> FromKey(DomainPtr domain,
                                             const std::string& key);

  const DomainPtr& domain() const { return domain_; }
  bool is_predicate() const { return is_predicate_; }
  const std::vector<std::vector<int64_t>>& subsets() const { return subsets_; }

  // Bins with non-zero weight, ascending, and their weights.
  absl::Span<const uint32_t> support() const { return support_; }
  double support_weight(size_t k) const {
    return is_predicate_ ? 1.0 : support_weights_[k];
  }

  double Weight(uint64_t bin) const;
  std::vector<double> DenseWeights() const;

  // Per-attribute subsets joined as "0,1;0;1;2,5". Two predicate queries
  // share a key iff they have identical weight vectors.
  const std::string& key() const { return key_; }

 private:
  LinearQuery() = default;

  DomainPtr domain_;
  bool is_predicate_ = true;
  std::vector<std::vector<int64_t>> subsets_;
  std::vector<uint32_t> support_;
  std::vector<double> support_weights_;
  std::string key_;
};

using PartitionId = int64_t;

// One time partition of a dataset, stored as a count per bin.
struct Partition {
  PartitionId id = 0;
  std::vector<uint64_t> counts;
  uint64_t rows = 0;

  static absl::StatusOr<Partition> Create(PartitionId id,
                                          std::vector<uint64_t> counts);
};

// Sum_v q(v) h(v).
absl::StatusOr<double> EvalOnHistogram(const LinearQuery& query,
                                       const Histogram& histogram);

// Sum_v q(v) counts(v) without normalization.
double WeightedCount(const LinearQuery& query,
                     absl::Span<const uint64_t> counts);

// The true pooled answer: Sum_v q(v) * total_count(v) / Sum_i n_i.
absl::StatusOr<double> EvalOnPartitions(const LinearQuery& query,
                                        absl::Span<const Partition> parts);

// Elementwise sum of count vectors of `parts`.
std::vector<uint64_t> PooledCounts(absl::Span<const Partition> parts,
                                   size_t domain_size);

}  // namespace pmwcache

#endif  // PMWCACHE_DOMAIN_H_
