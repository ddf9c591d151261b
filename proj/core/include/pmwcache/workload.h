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

// Synthetic partitioned datasets, the pool of all conjunctive count queries
// over a domain, and Zipf-distributed workloads over that pool.

#ifndef PMWCACHE_WORKLOAD_H_
#define PMWCACHE_WORKLOAD_H_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "pmwcache/domain.h"

namespace pmwcache {

// Product over attributes of (2^cardinality - 1). Errors above `limit`.
absl::StatusOr<uint64_t> ConjunctivePoolSize(const DataDomain& domain,
                                             uint64_t limit = 50'000'000);

// The index-th pool query: a mixed-radix number whose digit j is a non-empty
// subset bitmask of attribute j, minus one. The last attribute varies
// fastest.
absl::StatusOr<LinearQuery> ConjunctiveQueryAt(const DomainPtr& domain,
                                               uint64_t index);

absl::StatusOr<std::vector<LinearQuery>> BuildConjunctivePool(
    const DomainPtr& domain, uint64_t limit = 5'000'000);

// Normalized x^{-k} for ranks x = 1..size.
std::vector<double> ZipfWeights(size_t size, double k);

enum class RangeLaw {
  // Every query asks for [a, b].
  kStatic,
  // Window length ~ round(Normal(mean, sd)) clamped to [1, min(T, P)], start
  // uniform among the windows that fit.
  kGaussianWindow,
  // Query j of Q sees avail = min(P, 1 + floor(j P / Q)) arrived partitions
  // and asks for the latest w, w uniform in [1, min(avail, T)].
  kStreamingLatest,
};

struct RangeSpec {
  RangeLaw law = RangeLaw::kStatic;
  int64_t partitions = 1;
  int64_t max_window = 1;
  int64_t a = 0;
  int64_t b = 0;
  double mean_window = 1.0;
  double sd_window = 5.0;

  absl::Status Validate() const;
};

struct WorkloadSpec {
  uint64_t pool_size = 0;
  double k_zipf = 0.0;
  int64_t queries = 0;
  uint64_t seed = 0;
  RangeSpec range;

  absl::Status Validate() const;
};

struct WorkloadItem {
  int64_t arrival = 0;
  uint64_t query_index = 0;
  int64_t a = 0;
  int64_t b = 0;
  // Partitions that have arrived when the query is issued.
  int64_t available = 0;
};

absl::StatusOr<std::vector<WorkloadItem>> SampleWorkload(
    const WorkloadSpec& spec);

enum class DatasetLaw {
  kUniform,
  // One Dirichlet(concentration) distribution shared by every partition.
  kDirichlet,
  // p_0 ~ Dirichlet; p_t = (1 - drift) p_{t-1} + drift Dirichlet draw.
  kDrift,
};

struct DatasetSpec {
  int64_t partitions = 1;
  uint64_t rows_per_partition = 0;
  DatasetLaw law = DatasetLaw::kUniform;
  double concentration = 1.0;
  double drift = 0.0;

  absl::Status Validate() const;
};

// Per-partition categorical distributions over the domain's bins.
absl::StatusOr<std::vector<std::vector<double>>> PartitionDistributions(
    const DataDomain& domain, const DatasetSpec& spec, uint64_t seed);

// Multinomial draw of rows_per_partition rows per partition.
absl::StatusOr<std::vector<Partition>> GenerateDataset(
    const DataDomain& domain, const DatasetSpec& spec, uint64_t seed);

// "arrival,query_key,a,b" rows.
struct WorkloadRecord {
  int64_t arrival = 0;
  std::string query_key;
  int64_t a = 0;
  int64_t b = 0;
};

absl::Status WriteWorkloadCsv(std::ostream& out,
                              absl::Span<const WorkloadRecord> records);
absl::StatusOr<std::vector<WorkloadRecord>> ReadWorkloadCsv(std::istream& in);

}  // namespace pmwcache

#endif  // PMWCACHE_WORKLOAD_H_
