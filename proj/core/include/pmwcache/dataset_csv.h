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

// Record-level CSV for datasets.
//
//   positive,age,gender,ethnicity,t
//   0,2,1,5,0
//   1,0,0,3,0
//
// The header names the attributes. Values are integer codes. The optional
// column `t` holds the non-negative partition index; without it every record
// lands in partition 0. Partitions are dense: indices 0..max(t) all exist,
// possibly empty.

#ifndef PMWCACHE_DATASET_CSV_H_
#define PMWCACHE_DATASET_CSV_H_

#include <istream>
#include <ostream>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "pmwcache/domain.h"

namespace pmwcache {

// Header columns other than `t` must match the domain's attribute names, in
// any order.
absl::StatusOr<std::vector<Partition>> ReadDatasetCsv(std::istream& in,
                                                      const DataDomain& domain);

// Infers each cardinality as max(value) + 1 in header order.
absl::StatusOr<DomainPtr> InferDomainFromCsv(std::istream& in);

// Writes one line per row (counts expanded) with a trailing `t` column.
absl::Status WriteDatasetCsv(std::ostream& out, const DataDomain& domain,
                             absl::Span<const Partition> partitions);

}  // namespace pmwcache

#endif  // PMWCACHE_DATASET_CSV_H_
