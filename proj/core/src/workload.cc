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

#include "pmwcache/workload.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace pmwcache {

absl::StatusOr<uint64_t> ConjunctivePoolSize(const DataDomain& domain,
                                             uint64_t limit) {
  uint64_t size = 1;
  for (const Attribute& attribute : domain.attributes()) {
    if (attribute.cardinality >= 63) {
      return absl::OutOfRangeError(
          absl::StrCat("attribute '", attribute.name,
                       "' has too many values for subset enumeration"));
    }
    const uint64_t choices = (uint64_t{1} << attribute.cardinality) - 1;
    if (size > limit / choices) {
      return absl::OutOfRangeError(
          absl::StrCat("query pool would exceed ", limit, " queries"));
    }
    size *= choices;
  }
  return size;
}

absl::StatusOr<LinearQuery> ConjunctiveQueryAt(const DomainPtr& domain,
                                               uint64_t index) {
  absl::StatusOr<uint64_t> size =
      ConjunctivePoolSize(*domain, std::numeric_limits<uint64_t>::max());
  if (!size.ok()) return size.status();
  if (index >= *size) {
    return absl::OutOfRangeError(
        absl::StrCat("pool index ", index, " >= pool size ", *size));
  }
  const size_t k = domain->num_attributes();
  std::vector<std::vector<int64_t>> subsets(k);
  for (size_t j = k; j-- > 0;) {
    const int64_t card = domain->attributes()[j].cardinality;
    const uint64_t choices = (uint64_t{1} << card) - 1;
    const uint64_t mask = index % choices + 1;
    index /= choices;
    for (int64_t v = 0; v < card; ++v) {
      if (mask & (uint64_t{1} << v)) subsets[j].push_back(v);
    }
  }
  return LinearQuery::Predicate(domain, std::move(subsets));
}

absl::StatusOr<std::vector<LinearQuery>> BuildConjunctivePool(
    const DomainPtr& domain, uint64_t limit) {
  absl::StatusOr<uint64_t> size = ConjunctivePoolSize(*domain, limit);
  if (!size.ok()) return size.status();
  std::vector<LinearQuery> pool;
  pool.reserve(*size);
  for (uint64_t i = 0; i < *size; ++i) {
    absl::StatusOr<LinearQuery> query = ConjunctiveQueryAt(domain, i);
    if (!query.ok()) return query.status();
    pool.push_back(*std::move(query));
  }
  return pool;
}

std::vector<double> ZipfWeights(size_t size, double k) {
  std::vector<double> weights(size);
  double total = 0.0;
  for (size_t x = 0; x < size; ++x) {
    weights[x] = std::pow(static_cast<double>(x + 1), -k);
    total += weights[x];
  }
  for (double& w : weights) w /= total;
  return weights;
}

absl::Status RangeSpec::Validate() const {
  if (partitions < 1 || max_window < 1) {
    return absl::InvalidArgumentError(
        "range law needs at least one partition and a positive window");
  }
  switch (law) {
    case RangeLaw::kStatic:
      if (a < 0 || b < a || b >= partitions || b - a + 1 > max_window) {
        return absl::InvalidArgumentError(
            absl::StrCat("static range [", a, ",", b, "] is invalid for ",
                         partitions, " partitions and window ", max_window));
      }
      break;
    case RangeLaw::kGaussianWindow:
      if (!(sd_window >= 0.0) || !std::isfinite(mean_window)) {
        return absl::InvalidArgumentError("invalid Gaussian window law");
      }
      break;
    case RangeLaw::kStreamingLatest:
      break;
  }
  return absl::OkStatus();
}

absl::Status WorkloadSpec::Validate() const {
  if (pool_size == 0) return absl::InvalidArgumentError("empty query pool");
  if (!(k_zipf >= 0.0)) {
    return absl::InvalidArgumentError("k_zipf must be >= 0");
  }
  if (queries < 0) return absl::InvalidArgumentError("negative query count");
  return range.Validate();
}

absl::StatusOr<std::vector<WorkloadItem>> SampleWorkload(
    const WorkloadSpec& spec) {
  if (absl::Status s = spec.Validate(); !s.ok()) return s;
  std::mt19937_64 engine(spec.seed);
  const std::vector<double> weights = ZipfWeights(spec.pool_size, spec.k_zipf);
  std::discrete_distribution<uint64_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> window(spec.range.mean_window,
                                          spec.range.sd_window);
  const RangeSpec& range = spec.range;
  const int64_t P = range.partitions;

  std::vector<WorkloadItem> items;
  items.reserve(spec.queries);
  for (int64_t j = 0; j < spec.queries; ++j) {
    WorkloadItem item;
    item.arrival = j;
    item.query_index = pick(engine);
    item.available = P;
    switch (range.law) {
      case RangeLaw::kStatic:
        item.a = range.a;
        item.b = range.b;
        break;
      case RangeLaw::kGaussianWindow: {
        const int64_t widest = std::min(P, range.max_window);
        const int64_t w = std::clamp<int64_t>(
            static_cast<int64_t>(std::llround(window(engine))), 1, widest);
        item.a = std::uniform_int_distribution<int64_t>(0, P - w)(engine);
        item.b = item.a + w - 1;
        break;
      }
      case RangeLaw::kStreamingLatest: {
        item.available = std::min<int64_t>(
            P, 1 + j * P / std::max<int64_t>(spec.queries, 1));
        const int64_t widest = std::min(item.available, range.max_window);
        const int64_t w =
            std::uniform_int_distribution<int64_t>(1, widest)(engine);
        item.b = item.available - 1;
        item.a = item.b - w + 1;
        break;
      }
    }
    items.push_back(item);
  }
  return items;
}

absl::Status DatasetSpec::Validate() const {
  if (partitions < 1) {
    return absl::InvalidArgumentError("need at least one partition");
  }
  if (law != DatasetLaw::kUniform && !(concentration > 0.0)) {
    return absl::InvalidArgumentError("Dirichlet concentration must be > 0");
  }
  if (!(drift >= 0.0 && drift <= 1.0)) {
    return absl::InvalidArgumentError("drift must lie in [0, 1]");
  }
  return absl::OkStatus();
}

namespace {

std::vector<double> DirichletDraw(size_t size, double concentration,
                                  std::mt19937_64& engine) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> p(size);
  double total = 0.0;
  for (double& x : p) {
    x = gamma(engine);
    total += x;
  }
  if (total <= 0.0) return std::vector<double>(size, 1.0 / size);
  for (double& x : p) x /= total;
  return p;
}

}  // namespace

absl::StatusOr<std::vector<std::vector<double>>> PartitionDistributions(
    const DataDomain& domain, const DatasetSpec& spec, uint64_t seed) {
  if (absl::Status s = spec.Validate(); !s.ok()) return s;
  const size_t n = domain.size();
  std::mt19937_64 engine(seed);
  std::vector<std::vector<double>> out;
  out.reserve(spec.partitions);
  if (spec.law == DatasetLaw::kUniform) {
    out.assign(spec.partitions, std::vector<double>(n, 1.0 / n));
    return out;
  }
  out.push_back(DirichletDraw(n, spec.concentration, engine));
  for (int64_t t = 1; t < spec.partitions; ++t) {
    std::vector<double> next = out.back();
    if (spec.law == DatasetLaw::kDrift && spec.drift > 0.0) {
      const std::vector<double> fresh =
          DirichletDraw(n, spec.concentration, engine);
      for (size_t v = 0; v < n; ++v) {
        next[v] = (1.0 - spec.drift) * next[v] + spec.drift * fresh[v];
      }
    }
    out.push_back(std::move(next));
  }
  return out;
}

absl::StatusOr<std::vector<Partition>> GenerateDataset(
    const DataDomain& domain, const DatasetSpec& spec, uint64_t seed) {
  absl::StatusOr<std::vector<std::vector<double>>> dists =
      PartitionDistributions(domain, spec, seed);
  if (!dists.ok()) return dists.status();
  // A separate stream for row sampling keeps the distributions independent
  // of the row counts.
  std::mt19937_64 engine(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Partition> partitions;
  for (int64_t t = 0; t < spec.partitions; ++t) {
    const std::vector<double>& p = (*dists)[t];
    std::vector<uint64_t> counts(p.size(), 0);
    // Sequential binomials: bin v gets Binomial(remaining, p_v / mass left).
    uint64_t remaining = spec.rows_per_partition;
    double mass = 1.0;
    for (size_t v = 0; v < p.size() && remaining > 0; ++v) {
      if (v + 1 == p.size() || mass <= 0.0) {
        counts[v] = remaining;
        break;
      }
      const double prob = std::clamp(p[v] / mass, 0.0, 1.0);
      std::binomial_distribution<uint64_t> binomial(remaining, prob);
      counts[v] = binomial(engine);
      remaining -= counts[v];
      mass -= p[v];
    }
    absl::StatusOr<Partition> part = Partition::Create(t, std::move(counts));
    if (!part.ok()) return part.status();
    partitions.push_back(*std::move(part));
  }
  return partitions;
}

absl::Status WriteWorkloadCsv(std::ostream& out,
                              absl::Span<const WorkloadRecord> records) {
  out << "arrival,query_key,a,b\n";
  for (const WorkloadRecord& r : records) {
    out << r.arrival << ",\"" << r.query_key << "\"," << r.a << "," << r.b
        << "\n";
  }
  if (!out) return absl::DataLossError("write failed");
  return absl::OkStatus();
}

absl::StatusOr<std::vector<WorkloadRecord>> ReadWorkloadCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return absl::InvalidArgumentError("empty CSV");
  std::vector<WorkloadRecord> records;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    // The query key is quoted because it contains commas.
    const size_t open = line.find(",\"");
    const size_t close = line.rfind("\",");
    auto bad = [&] {
      return absl::InvalidArgumentError(
          absl::StrCat("workload line ", line_no, " is malformed"));
    };
    if (open == std::string::npos || close == std::string::npos ||
        close <= open) {
      return bad();
    }
    WorkloadRecord r;
    r.query_key = line.substr(open + 2, close - open - 2);
    std::vector<std::string> tail =
        absl::StrSplit(line.substr(close + 2), ',');
    if (!absl::SimpleAtoi(line.substr(0, open), &r.arrival) ||
        tail.size() != 2 || !absl::SimpleAtoi(tail[0], &r.a) ||
        !absl::SimpleAtoi(tail[1], &r.b)) {
      return bad();
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace pmwcache
