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

#ifndef PMWCACHE_EXACT_CACHE_H_
#define PMWCACHE_EXACT_CACHE_H_

#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <utility>

#include "absl/container/flat_hash_map.h"

namespace pmwcache {

// A released answer is identified by the canonical query, the partition
// range and the database version it was computed against.
struct CacheKey {
  std::string query;
  int64_t a = 0;
  int64_t b = 0;
  int64_t version = 0;

  bool operator==(const CacheKey&) const = default;

  template <typename H>
  friend H AbslHashValue(H h, const CacheKey& key) {
    return H::combine(std::move(h), key.query, key.a, key.b, key.version);
  }
};

// Highest partition of [a, b] that has arrived.
inline int64_t DatabaseVersion(int64_t b, int64_t latest_arrived) {
  return b < latest_arrived ? b : latest_arrived;
}

// Replays previously released values. Capacity 0 means unbounded; otherwise
// the least recently used entry is evicted. Peek never reorders and may run
// concurrently with other Peek calls; everything else needs external
// serialization.
class ExactCache {
 public:
  explicit ExactCache(size_t capacity = 0) : capacity_(capacity) {}

  std::optional<double> Lookup(const CacheKey& key);
  std::optional<double> Peek(const CacheKey& key) const;
  // Last writer wins.
  void Insert(const CacheKey& key, double value);

  size_t size() const { return index_.size(); }
  size_t capacity() const { return capacity_; }
  uint64_t hits() const { return hits_; }
  uint64_t misses() const { return misses_; }

 private:
  using Entry = std::pair<CacheKey, double>;

  size_t capacity_;
  std::list<Entry> order_;  // most recent first
  absl::flat_hash_map<CacheKey, std::list<Entry>::iterator> index_;
  uint64_t hits_ = 0;
  uint64_t misses_ = 0;
};

}  // namespace pmwcache

#endif  // PMWCACHE_EXACT_CACHE_H_
