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

#ifndef PMWCACHE_SPARSE_VECTOR_H_
#define PMWCACHE_SPARSE_VECTOR_H_

#include <cstdint>

#include "absl/status/statusor.h"
#include "pmwcache/mechanisms.h"

namespace pmwcache {

enum class SvStatus { kFresh, kConsumed };
enum class SvResult { kPass, kFail };

// Single-cutoff sparse vector accuracy test. The threshold alpha/2 + Lap(b),
// b = 1/(epsilon n), is drawn once at initialization. Each check compares
// |true - estimate| + Lap(b) against it; the first failure consumes the
// vector. The caller pays 3 epsilon before initializing.
struct SvState {
  double epsilon = 0.0;
  uint64_t n = 0;
  double noisy_threshold = 0.0;
  SvStatus status = SvStatus::kConsumed;

  double noise_scale() const { return 1.0 / (epsilon * static_cast<double>(n)); }
};

absl::StatusOr<SvState> SvInit(double epsilon, uint64_t n, double alpha,
                               NoiseSource& source);

// Pass iff |true_answer - estimate| + Lap(b) < threshold (ties fail). A pass
// leaves `state` untouched; a fail marks it consumed. Errors on a consumed
// state without drawing noise.
absl::StatusOr<SvResult> SvCheck(SvState& state, double true_answer,
                                 double estimate, NoiseSource& source);

}  // namespace pmwcache

#endif  // PMWCACHE_SPARSE_VECTOR_H_
