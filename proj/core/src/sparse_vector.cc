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

#include "pmwcache/sparse_vector.h"

#include <cmath>

#include "absl/strings/str_cat.h"

namespace pmwcache {

absl::StatusOr<SvState> SvInit(double epsilon, uint64_t n, double alpha,
                               NoiseSource& source) {
  if (!(epsilon > 0.0) || n == 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("sparse vector needs epsilon > 0 and n > 0, got ",
                     epsilon, " and ", n));
  }
  SvState state;
  state.epsilon = epsilon;
  state.n = n;
  absl::StatusOr<double> noise = source.Laplace(state.noise_scale());
  if (!noise.ok()) return noise.status();
  state.noisy_threshold = alpha / 2.0 + *noise;
  state.status = SvStatus::kFresh;
  return state;
}

absl::StatusOr<SvResult> SvCheck(SvState& state, double true_answer,
                                 double estimate, NoiseSource& source) {
  if (state.status != SvStatus::kFresh) {
    return absl::FailedPreconditionError("sparse vector already consumed");
  }
  absl::StatusOr<double> noise = source.Laplace(state.noise_scale());
  if (!noise.ok()) return noise.status();
  if (std::abs(true_answer - estimate) + *noise < state.noisy_threshold) {
    return SvResult::kPass;
  }
  state.status = SvStatus::kConsumed;
  return SvResult::kFail;
}

}  // namespace pmwcache
