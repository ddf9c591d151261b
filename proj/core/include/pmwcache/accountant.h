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

// Per-partition privacy filters. A payment names a set of partitions and is
// charged to each of them in full (block composition); partitions not named
// are untouched (parallel composition). The filter refuses any payment that
// would push a named partition past the global cap, and refusals are atomic.

#ifndef PMWCACHE_ACCOUNTANT_H_
#define PMWCACHE_ACCOUNTANT_H_

#include <cstdint>
#include <map>
#include <ostream>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "pmwcache/domain.h"

namespace pmwcache {

enum class AccountingMode { kPureDp, kRdp };

// How an RDP filter decides. kAnyOrder accepts when some single order keeps
// every named partition under the cap; kAllOrders requires every order to.
enum class RdpAcceptance { kAnyOrder, kAllOrders };

// Per-order costs over an account's order grid.
using RdpCurve = std::vector<double>;

// A scalar epsilon (pure DP) or an RDP curve.
using Cost = std::variant<double, RdpCurve>;

// Sum of two costs of the same kind (curves elementwise).
Cost AddCosts(const Cost& a, const Cost& b);

std::vector<double> DefaultRdpOrders();

// (1/(a-1)) ln(a/(2a-1) e^{eps(a-1)} + (a-1)/(2a-1) e^{-eps a}), evaluated in
// log space so that large orders do not overflow.
double RdpCostLaplace(double epsilon, double order);

// RdpCostLaplace(epsilon, a) + 2 epsilon.
double RdpCostSv(double epsilon, double order);

// a / (2 ratio^2), ratio = noise standard deviation over sensitivity.
double RdpCostGaussian(double sigma_over_sensitivity, double order);

// min over orders of spent(a) + ln(1/delta)/(a-1).
absl::StatusOr<double> RdpToDp(absl::Span<const double> spent,
                               absl::Span<const double> orders, double delta);

struct AccountOptions {
  AccountingMode mode = AccountingMode::kPureDp;
  double epsilon_global = 10.0;
  double delta_global = 0.0;
  std::vector<double> orders = DefaultRdpOrders();
  RdpAcceptance acceptance = RdpAcceptance::kAnyOrder;

  absl::Status Validate() const;
};

class BudgetAccount {
 public:
  static absl::StatusOr<BudgetAccount> Create(AccountOptions options);

  const AccountOptions& options() const { return options_; }
  AccountingMode mode() const { return options_.mode; }
  const std::vector<double>& orders() const { return options_.orders; }

  // Registers a partition with zero spend. Errors if it already exists.
  absl::Status AddPartition(PartitionId id);
  bool HasPartition(PartitionId id) const;
  std::vector<PartitionId> partitions() const;

  // Curves over this account's grid.
  RdpCurve LaplaceCurve(double epsilon) const;
  RdpCurve SvCurve(double epsilon) const;
  RdpCurve GaussianCurve(double sigma_over_sensitivity) const;

  // Whether Pay would accept, without charging. NotFound for unknown ids;
  // InvalidArgument for a negative cost or one of the wrong kind.
  absl::StatusOr<bool> CanAfford(absl::Span<const PartitionId> ids,
                                 const Cost& cost) const;

  // Charges `cost` to every partition in `ids` (duplicates are charged once)
  // or to none of them. A refusal returns ResourceExhausted.
  absl::Status Pay(absl::Span<const PartitionId> ids, const Cost& cost);

  // Pure DP: the accumulated epsilon. RDP: the spend converted at delta_G.
  absl::StatusOr<double> Spent(PartitionId id) const;
  // RDP mode only.
  absl::StatusOr<RdpCurve> SpentCurve(PartitionId id) const;

  // Over all registered partitions; 0 when there are none.
  double MaxSpent() const;
  double MeanSpent() const;

  uint64_t accepted_payments() const { return accepted_; }
  uint64_t rejected_payments() const { return rejected_; }

  // "partition,spent_epsilon" rows in partition order.
  void ExportLedgerCsv(std::ostream& out) const;

 private:
  // Pure-DP spend as an unevaluated sum hi + lo, kept with TwoSum so that
  // long runs of small charges accumulate without rounding drift.
  struct PureSpend {
    double hi = 0.0;
    double lo = 0.0;

    double value() const { return hi + lo; }
    PureSpend Plus(double x) const;
  };

  struct Entry {
    PureSpend pure;
    RdpCurve curve;
  };

  explicit BudgetAccount(AccountOptions options)
      : options_(std::move(options)) {}

  absl::Status CheckCost(const Cost& cost) const;
  // Sorted, deduplicated ids; NotFound if any is unregistered.
  absl::StatusOr<std::vector<PartitionId>> Lookup(
      absl::Span<const PartitionId> ids) const;
  bool Fits(absl::Span<const PartitionId> ids, const Cost& cost) const;
  double SpentOf(const Entry& entry) const;

  AccountOptions options_;
  std::map<PartitionId, Entry> ledger_;
  uint64_t accepted_ = 0;
  uint64_t rejected_ = 0;
};

}  // namespace pmwcache

#endif  // PMWCACHE_ACCOUNTANT_H_
