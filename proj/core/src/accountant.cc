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

#include "pmwcache/accountant.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace pmwcache {

Cost AddCosts(const Cost& a, const Cost& b) {
  if (const double* x = std::get_if<double>(&a)) return *x + std::get<double>(b);
  RdpCurve sum = std::get<RdpCurve>(a);
  const RdpCurve& other = std::get<RdpCurve>(b);
  for (size_t i = 0; i < sum.size(); ++i) sum[i] += other[i];
  return sum;
}

std::vector<double> DefaultRdpOrders() {
  return {1.25, 1.5, 2, 3, 4, 6, 8, 16, 32, 64, 256, 1024};
}

double RdpCostLaplace(double epsilon, double order) {
  if (epsilon == 0.0) return 0.0;
  const double a = order;
  const double x = std::log(a / (2 * a - 1)) + epsilon * (a - 1);
  const double y = std::log((a - 1) / (2 * a - 1)) - epsilon * a;
  const double hi = std::max(x, y);
  const double log_sum = hi + std::log1p(std::exp(std::min(x, y) - hi));
  return std::max(0.0, log_sum / (a - 1));
}

double RdpCostSv(double epsilon, double order) {
  return RdpCostLaplace(epsilon, order) + 2.0 * epsilon;
}

double RdpCostGaussian(double sigma_over_sensitivity, double order) {
  return order / (2.0 * sigma_over_sensitivity * sigma_over_sensitivity);
}

absl::StatusOr<double> RdpToDp(absl::Span<const double> spent,
                               absl::Span<const double> orders, double delta) {
  if (spent.size() != orders.size() || orders.empty()) {
    return absl::InvalidArgumentError(
        "RDP curve and order grid must be non-empty and of equal length");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("delta must lie in (0, 1), got ", delta));
  }
  const double log_inv_delta = std::log(1.0 / delta);
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < orders.size(); ++i) {
    best = std::min(best, spent[i] + log_inv_delta / (orders[i] - 1.0));
  }
  return best;
}

absl::Status AccountOptions::Validate() const {
  if (!(epsilon_global > 0.0) || !std::isfinite(epsilon_global)) {
    return absl::InvalidArgumentError(
        absl::StrCat("epsilon_global must be positive, got ", epsilon_global));
  }
  if (mode == AccountingMode::kPureDp) {
    if (delta_global != 0.0) {
      return absl::InvalidArgumentError("pure-DP accounting needs delta_G = 0");
    }
    return absl::OkStatus();
  }
  if (!(delta_global > 0.0 && delta_global < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("RDP accounting needs delta_G in (0, 1), got ",
                     delta_global));
  }
  if (orders.empty()) return absl::InvalidArgumentError("empty order grid");
  for (size_t i = 0; i < orders.size(); ++i) {
    if (!(orders[i] > 1.0) || (i > 0 && !(orders[i] > orders[i - 1]))) {
      return absl::InvalidArgumentError(
          "RDP orders must be > 1 and strictly ascending");
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<BudgetAccount> BudgetAccount::Create(AccountOptions options) {
  if (absl::Status s = options.Validate(); !s.ok()) return s;
  return BudgetAccount(std::move(options));
}

BudgetAccount::PureSpend BudgetAccount::PureSpend::Plus(double x) const {
  // Knuth's TwoSum: s + err == hi + x exactly.
  const double s = hi + x;
  const double bp = s - hi;
  const double err = (hi - (s - bp)) + (x - bp);
  PureSpend out;
  out.hi = s;
  out.lo = lo + err;
  return out;
}

absl::Status BudgetAccount::AddPartition(PartitionId id) {
  if (ledger_.contains(id)) {
    return absl::AlreadyExistsError(absl::StrCat("partition ", id));
  }
  Entry entry;
  if (mode() == AccountingMode::kRdp) entry.curve.assign(orders().size(), 0.0);
  ledger_.emplace(id, std::move(entry));
  return absl::OkStatus();
}

bool BudgetAccount::HasPartition(PartitionId id) const {
  return ledger_.contains(id);
}

std::vector<PartitionId> BudgetAccount::partitions() const {
  std::vector<PartitionId> ids;
  ids.reserve(ledger_.size());
  for (const auto& [id, entry] : ledger_) ids.push_back(id);
  return ids;
}

RdpCurve BudgetAccount::LaplaceCurve(double epsilon) const {
  RdpCurve curve;
  for (double a : orders()) curve.push_back(RdpCostLaplace(epsilon, a));
  return curve;
}

RdpCurve BudgetAccount::SvCurve(double epsilon) const {
  RdpCurve curve;
  for (double a : orders()) curve.push_back(RdpCostSv(epsilon, a));
  return curve;
}

RdpCurve BudgetAccount::GaussianCurve(double sigma_over_sensitivity) const {
  RdpCurve curve;
  for (double a : orders()) {
    curve.push_back(RdpCostGaussian(sigma_over_sensitivity, a));
  }
  return curve;
}

absl::Status BudgetAccount::CheckCost(const Cost& cost) const {
  if (mode() == AccountingMode::kPureDp) {
    const double* eps = std::get_if<double>(&cost);
    if (eps == nullptr) {
      return absl::InvalidArgumentError("pure-DP account needs a scalar cost");
    }
    if (!(*eps >= 0.0) || !std::isfinite(*eps)) {
      return absl::InvalidArgumentError(
          absl::StrCat("cost must be finite and >= 0, got ", *eps));
    }
    return absl::OkStatus();
  }
  const RdpCurve* curve = std::get_if<RdpCurve>(&cost);
  if (curve == nullptr || curve->size() != orders().size()) {
    return absl::InvalidArgumentError(
        "RDP account needs a curve over its order grid");
  }
  for (double c : *curve) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      return absl::InvalidArgumentError("RDP costs must be finite and >= 0");
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<PartitionId>> BudgetAccount::Lookup(
    absl::Span<const PartitionId> ids) const {
  std::vector<PartitionId> unique(ids.begin(), ids.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  for (PartitionId id : unique) {
    if (!ledger_.contains(id)) {
      return absl::NotFoundError(absl::StrCat("unknown partition ", id));
    }
  }
  return unique;
}

bool BudgetAccount::Fits(absl::Span<const PartitionId> ids,
                         const Cost& cost) const {
  const double cap = options_.epsilon_global;
  std::vector<const Entry*> entries;
  entries.reserve(ids.size());
  for (PartitionId id : ids) entries.push_back(&ledger_.at(id));
  if (mode() == AccountingMode::kPureDp) {
    const double eps = std::get<double>(cost);
    return std::all_of(entries.begin(), entries.end(), [&](const Entry* e) {
      return e->pure.Plus(eps).value() <= cap;
    });
  }
  const RdpCurve& curve = std::get<RdpCurve>(cost);
  const double log_inv_delta = std::log(1.0 / options_.delta_global);
  auto fits_at = [&](size_t i) {
    const double slack = log_inv_delta / (orders()[i] - 1.0);
    return std::all_of(entries.begin(), entries.end(), [&](const Entry* e) {
      return e->curve[i] + curve[i] + slack <= cap;
    });
  };
  bool any = false;
  bool all = true;
  for (size_t i = 0; i < orders().size(); ++i) {
    const bool ok = fits_at(i);
    any = any || ok;
    all = all && ok;
  }
  return options_.acceptance == RdpAcceptance::kAnyOrder ? any : all;
}

absl::StatusOr<bool> BudgetAccount::CanAfford(absl::Span<const PartitionId> ids,
                                              const Cost& cost) const {
  if (absl::Status s = CheckCost(cost); !s.ok()) return s;
  absl::StatusOr<std::vector<PartitionId>> unique = Lookup(ids);
  if (!unique.ok()) return unique.status();
  return Fits(*unique, cost);
}

absl::Status BudgetAccount::Pay(absl::Span<const PartitionId> ids,
                                const Cost& cost) {
  if (absl::Status s = CheckCost(cost); !s.ok()) return s;
  absl::StatusOr<std::vector<PartitionId>> unique = Lookup(ids);
  if (!unique.ok()) return unique.status();
  if (!Fits(*unique, cost)) {
    ++rejected_;
    return absl::ResourceExhaustedError("privacy budget exhausted");
  }
  for (PartitionId id : *unique) {
    Entry& entry = ledger_.at(id);
    if (mode() == AccountingMode::kPureDp) {
      entry.pure = entry.pure.Plus(std::get<double>(cost));
    } else {
      const RdpCurve& curve = std::get<RdpCurve>(cost);
      for (size_t i = 0; i < curve.size(); ++i) entry.curve[i] += curve[i];
    }
  }
  ++accepted_;
  return absl::OkStatus();
}

double BudgetAccount::SpentOf(const Entry& entry) const {
  if (mode() == AccountingMode::kPureDp) return entry.pure.value();
  return *RdpToDp(entry.curve, orders(), options_.delta_global);
}

absl::StatusOr<double> BudgetAccount::Spent(PartitionId id) const {
  auto it = ledger_.find(id);
  if (it == ledger_.end()) {
    return absl::NotFoundError(absl::StrCat("unknown partition ", id));
  }
  return SpentOf(it->second);
}

absl::StatusOr<RdpCurve> BudgetAccount::SpentCurve(PartitionId id) const {
  if (mode() != AccountingMode::kRdp) {
    return absl::FailedPreconditionError("not an RDP account");
  }
  auto it = ledger_.find(id);
  if (it == ledger_.end()) {
    return absl::NotFoundError(absl::StrCat("unknown partition ", id));
  }
  return it->second.curve;
}

double BudgetAccount::MaxSpent() const {
  double best = 0.0;
  for (const auto& [id, entry] : ledger_) best = std::max(best, SpentOf(entry));
  return best;
}

double BudgetAccount::MeanSpent() const {
  if (ledger_.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [id, entry] : ledger_) total += SpentOf(entry);
  return total / static_cast<double>(ledger_.size());
}

void BudgetAccount::ExportLedgerCsv(std::ostream& out) const {
  out << "partition,spent_epsilon\n";
  for (const auto& [id, entry] : ledger_) {
    out << absl::StrFormat("%d,%.17g\n", id, SpentOf(entry));
  }
}

}  // namespace pmwcache
