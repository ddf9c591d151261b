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

#include "pmwcache/pmw_bypass.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"

namespace pmwcache {

const char* AnswerPathName(AnswerPath path) {
  switch (path) {
    case AnswerPath::kExactHit:
      return "exact";
    case AnswerPath::kR1:
      return "R1";
    case AnswerPath::kR2:
      return "R2";
    case AnswerPath::kR3:
      return "R3";
  }
  return "?";
}

absl::Status HeuristicConfig::Validate() const {
  if (c0 < 1 || s0 < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("heuristic needs C0 >= 1 and S0 >= 1, got ", c0, " and ",
                     s0));
  }
  return absl::OkStatus();
}

HeuristicState HeuristicState::Create(size_t bins,
                                      const HeuristicConfig& config) {
  HeuristicState state;
  state.config_ = config;
  state.counters_.assign(bins, 0);
  state.thresholds_.assign(bins, config.c0);
  return state;
}

absl::StatusOr<HeuristicState> HeuristicState::FromParts(
    const HeuristicConfig& config, std::vector<int64_t> counters,
    std::vector<int64_t> thresholds) {
  if (counters.size() != thresholds.size()) {
    return absl::InvalidArgumentError("counter/threshold size mismatch");
  }
  for (size_t v = 0; v < counters.size(); ++v) {
    if (counters[v] < 0 || thresholds[v] < config.c0 ||
        (thresholds[v] - config.c0) % config.s0 != 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("invalid heuristic entry at bin ", v));
    }
  }
  HeuristicState state;
  state.config_ = config;
  state.counters_ = std::move(counters);
  state.thresholds_ = std::move(thresholds);
  return state;
}

bool HeuristicState::IsReady(const LinearQuery& query) const {
  if (config_.always_ready) return true;
  for (uint32_t v : query.support()) {
    if (counters_[v] < thresholds_[v]) return false;
  }
  return true;
}

void HeuristicState::Penalize(const LinearQuery& query) {
  absl::Span<const uint32_t> support = query.support();
  if (support.empty()) return;
  int64_t least = std::numeric_limits<int64_t>::max();
  for (uint32_t v : support) least = std::min(least, counters_[v]);
  for (uint32_t v : support) {
    if (counters_[v] == least) thresholds_[v] += config_.s0;
  }
}

void HeuristicState::RecordUpdate(const LinearQuery& query) {
  for (uint32_t v : query.support()) ++counters_[v];
}

absl::Status ScheduleConfig::Validate() const {
  if (!(final_lr > 0.0) || !(initial_lr >= final_lr) ||
      !std::isfinite(initial_lr)) {
    return absl::InvalidArgumentError(
        absl::StrCat("learning rates need 0 < final <= initial, got ",
                     initial_lr, " -> ", final_lr));
  }
  if (decay_updates < 0) {
    return absl::InvalidArgumentError("decay_updates must be >= 0");
  }
  return absl::OkStatus();
}

double LearningRateSchedule::lr() const {
  if (config_.decay_updates == 0) return config_.initial_lr;
  const double progress =
      static_cast<double>(std::min(position_, config_.decay_updates)) /
      static_cast<double>(config_.decay_updates);
  return config_.initial_lr *
         std::pow(config_.final_lr / config_.initial_lr, progress);
}

Histogram MwUpdate(const Histogram& h, const LinearQuery& q, double s) {
  Histogram out = h;
  out.ApplyMultiplicativeUpdate(q, s);
  return out;
}

double ExternalUpdateSign(double r3, double estimate, double tau, double alpha,
                          double lr) {
  const double margin = tau * alpha;
  if (r3 > estimate + margin) return lr;
  if (r3 < estimate - margin) return -lr;
  return 0.0;
}

absl::StatusOr<double> ConvergenceBound(uint64_t domain_size, double lr,
                                        double tau, double alpha) {
  if (domain_size == 0 || !(lr > 0.0) || !(alpha > 0.0)) {
    return absl::InvalidArgumentError("need N >= 1, lr > 0 and alpha > 0");
  }
  if (!(lr / alpha < tau && tau <= 0.5)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "convergence needs lr/alpha < tau <= 1/2, got lr/alpha = %g, tau = %g",
        lr / alpha, tau));
  }
  return std::log(static_cast<double>(domain_size)) /
         (lr * (tau * alpha - lr) / 2.0);
}

PmwNodeState PmwNodeState::Fresh(DomainPtr domain,
                                 const HeuristicConfig& heuristic,
                                 const ScheduleConfig& schedule) {
  const size_t bins = domain->size();
  return PmwNodeState{Histogram::Uniform(std::move(domain)),
                      HeuristicState::Create(bins, heuristic),
                      LearningRateSchedule(schedule), 0};
}

bool PmwNodeState::IsReady(const LinearQuery& query) const {
  return heuristic.IsReady(query);
}

void PmwNodeState::ApplyUpdate(const LinearQuery& query, double step) {
  if (step == 0.0) return;
  histogram.ApplyMultiplicativeUpdate(query, step);
  heuristic.RecordUpdate(query);
  schedule.Advance();
  ++applied_updates;
}

namespace {

constexpr char kNodeMagic[] = "pmwcache-node 1";
constexpr char kEngineMagic[] = "pmwcache-pmw 1";

std::string Doubles(absl::Span<const double> values) {
  return absl::StrJoin(values, " ", [](std::string* out, double v) {
    absl::StrAppendFormat(out, "%.17g", v);
  });
}

// Splits "<tag> v1 v2 ..." and checks the tag.
absl::StatusOr<std::vector<std::string>> Fields(const std::string& line,
                                                const std::string& tag) {
  std::vector<std::string> fields =
      absl::StrSplit(line, ' ', absl::SkipEmpty());
  if (fields.empty() || fields[0] != tag) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected '", tag, "' line, got '", line, "'"));
  }
  fields.erase(fields.begin());
  return fields;
}

template <typename T>
absl::StatusOr<std::vector<T>> ParseNumbers(
    const std::vector<std::string>& fields) {
  std::vector<T> values(fields.size());
  for (size_t i = 0; i < fields.size(); ++i) {
    bool ok;
    if constexpr (std::is_same_v<T, double>) {
      ok = absl::SimpleAtod(fields[i], &values[i]);
    } else {
      ok = absl::SimpleAtoi(fields[i], &values[i]);
    }
    if (!ok) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad number '", fields[i], "'"));
    }
  }
  return values;
}

template <typename T>
absl::StatusOr<std::vector<T>> ParseLine(const std::string& line,
                                         const std::string& tag,
                                         size_t expected) {
  absl::StatusOr<std::vector<std::string>> fields = Fields(line, tag);
  if (!fields.ok()) return fields.status();
  if (fields->size() != expected) {
    return absl::InvalidArgumentError(absl::StrCat(
        "'", tag, "' expects ", expected, " values, got ", fields->size()));
  }
  return ParseNumbers<T>(*fields);
}

absl::StatusOr<PmwNodeState> ParseNodeLines(
    DomainPtr domain, absl::Span<const std::string> lines) {
  if (lines.size() < 7 || lines[0] != kNodeMagic) {
    return absl::InvalidArgumentError("not a node snapshot");
  }
  const size_t n = domain->size();
  auto heuristic = ParseLine<int64_t>(lines[1], "heuristic", 3);
  if (!heuristic.ok()) return heuristic.status();
  auto schedule = ParseLine<double>(lines[2], "schedule", 4);
  if (!schedule.ok()) return schedule.status();
  auto applied = ParseLine<int64_t>(lines[3], "applied", 1);
  if (!applied.ok()) return applied.status();
  auto weights = ParseLine<double>(lines[4], "weights", n);
  if (!weights.ok()) return weights.status();
  auto counters = ParseLine<int64_t>(lines[5], "counters", n);
  if (!counters.ok()) return counters.status();
  auto thresholds = ParseLine<int64_t>(lines[6], "thresholds", n);
  if (!thresholds.ok()) return thresholds.status();

  HeuristicConfig hc{(*heuristic)[0], (*heuristic)[1], (*heuristic)[2] != 0};
  if (absl::Status s = hc.Validate(); !s.ok()) return s;
  ScheduleConfig sc{(*schedule)[0], (*schedule)[1],
                    static_cast<int64_t>((*schedule)[2])};
  if (absl::Status s = sc.Validate(); !s.ok()) return s;
  absl::StatusOr<Histogram> histogram =
      Histogram::Restore(domain, *std::move(weights));
  if (!histogram.ok()) return histogram.status();
  absl::StatusOr<HeuristicState> heur =
      HeuristicState::FromParts(hc, *std::move(counters),
                                *std::move(thresholds));
  if (!heur.ok()) return heur.status();
  return PmwNodeState{*std::move(histogram), *std::move(heur),
                      LearningRateSchedule(
                          sc, static_cast<int64_t>((*schedule)[3])),
                      (*applied)[0]};
}

}  // namespace

std::string SerializeNodeState(const PmwNodeState& state) {
  const HeuristicConfig& hc = state.heuristic.config();
  const ScheduleConfig& sc = state.schedule.config();
  std::string out = absl::StrCat(kNodeMagic, "\n");
  absl::StrAppend(&out, "heuristic ", hc.c0, " ", hc.s0, " ",
                  hc.always_ready ? 1 : 0, "\n");
  absl::StrAppendFormat(&out, "schedule %.17g %.17g %d %d\n", sc.initial_lr,
                        sc.final_lr, sc.decay_updates,
                        state.schedule.position());
  absl::StrAppend(&out, "applied ", state.applied_updates, "\n");
  absl::StrAppend(&out, "weights ", Doubles(state.histogram.weights()), "\n");
  absl::StrAppend(&out, "counters ",
                  absl::StrJoin(state.heuristic.counters(), " "), "\n");
  absl::StrAppend(&out, "thresholds ",
                  absl::StrJoin(state.heuristic.thresholds(), " "), "\n");
  return out;
}

absl::StatusOr<PmwNodeState> ParseNodeState(DomainPtr domain,
                                            const std::string& text) {
  std::vector<std::string> lines =
      absl::StrSplit(text, '\n', absl::SkipEmpty());
  return ParseNodeLines(std::move(domain), lines);
}

absl::StatusOr<std::string> PmwConfig::Validate() const {
  if (absl::Status s = target.Validate(); !s.ok()) return s;
  if (absl::Status s = schedule.Validate(); !s.ok()) return s;
  if (absl::Status s = heuristic.Validate(); !s.ok()) return s;
  if (!(tau > 0.0 && tau <= 0.5)) {
    return absl::InvalidArgumentError(
        absl::StrCat("tau must lie in (0, 1/2], got ", tau));
  }
  if (schedule.initial_lr / target.alpha < tau) return std::string();
  const std::string message = absl::StrFormat(
      "lr/alpha = %g is not below tau = %g; the convergence bound does not "
      "apply",
      schedule.initial_lr / target.alpha, tau);
  if (!allow_empirical_params) return absl::InvalidArgumentError(message);
  return message;
}

absl::StatusOr<PmwBypass> PmwBypass::Create(DomainPtr domain,
                                            const PmwConfig& config,
                                            absl::Span<const Partition> data) {
  absl::StatusOr<std::string> warning = config.Validate();
  if (!warning.ok()) return warning.status();
  if (data.empty()) return absl::InvalidArgumentError("no partitions");
  PmwBypass engine(domain,
                   config,
                   PmwNodeState::Fresh(domain, config.heuristic,
                                       config.schedule));
  engine.warning_ = *std::move(warning);
  for (const Partition& part : data) {
    if (part.counts.size() != domain->size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("partition ", part.id, " does not match the domain"));
    }
    engine.partitions_.push_back(part.id);
    engine.rows_ += part.rows;
  }
  if (engine.rows_ == 0) {
    return absl::FailedPreconditionError("partitions hold no rows");
  }
  engine.pooled_ = PooledCounts(data, domain->size());
  engine.epsilon_ = CalibrateBudget(config.target, engine.rows_);
  if (config.noise == NoiseKind::kGaussian) {
    engine.sigma_ = CalibrateBudgetGaussian(config.target.alpha, engine.rows_,
                                            engine.epsilon_, config.tau);
  }
  return engine;
}

double PmwBypass::TrueAnswer(const LinearQuery& query) const {
  return WeightedCount(query, pooled_) / static_cast<double>(rows_);
}

Cost PmwBypass::SvInitCost(const BudgetAccount& account) const {
  if (account.mode() == AccountingMode::kPureDp) return 3.0 * epsilon_;
  return account.SvCurve(epsilon_);
}

Cost PmwBypass::ReleaseCost(const BudgetAccount& account) const {
  if (account.mode() == AccountingMode::kPureDp) return epsilon_;
  if (config_.noise == NoiseKind::kGaussian) {
    return account.GaussianCurve(sigma_ * static_cast<double>(rows_));
  }
  return account.LaplaceCurve(epsilon_);
}

Cost PmwBypass::R2Cost(const BudgetAccount& account) const {
  if (account.mode() == AccountingMode::kPureDp) return 4.0 * epsilon_;
  return AddCosts(SvInitCost(account), ReleaseCost(account));
}

absl::StatusOr<double> PmwBypass::ReleaseNoise(NoiseSource& source) const {
  if (config_.noise == NoiseKind::kGaussian) return source.Gaussian(sigma_);
  return source.Laplace(1.0 / (epsilon_ * static_cast<double>(rows_)));
}

absl::StatusOr<QueryOutcome> PmwBypass::Answer(const LinearQuery& query,
                                               BudgetAccount& account,
                                               NoiseSource& source) {
  if (!SameDomain(query.domain(), domain_)) {
    return absl::InvalidArgumentError("query domain does not match");
  }
  if (config_.noise == NoiseKind::kGaussian &&
      account.mode() != AccountingMode::kRdp) {
    return absl::FailedPreconditionError(
        "Gaussian answers need an RDP account");
  }
  QueryOutcome outcome;
  outcome.true_answer = TrueAnswer(query);
  outcome.estimate = *EvalOnHistogram(query, node_.histogram);
  const bool ready = node_.IsReady(query);
  const bool needs_init = !sv_.has_value();

  Cost worst = ready ? R2Cost(account) : ReleaseCost(account);
  if (needs_init) worst = AddCosts(SvInitCost(account), worst);
  absl::StatusOr<bool> affordable = account.CanAfford(partitions_, worst);
  if (!affordable.ok()) return affordable.status();
  if (!*affordable) {
    return absl::ResourceExhaustedError("privacy budget exhausted");
  }

  if (needs_init) {
    if (absl::Status s = account.Pay(partitions_, SvInitCost(account));
        !s.ok()) {
      return s;
    }
    absl::StatusOr<SvState> fresh =
        SvInit(epsilon_, rows_, config_.target.alpha, source);
    if (!fresh.ok()) return fresh.status();
    sv_ = *fresh;
    ++sv_inits_;
    outcome.sv_init_charge = 3.0 * epsilon_;
  }

  if (ready) {
    absl::StatusOr<SvResult> check =
        SvCheck(*sv_, outcome.true_answer, outcome.estimate, source);
    if (!check.ok()) return check.status();
    if (*check == SvResult::kPass) {
      outcome.path = AnswerPath::kR1;
      outcome.value = std::clamp(outcome.estimate, 0.0, 1.0);
      return outcome;
    }
    if (absl::Status s = account.Pay(partitions_, R2Cost(account)); !s.ok()) {
      return s;
    }
    absl::StatusOr<double> noise = ReleaseNoise(source);
    if (!noise.ok()) return noise.status();
    outcome.path = AnswerPath::kR2;
    outcome.charged = 4.0 * epsilon_;
    outcome.value = std::clamp(outcome.true_answer + *noise, 0.0, 1.0);
    const double lr = node_.lr();
    if (outcome.value > outcome.estimate) outcome.step = lr;
    if (outcome.value < outcome.estimate) outcome.step = -lr;
    if (outcome.step != 0.0) {
      outcome.update = UpdateKind::kInternal;
      node_.ApplyUpdate(query, outcome.step);
    }
    node_.heuristic.Penalize(query);
    // The consumed vector is replaced right away; R2's charge covers it.
    absl::StatusOr<SvState> reset =
        SvInit(epsilon_, rows_, config_.target.alpha, source);
    if (!reset.ok()) return reset.status();
    sv_ = *reset;
    return outcome;
  }

  if (absl::Status s = account.Pay(partitions_, ReleaseCost(account));
      !s.ok()) {
    return s;
  }
  absl::StatusOr<double> noise = ReleaseNoise(source);
  if (!noise.ok()) return noise.status();
  outcome.path = AnswerPath::kR3;
  outcome.charged = epsilon_;
  outcome.value = std::clamp(outcome.true_answer + *noise, 0.0, 1.0);
  if (config_.external_updates) {
    outcome.step = ExternalUpdateSign(outcome.value, outcome.estimate,
                                      config_.tau, config_.target.alpha,
                                      node_.lr());
    if (outcome.step != 0.0) {
      outcome.update = UpdateKind::kExternal;
      node_.ApplyUpdate(query, outcome.step);
    }
  }
  return outcome;
}

std::string PmwBypass::Snapshot() const {
  std::string out = absl::StrCat(kEngineMagic, "\n");
  absl::StrAppend(&out, "sv_inits ", sv_inits_, "\n");
  if (sv_.has_value()) {
    absl::StrAppendFormat(&out, "sv %.17g %d %.17g %d\n", sv_->epsilon, sv_->n,
                          sv_->noisy_threshold,
                          sv_->status == SvStatus::kFresh ? 1 : 0);
  } else {
    absl::StrAppend(&out, "sv none\n");
  }
  absl::StrAppend(&out, SerializeNodeState(node_));
  return out;
}

absl::Status PmwBypass::Restore(const std::string& text) {
  std::vector<std::string> lines =
      absl::StrSplit(text, '\n', absl::SkipEmpty());
  if (lines.size() < 3 || lines[0] != kEngineMagic) {
    return absl::InvalidArgumentError("not a PMW snapshot");
  }
  auto inits = ParseLine<uint64_t>(lines[1], "sv_inits", 1);
  if (!inits.ok()) return inits.status();
  std::optional<SvState> sv;
  if (lines[2] != "sv none") {
    auto fields = ParseLine<double>(lines[2], "sv", 4);
    if (!fields.ok()) return fields.status();
    SvState state;
    state.epsilon = (*fields)[0];
    state.n = static_cast<uint64_t>((*fields)[1]);
    state.noisy_threshold = (*fields)[2];
    state.status = (*fields)[3] != 0 ? SvStatus::kFresh : SvStatus::kConsumed;
    sv = state;
  }
  absl::StatusOr<PmwNodeState> node = ParseNodeLines(
      domain_, absl::MakeConstSpan(lines).subspan(3));
  if (!node.ok()) return node.status();
  node_ = *std::move(node);
  sv_ = sv;
  sv_inits_ = (*inits)[0];
  return absl::OkStatus();
}

}  // namespace pmwcache
