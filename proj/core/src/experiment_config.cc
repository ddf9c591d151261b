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

#include <bit>
#include <cmath>
#include <set>
#include <string>

#include "absl/strings/str_cat.h"
#include "nlohmann/json.hpp"
#include "pmwcache/experiment.h"

namespace pmwcache {

namespace {

using nlohmann::json;

absl::Status FieldError(const std::string& path, const std::string& message) {
  return absl::InvalidArgumentError(absl::StrCat(path, ": ", message));
}

absl::Status Prefixed(const std::string& path, const absl::Status& status) {
  if (status.ok()) return status;
  return FieldError(path, std::string(status.message()));
}

// Reads the members of one JSON object, remembering which keys were used so
// that leftovers can be reported.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path)
      : object_(object), path_(std::move(path)) {}

  static absl::StatusOr<ObjectReader> Open(const json& value,
                                           std::string path) {
    if (!value.is_object()) {
      return FieldError(path.empty() ? "<root>" : path, "expected an object");
    }
    return ObjectReader(value, std::move(path));
  }

  std::string PathOf(const std::string& key) const {
    return path_.empty() ? key : absl::StrCat(path_, ".", key);
  }

  const json* Find(const std::string& key) {
    auto it = object_.find(key);
    if (it == object_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  absl::Status Double(const std::string& key, double* out) {
    const json* v = Find(key);
    if (v == nullptr) return absl::OkStatus();
    if (!v->is_number()) return FieldError(PathOf(key), "expected a number");
    *out = v->get<double>();
    if (!std::isfinite(*out)) return FieldError(PathOf(key), "not finite");
    return absl::OkStatus();
  }

  absl::Status Int(const std::string& key, int64_t* out) {
    const json* v = Find(key);
    if (v == nullptr) return absl::OkStatus();
    if (!v->is_number_integer()) {
      return FieldError(PathOf(key), "expected an integer");
    }
    *out = v->get<int64_t>();
    return absl::OkStatus();
  }

  absl::Status Uint(const std::string& key, uint64_t* out) {
    const json* v = Find(key);
    if (v == nullptr) return absl::OkStatus();
    if (!v->is_number_unsigned()) {
      return FieldError(PathOf(key), "expected a non-negative integer");
    }
    *out = v->get<uint64_t>();
    return absl::OkStatus();
  }

  absl::Status Bool(const std::string& key, bool* out) {
    const json* v = Find(key);
    if (v == nullptr) return absl::OkStatus();
    if (!v->is_boolean()) return FieldError(PathOf(key), "expected a boolean");
    *out = v->get<bool>();
    return absl::OkStatus();
  }

  absl::Status String(const std::string& key, std::string* out,
                      bool* present = nullptr) {
    const json* v = Find(key);
    if (present != nullptr) *present = v != nullptr;
    if (v == nullptr) return absl::OkStatus();
    if (!v->is_string()) return FieldError(PathOf(key), "expected a string");
    *out = v->get<std::string>();
    return absl::OkStatus();
  }

  absl::Status Finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        return FieldError(PathOf(it.key()), "unknown key");
      }
    }
    return absl::OkStatus();
  }

 private:
  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

#define PMW_RETURN_IF_ERROR(expr)            \
  do {                                       \
    if (absl::Status _s = (expr); !_s.ok()) { \
      return _s;                             \
    }                                        \
  } while (0)

absl::StatusOr<DatasetLaw> ParseDatasetLaw(const std::string& name) {
  if (name == "uniform") return DatasetLaw::kUniform;
  if (name == "dirichlet") return DatasetLaw::kDirichlet;
  if (name == "drift") return DatasetLaw::kDrift;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown law '", name, "' (uniform, dirichlet, drift)"));
}

std::string DatasetLawName(DatasetLaw law) {
  switch (law) {
    case DatasetLaw::kUniform:
      return "uniform";
    case DatasetLaw::kDirichlet:
      return "dirichlet";
    case DatasetLaw::kDrift:
      return "drift";
  }
  return "uniform";
}

absl::Status ParseDataset(const json& value, ExperimentConfig& config) {
  absl::StatusOr<ObjectReader> r = ObjectReader::Open(value, "dataset");
  if (!r.ok()) return r.status();
  if (const json* attrs = r->Find("attributes")) {
    if (!attrs->is_array() || attrs->empty()) {
      return FieldError("dataset.attributes", "expected a non-empty array");
    }
    config.attributes.clear();
    for (size_t i = 0; i < attrs->size(); ++i) {
      const std::string path = absl::StrCat("dataset.attributes[", i, "]");
      absl::StatusOr<ObjectReader> ar = ObjectReader::Open((*attrs)[i], path);
      if (!ar.ok()) return ar.status();
      Attribute attribute;
      bool has_name = false;
      PMW_RETURN_IF_ERROR(ar->String("name", &attribute.name, &has_name));
      attribute.cardinality = 0;
      PMW_RETURN_IF_ERROR(ar->Int("cardinality", &attribute.cardinality));
      PMW_RETURN_IF_ERROR(ar->Finish());
      if (!has_name) return FieldError(path + ".name", "required");
      if (attribute.cardinality < 1) {
        return FieldError(path + ".cardinality", "must be >= 1");
      }
      config.attributes.push_back(std::move(attribute));
    }
  }
  PMW_RETURN_IF_ERROR(r->Int("partitions", &config.dataset.partitions));
  PMW_RETURN_IF_ERROR(
      r->Uint("rows_per_partition", &config.dataset.rows_per_partition));
  std::string law;
  bool has_law = false;
  PMW_RETURN_IF_ERROR(r->String("law", &law, &has_law));
  if (has_law) {
    absl::StatusOr<DatasetLaw> parsed = ParseDatasetLaw(law);
    if (!parsed.ok()) return Prefixed("dataset.law", parsed.status());
    config.dataset.law = *parsed;
  }
  PMW_RETURN_IF_ERROR(r->Double("concentration", &config.dataset.concentration));
  PMW_RETURN_IF_ERROR(r->Double("drift", &config.dataset.drift));
  return r->Finish();
}

absl::Status ParseWorkload(const json& value, ExperimentConfig& config) {
  absl::StatusOr<ObjectReader> r = ObjectReader::Open(value, "workload");
  if (!r.ok()) return r.status();
  PMW_RETURN_IF_ERROR(r->Int("queries", &config.queries));
  PMW_RETURN_IF_ERROR(r->Double("k_zipf", &config.k_zipf));
  PMW_RETURN_IF_ERROR(r->Int("window", &config.window));
  PMW_RETURN_IF_ERROR(r->Double("mean_window", &config.mean_window));
  PMW_RETURN_IF_ERROR(r->Double("sd_window", &config.sd_window));
  return r->Finish();
}

absl::Status ParsePrivacy(const json& value, ExperimentConfig& config) {
  absl::StatusOr<ObjectReader> r = ObjectReader::Open(value, "privacy");
  if (!r.ok()) return r.status();
  AccountOptions& p = config.privacy;
  PMW_RETURN_IF_ERROR(r->Double("epsilon_global", &p.epsilon_global));
  PMW_RETURN_IF_ERROR(r->Double("delta_global", &p.delta_global));
  std::string text;
  bool present = false;
  PMW_RETURN_IF_ERROR(r->String("mode", &text, &present));
  if (present) {
    if (text == "pure") {
      p.mode = AccountingMode::kPureDp;
    } else if (text == "rdp") {
      p.mode = AccountingMode::kRdp;
    } else {
      return FieldError("privacy.mode", "expected \"pure\" or \"rdp\"");
    }
  }
  PMW_RETURN_IF_ERROR(r->String("acceptance", &text, &present));
  if (present) {
    if (text == "any-order") {
      p.acceptance = RdpAcceptance::kAnyOrder;
    } else if (text == "all-orders") {
      p.acceptance = RdpAcceptance::kAllOrders;
    } else {
      return FieldError("privacy.acceptance",
                        "expected \"any-order\" or \"all-orders\"");
    }
  }
  if (const json* orders = r->Find("orders")) {
    if (!orders->is_array()) {
      return FieldError("privacy.orders", "expected an array of numbers");
    }
    p.orders.clear();
    for (size_t i = 0; i < orders->size(); ++i) {
      if (!(*orders)[i].is_number()) {
        return FieldError(absl::StrCat("privacy.orders[", i, "]"),
                          "expected a number");
      }
      p.orders.push_back((*orders)[i].get<double>());
    }
  }
  return r->Finish();
}

absl::Status ParseAccuracy(const json& value, ExperimentConfig& config) {
  absl::StatusOr<ObjectReader> r = ObjectReader::Open(value, "accuracy");
  if (!r.ok()) return r.status();
  PMW_RETURN_IF_ERROR(r->Double("alpha", &config.pmw.target.alpha));
  PMW_RETURN_IF_ERROR(r->Double("beta", &config.pmw.target.beta));
  return r->Finish();
}

absl::Status ParsePmw(const json& value, ExperimentConfig& config) {
  absl::StatusOr<ObjectReader> r = ObjectReader::Open(value, "pmw");
  if (!r.ok()) return r.status();
  PmwConfig& p = config.pmw;
  PMW_RETURN_IF_ERROR(r->Double("tau", &p.tau));
  PMW_RETURN_IF_ERROR(r->Double("lr_initial", &p.schedule.initial_lr));
  PMW_RETURN_IF_ERROR(r->Double("lr_final", &p.schedule.final_lr));
  PMW_RETURN_IF_ERROR(
      r->Int("lr_decay_updates", &p.schedule.decay_updates));
  PMW_RETURN_IF_ERROR(r->Int("c0", &p.heuristic.c0));
  PMW_RETURN_IF_ERROR(r->Int("s0", &p.heuristic.s0));
  std::string noise;
  bool present = false;
  PMW_RETURN_IF_ERROR(r->String("noise", &noise, &present));
  if (present) {
    if (noise == "laplace") {
      p.noise = NoiseKind::kLaplace;
    } else if (noise == "gaussian") {
      p.noise = NoiseKind::kGaussian;
    } else {
      return FieldError("pmw.noise", "expected \"laplace\" or \"gaussian\"");
    }
  }
  PMW_RETURN_IF_ERROR(r->Bool("external_updates", &p.external_updates));
  PMW_RETURN_IF_ERROR(
      r->Bool("allow_empirical_params", &p.allow_empirical_params));
  return r->Finish();
}

absl::Status ParseTree(const json& value, ExperimentConfig& config) {
  absl::StatusOr<ObjectReader> r = ObjectReader::Open(value, "tree");
  if (!r.ok()) return r.status();
  PMW_RETURN_IF_ERROR(r->Bool("warm_start", &config.warm_start));
  PMW_RETURN_IF_ERROR(r->Int("mc_trials", &config.mc_trials));
  return r->Finish();
}

absl::Status ParseValidation(const json& value, ExperimentConfig& config) {
  absl::StatusOr<ObjectReader> r = ObjectReader::Open(value, "validation");
  if (!r.ok()) return r.status();
  ValidationConfig& v = config.validation;
  PMW_RETURN_IF_ERROR(r->Bool("enabled", &v.enabled));
  PMW_RETURN_IF_ERROR(r->Int("queries", &v.queries));
  PMW_RETURN_IF_ERROR(r->Int("every", &v.every));
  PMW_RETURN_IF_ERROR(r->Double("target_accuracy", &v.target_accuracy));
  return r->Finish();
}

bool IsTreeEngine(EngineKind engine) {
  return engine == EngineKind::kPmwBypass ||
         engine == EngineKind::kFlatPmwBypass ||
         engine == EngineKind::kTreeExactCache;
}

}  // namespace

absl::StatusOr<UseCase> ParseUseCase(const std::string& name) {
  if (name == "non_partitioned") return UseCase::kNonPartitioned;
  if (name == "partitioned_static") return UseCase::kPartitionedStatic;
  if (name == "partitioned_streaming") return UseCase::kPartitionedStreaming;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown use case '", name,
      "' (non_partitioned, partitioned_static, partitioned_streaming)"));
}

absl::StatusOr<EngineKind> ParseEngineKind(const std::string& name) {
  if (name == "pmw-bypass") return EngineKind::kPmwBypass;
  if (name == "pmw") return EngineKind::kVanillaPmw;
  if (name == "laplace") return EngineKind::kLaplace;
  if (name == "exact-cache") return EngineKind::kExactCache;
  if (name == "tree-exact-cache") return EngineKind::kTreeExactCache;
  if (name == "flat-pmw-bypass") return EngineKind::kFlatPmwBypass;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown engine '", name,
      "' (pmw-bypass, pmw, laplace, exact-cache, tree-exact-cache, "
      "flat-pmw-bypass)"));
}

std::string UseCaseName(UseCase use_case) {
  switch (use_case) {
    case UseCase::kNonPartitioned:
      return "non_partitioned";
    case UseCase::kPartitionedStatic:
      return "partitioned_static";
    case UseCase::kPartitionedStreaming:
      return "partitioned_streaming";
  }
  return "non_partitioned";
}

std::string EngineKindName(EngineKind engine) {
  switch (engine) {
    case EngineKind::kPmwBypass:
      return "pmw-bypass";
    case EngineKind::kVanillaPmw:
      return "pmw";
    case EngineKind::kLaplace:
      return "laplace";
    case EngineKind::kExactCache:
      return "exact-cache";
    case EngineKind::kTreeExactCache:
      return "tree-exact-cache";
    case EngineKind::kFlatPmwBypass:
      return "flat-pmw-bypass";
  }
  return "pmw-bypass";
}

absl::StatusOr<ExperimentConfig> ParseExperimentConfig(
    const std::string& text) {
  json root = json::parse(text, nullptr, /*allow_exceptions=*/false,
                          /*ignore_comments=*/true);
  if (root.is_discarded()) {
    return absl::InvalidArgumentError("config is not valid JSON");
  }
  absl::StatusOr<ObjectReader> r = ObjectReader::Open(root, "");
  if (!r.ok()) return r.status();

  ExperimentConfig config;
  PMW_RETURN_IF_ERROR(r->String("name", &config.name));
  std::string name;
  bool present = false;
  PMW_RETURN_IF_ERROR(r->String("use_case", &name, &present));
  if (present) {
    absl::StatusOr<UseCase> use_case = ParseUseCase(name);
    if (!use_case.ok()) return Prefixed("use_case", use_case.status());
    config.use_case = *use_case;
  }
  PMW_RETURN_IF_ERROR(r->String("engine", &name, &present));
  if (present) {
    absl::StatusOr<EngineKind> engine = ParseEngineKind(name);
    if (!engine.ok()) return Prefixed("engine", engine.status());
    config.engine = *engine;
  }
  PMW_RETURN_IF_ERROR(r->Bool("exact_cache", &config.exact_cache));
  PMW_RETURN_IF_ERROR(r->Uint("seed", &config.seed));

  struct Section {
    const char* key;
    absl::Status (*parse)(const json&, ExperimentConfig&);
  };
  static constexpr Section kSections[] = {
      {"dataset", ParseDataset},   {"workload", ParseWorkload},
      {"privacy", ParsePrivacy},   {"accuracy", ParseAccuracy},
      {"pmw", ParsePmw},           {"tree", ParseTree},
      {"validation", ParseValidation},
  };
  for (const Section& section : kSections) {
    if (const json* value = r->Find(section.key)) {
      PMW_RETURN_IF_ERROR(section.parse(*value, config));
    }
  }
  PMW_RETURN_IF_ERROR(r->Finish());
  PMW_RETURN_IF_ERROR(ValidateExperimentConfig(config));
  return config;
}

absl::Status ValidateExperimentConfig(const ExperimentConfig& config) {
  if (config.name.empty()) return FieldError("name", "must not be empty");

  absl::StatusOr<uint64_t> domain_size = DomainSize(config.attributes);
  if (!domain_size.ok()) {
    return Prefixed("dataset.attributes", domain_size.status());
  }
  absl::StatusOr<DomainPtr> domain = DataDomain::Create(config.attributes);
  if (!domain.ok()) return Prefixed("dataset.attributes", domain.status());
  if (absl::StatusOr<uint64_t> pool = ConjunctivePoolSize(**domain);
      !pool.ok()) {
    return Prefixed("dataset.attributes", pool.status());
  }
  PMW_RETURN_IF_ERROR(Prefixed("dataset", config.dataset.Validate()));
  if (config.dataset.rows_per_partition == 0) {
    return FieldError("dataset.rows_per_partition", "must be >= 1");
  }

  if (config.queries < 0) return FieldError("workload.queries", "must be >= 0");
  if (!(config.k_zipf >= 0.0)) {
    return FieldError("workload.k_zipf", "must be >= 0");
  }
  if (config.window < 1 || !std::has_single_bit(
                               static_cast<uint64_t>(config.window))) {
    return FieldError("workload.window", "must be a power of two");
  }
  if (!(config.sd_window >= 0.0)) {
    return FieldError("workload.sd_window", "must be >= 0");
  }
  if (!(config.mean_window >= 0.0)) {
    return FieldError("workload.mean_window", "must be >= 0");
  }

  PMW_RETURN_IF_ERROR(Prefixed("privacy", config.privacy.Validate()));
  PMW_RETURN_IF_ERROR(Prefixed("accuracy", config.pmw.target.Validate()));
  if (absl::StatusOr<std::string> w = config.pmw.Validate(); !w.ok()) {
    return Prefixed("pmw", w.status());
  }
  if (config.pmw.noise == NoiseKind::kGaussian &&
      config.privacy.mode != AccountingMode::kRdp) {
    return FieldError("pmw.noise", "gaussian noise needs privacy.mode \"rdp\"");
  }
  if (config.mc_trials < 0) return FieldError("tree.mc_trials", "must be >= 0");

  const ValidationConfig& v = config.validation;
  if (v.enabled) {
    if (v.queries < 1) return FieldError("validation.queries", "must be >= 1");
    if (v.every < 1) return FieldError("validation.every", "must be >= 1");
    if (!(v.target_accuracy > 0.0 && v.target_accuracy <= 1.0)) {
      return FieldError("validation.target_accuracy", "must lie in (0, 1]");
    }
  }

  const bool partitioned = config.use_case != UseCase::kNonPartitioned;
  if (!partitioned && (config.engine == EngineKind::kTreeExactCache ||
                       config.engine == EngineKind::kFlatPmwBypass)) {
    return FieldError("engine", absl::StrCat("\"",
                                             EngineKindName(config.engine),
                                             "\" needs a partitioned use case"));
  }
  if (partitioned && config.engine == EngineKind::kVanillaPmw) {
    return FieldError("engine",
                      "\"pmw\" is only defined for the non_partitioned use case");
  }
  if (partitioned && IsTreeEngine(config.engine)) {
    if (config.engine != EngineKind::kTreeExactCache &&
        config.privacy.mode != AccountingMode::kPureDp) {
      return FieldError("privacy.mode", "tree engines need pure accounting");
    }
    if (config.pmw.noise != NoiseKind::kLaplace) {
      return FieldError("pmw.noise", "tree engines need laplace noise");
    }
  }
  if (config.use_case == UseCase::kPartitionedStatic &&
      config.dataset.partitions > config.window) {
    return FieldError("dataset.partitions",
                      absl::StrCat("a static partitioned run holds at most "
                                   "workload.window = ",
                                   config.window, " partitions"));
  }
  return absl::OkStatus();
}

std::string ExperimentConfigToJson(const ExperimentConfig& config) {
  json attributes = json::array();
  for (const Attribute& a : config.attributes) {
    attributes.push_back({{"name", a.name}, {"cardinality", a.cardinality}});
  }
  const PmwConfig& p = config.pmw;
  json root = {
      {"name", config.name},
      {"use_case", UseCaseName(config.use_case)},
      {"engine", EngineKindName(config.engine)},
      {"exact_cache", config.exact_cache},
      {"seed", config.seed},
      {"dataset",
       {{"attributes", attributes},
        {"partitions", config.dataset.partitions},
        {"rows_per_partition", config.dataset.rows_per_partition},
        {"law", DatasetLawName(config.dataset.law)},
        {"concentration", config.dataset.concentration},
        {"drift", config.dataset.drift}}},
      {"workload",
       {{"queries", config.queries},
        {"k_zipf", config.k_zipf},
        {"window", config.window},
        {"mean_window", config.mean_window},
        {"sd_window", config.sd_window}}},
      {"privacy",
       {{"epsilon_global", config.privacy.epsilon_global},
        {"delta_global", config.privacy.delta_global},
        {"mode", config.privacy.mode == AccountingMode::kPureDp ? "pure"
                                                                : "rdp"},
        {"orders", config.privacy.orders},
        {"acceptance", config.privacy.acceptance == RdpAcceptance::kAnyOrder
                           ? "any-order"
                           : "all-orders"}}},
      {"accuracy", {{"alpha", p.target.alpha}, {"beta", p.target.beta}}},
      {"pmw",
       {{"tau", p.tau},
        {"lr_initial", p.schedule.initial_lr},
        {"lr_final", p.schedule.final_lr},
        {"lr_decay_updates", p.schedule.decay_updates},
        {"c0", p.heuristic.c0},
        {"s0", p.heuristic.s0},
        {"noise", p.noise == NoiseKind::kLaplace ? "laplace" : "gaussian"},
        {"external_updates", p.external_updates},
        {"allow_empirical_params", p.allow_empirical_params}}},
      {"tree",
       {{"warm_start", config.warm_start}, {"mc_trials", config.mc_trials}}},
      {"validation",
       {{"enabled", config.validation.enabled},
        {"queries", config.validation.queries},
        {"every", config.validation.every},
        {"target_accuracy", config.validation.target_accuracy}}},
  };
  return root.dump(2);
}

}  // namespace pmwcache
