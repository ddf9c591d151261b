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

// Experiment runner.
//
//   pmwcache_cli run --config exp.json --out results/ [--seed 7]
//                    [--engine laplace]
//   pmwcache_cli validate-config --config exp.json
//   pmwcache_cli pool-stats --config exp.json
//
// Exit codes: 0 success, 1 configuration error, 2 budget exhausted before
// the end of the workload (outputs are still written), 3 other failures.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "absl/status/statusor.h"
#include "pmwcache/experiment.h"
#include "pmwcache/workload.h"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kExhausted = 2;
constexpr int kFailure = 3;

absl::StatusOr<pmwcache::ExperimentConfig> LoadConfig(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return pmwcache::ParseExperimentConfig(buffer.str());
}

int ReportConfigError(const absl::Status& status) {
  std::cerr << "config error: " << status.message() << "\n";
  return kConfigError;
}

int Run(const std::string& config_path, const std::string& out_dir,
        std::optional<uint64_t> seed, const std::string& engine) {
  absl::StatusOr<pmwcache::ExperimentConfig> config = LoadConfig(config_path);
  if (!config.ok()) return ReportConfigError(config.status());
  if (seed) config->seed = *seed;
  if (!engine.empty()) {
    absl::StatusOr<pmwcache::EngineKind> kind =
        pmwcache::ParseEngineKind(engine);
    if (!kind.ok()) return ReportConfigError(kind.status());
    config->engine = *kind;
    if (absl::Status s = pmwcache::ValidateExperimentConfig(*config);
        !s.ok()) {
      return ReportConfigError(s);
    }
  }

  absl::StatusOr<pmwcache::ExperimentResult> result =
      pmwcache::RunExperiment(*config);
  if (!result.ok()) {
    std::cerr << "run failed: " << result.status() << "\n";
    return absl::IsInvalidArgument(result.status()) ? kConfigError : kFailure;
  }
  if (absl::Status s = pmwcache::WriteExperimentOutputs(*result, out_dir);
      !s.ok()) {
    std::cerr << "cannot write outputs: " << s << "\n";
    return kFailure;
  }
  const pmwcache::ExperimentSummary& summary = result->summary;
  if (!summary.warning.empty()) std::cerr << "warning: " << summary.warning << "\n";
  std::cout << config->name << ": served " << summary.queries_served << "/"
            << summary.queries_requested << " queries, max spent "
            << summary.final_max << ", mean spent " << summary.final_mean
            << ", updates " << summary.updates << "\n";
  if (summary.exhausted) {
    std::cerr << "budget exhausted after " << summary.queries_served
              << " queries\n";
    return kExhausted;
  }
  return kOk;
}

int ValidateConfig(const std::string& config_path) {
  absl::StatusOr<pmwcache::ExperimentConfig> config = LoadConfig(config_path);
  if (!config.ok()) return ReportConfigError(config.status());
  std::cout << pmwcache::ExperimentConfigToJson(*config) << "\n";
  return kOk;
}

int PoolStats(const std::string& config_path) {
  absl::StatusOr<pmwcache::ExperimentConfig> config = LoadConfig(config_path);
  if (!config.ok()) return ReportConfigError(config.status());
  absl::StatusOr<pmwcache::DomainPtr> domain =
      pmwcache::DataDomain::Create(config->attributes);
  if (!domain.ok()) return ReportConfigError(domain.status());
  absl::StatusOr<uint64_t> size = pmwcache::ConjunctivePoolSize(**domain);
  if (!size.ok()) return ReportConfigError(size.status());
  std::cout << "domain_size," << (*domain)->size() << "\n"
            << "attributes," << (*domain)->num_attributes() << "\n"
            << "pool_size," << *size << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replays a query workload against a private cache engine"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string engine;
  uint64_t seed = 0;

  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config_path, "Experiment JSON")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();
  CLI::Option* seed_opt =
      run->add_option("--seed", seed, "Override the top-level seed");
  run->add_option("--engine", engine, "Override the engine");

  CLI::App* validate =
      app.add_subcommand("validate-config", "Check and print a config");
  validate->add_option("--config", config_path, "Experiment JSON")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* stats =
      app.add_subcommand("pool-stats", "Domain and query pool sizes");
  stats->add_option("--config", config_path, "Experiment JSON")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*run) {
    std::optional<uint64_t> seed_override;
    if (*seed_opt) seed_override = seed;
    return Run(config_path, out_dir, seed_override, engine);
  }
  if (*validate) return ValidateConfig(config_path);
  return PoolStats(config_path);
}
