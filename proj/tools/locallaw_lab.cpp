// Copyright 2026 The locallaw-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: one subcommand per experiment, a JSON config file,
// and optional overrides for seed, thread count, and output directory.
//
// Exit codes: 0 success, 1 runtime failure, 2 failed gated verdict,
// 3 configuration error, 4 identity-suite oracle disagreement.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "locallaw/harness.hpp"

namespace {

namespace harness = locallaw::harness;

struct SubcommandSpec {
  const char* name;
  harness::ExperimentKind kind;
  const char* help;
};

constexpr SubcommandSpec kSubcommands[] = {
    {"identities", harness::ExperimentKind::identities,
     "Check the exact resolvent identities to pinned tolerances"},
    {"moments", harness::ExperimentKind::moments,
     "Audit entry moments against closed-form targets"},
    {"concentration", harness::ExperimentKind::concentration,
     "Efron-Stein, event-conditioned minor bounds, and tail ladders"},
    {"self-consistent", harness::ExperimentKind::self_consistent,
     "Quadratic-residual sweep at eta = N^(-1+gamma)"},
    {"domination", harness::ExperimentKind::domination,
     "Finite-N surrogate for stochastic domination families"},
    {"bootstrap", harness::ExperimentKind::bootstrap,
     "Eta-ladder descent with certified Gamma* grids"},
    {"local-law", harness::ExperimentKind::local_law,
     "Flagship entrywise-error sweep (optionally plus the KS study)"},
    {"report", harness::ExperimentKind::report,
     "Grade the acceptance checklist from result CSVs"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locallaw-lab: numerical experiments on resolvents of large random matrices"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  int threads_override = -1;

  std::vector<std::pair<CLI::App*, harness::ExperimentKind>> subs;
  for (const auto& s : kSubcommands) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed_override, "Override the master seed");
    sub->add_option("--threads", threads_override,
                    "Override the worker count (0: LOCALLAW_THREADS env, else 1)");
    sub->add_option("--out", out_override, "Override the output directory");
    subs.emplace_back(sub, s.kind);
  }

  CLI11_PARSE(app, argc, argv);

  CLI::App* chosen = nullptr;
  harness::ExperimentKind kind = harness::ExperimentKind::identities;
  for (const auto& [sub, k] : subs)
    if (sub->parsed()) {
      chosen = sub;
      kind = k;
    }
  if (chosen == nullptr) return 3;  // unreachable with require_subcommand(1)

  try {
    harness::ExperimentConfig cfg = harness::parse_config_file(config_path, kind);
    if (chosen->count("--seed") > 0) cfg.seed = seed_override;
    if (chosen->count("--threads") > 0) cfg.threads = threads_override;
    if (chosen->count("--out") > 0) cfg.out = out_override;
    cfg.validate_or_throw();  // overrides must respect the same rules

    const auto t0 = std::chrono::steady_clock::now();
    std::printf("locallaw-lab %s | experiment %s | config %s (hash %s) | seed %llu | threads %d | eigen %d.%d.%d\n",
                harness::kVersion, harness::to_string(cfg.kind).c_str(),
                config_path.c_str(), harness::config_hash(cfg).c_str(),
                static_cast<unsigned long long>(cfg.seed), harness::effective_threads(cfg),
                EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
    std::fflush(stdout);

    const harness::ExperimentOutcome outcome = harness::run_experiment(cfg);
    for (const auto& v : outcome.verdicts)
      std::printf("[%s] %s\n", v.pass ? "PASS" : "FAIL", v.text.c_str());
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("wrote %s (%zu records)\n", outcome.csv_path.c_str(),
                outcome.records.size());
    for (const auto& a : outcome.artifacts) std::printf("wrote %s\n", a.c_str());
    std::printf("done in %.1f s, exit %d\n", secs, outcome.exit_code);
    return outcome.exit_code;
  } catch (const harness::ConfigError& ex) {
    std::fprintf(stderr, "%s\n", ex.what());
    return 3;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
}
