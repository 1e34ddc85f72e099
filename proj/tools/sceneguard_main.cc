// Copyright (c) 2026 SceneGuard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "sceneguard/harness.h"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int64_t seed = -1;
  int jobs = -1;

  void Register(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "Output directory (overrides config)");
    cmd->add_option("--seed", seed, "Random seed (overrides config)");
    cmd->add_option("--jobs", jobs,
                    "Worker threads; 0 = all cores (overrides config)");
  }

  sceneguard::ExperimentConfig Load() const {
    auto cfg = sceneguard::LoadExperimentConfig(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed >= 0) {
      cfg.seed = static_cast<uint64_t>(seed);
      cfg.optim.seed = cfg.seed;
    }
    if (jobs >= 0) cfg.jobs = jobs;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "sceneguard: voice-cloning protection via optimized scene-consistent "
      "background noise"};
  app.set_version_flag("--version", sceneguard::kToolVersion);
  app.require_subcommand(1);

  CommonArgs protect_args, evaluate_args, robustness_args, ablate_args;
  std::string clean_dir, protected_dir, robust_clean_dir, robust_protected_dir;
  std::string ablate_mode = "snr_sweep";

  CLI::App* protect_cmd =
      app.add_subcommand("protect", "Protect a corpus of utterances");
  protect_args.Register(protect_cmd);

  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "Score protection and usability of a protected corpus");
  evaluate_args.Register(evaluate_cmd);
  evaluate_cmd->add_option("--clean", clean_dir, "Directory of clean WAVs")
      ->required();
  evaluate_cmd
      ->add_option("--protected", protected_dir,
                   "Directory of protected WAVs")
      ->required();

  CLI::App* robustness_cmd = app.add_subcommand(
      "robustness", "Re-score protection under preprocessing countermeasures");
  robustness_args.Register(robustness_cmd);
  robustness_cmd
      ->add_option("--clean", robust_clean_dir, "Directory of clean WAVs")
      ->required();
  robustness_cmd
      ->add_option("--protected", robust_protected_dir,
                   "Directory of protected WAVs")
      ->required();

  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "Run one of the ablation recipes");
  ablate_args.Register(ablate_cmd);
  ablate_cmd
      ->add_option("--mode", ablate_mode,
                   "snr_sweep | optimization | hyperparameter")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (protect_cmd->parsed()) {
      return sceneguard::CmdProtect(protect_args.Load());
    }
    if (evaluate_cmd->parsed()) {
      return sceneguard::CmdEvaluate(evaluate_args.Load(), clean_dir,
                                     protected_dir);
    }
    if (robustness_cmd->parsed()) {
      return sceneguard::CmdRobustness(robustness_args.Load(),
                                       robust_clean_dir, robust_protected_dir);
    }
    if (ablate_cmd->parsed()) {
      return sceneguard::CmdAblate(ablate_args.Load(),
                                   sceneguard::ParseAblateMode(ablate_mode));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
