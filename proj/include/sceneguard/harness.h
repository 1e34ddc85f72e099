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

#ifndef SCENEGUARD_HARNESS_H_
#define SCENEGUARD_HARNESS_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sceneguard/countermeasures.h"
#include "sceneguard/encoder.h"
#include "sceneguard/optimizer.h"

namespace sceneguard {

inline constexpr const char* kToolVersion = "0.1.0";

// One row of the speech manifest
// `utterance_id,wav_path,scene,transcript_path?` (CSV, paths relative to the
// manifest).
struct UtteranceSpec {
  std::string id;
  std::string wav_path;
  std::string scene;
  std::string transcript_path;  // optional
};

std::vector<UtteranceSpec> LoadSpeechManifest(const std::string& path);

// Transcript files: one line per utterance, `utterance_id<TAB>text`.
std::map<std::string, std::string> LoadTranscripts(const std::string& path);

// Batch experiment configuration (JSON file). Environment variables
// SCENEGUARD_CODEC_ENCODE, SCENEGUARD_CODEC_DECODE and SCENEGUARD_ASR_CMD
// override the codec/ASR hooks.
struct ExperimentConfig {
  std::string speech_manifest;
  std::string noise_manifest;
  std::string output_dir = "out";
  uint64_t seed = 1337;
  int jobs = 0;  // <= 0 means hardware concurrency
  OptimConfig optim;
  EncoderBackend encoder;
  std::vector<Countermeasure> countermeasures;
  std::string codec_encode_cmd;
  std::string codec_decode_cmd;
  std::string asr_cmd;
  std::string noise_source = "scene";  // scene | random | gaussian
  std::vector<std::string> allowed_scenes;

  // Fully resolved configuration, echoed into every report.
  nlohmann::json Echo() const;
};

ExperimentConfig LoadExperimentConfig(const std::string& path);

enum class AblateMode { kSnrSweep, kOptimization, kHyperparameter };
AblateMode ParseAblateMode(const std::string& name);

// Protects every utterance in the corpus: one WAV and one JSON trace per
// utterance plus summary.csv. Returns 0 iff every utterance succeeded.
int CmdProtect(const ExperimentConfig& config);

// SIM/STOI/MCD (and WER when transcripts plus an ASR hook are available)
// over aligned clean/protected directories, with bootstrap CIs, the
// clean-vs-protected permutation test, and the zero-shot attack success
// rate. Writes evaluate_report.json and evaluate_summary.csv.
int CmdEvaluate(const ExperimentConfig& config, const std::string& clean_dir,
                const std::string& protected_dir);

// Per-countermeasure SIM/delta-SIM (plus STOI/WER columns) over the
// configured countermeasure list; codec rows are marked skipped when no
// codec hook is configured. Writes robustness_report.json / .csv.
int CmdRobustness(const ExperimentConfig& config, const std::string& clean_dir,
                  const std::string& protected_dir);

// Experiment recipes: snr_sweep ([5,10] [10,20] [15,25] [20,30] dB),
// optimization (paired optimized-vs-direct with a sign-flip test), and
// hyperparameter (lambda_reg in {0.001, 0.01, 0.1}, epochs in {20, 50,
// 100}). Writes ablate_<mode>_report.json / .csv.
int CmdAblate(const ExperimentConfig& config, AblateMode mode);

}  // namespace sceneguard

#endif  // SCENEGUARD_HARNESS_H_
