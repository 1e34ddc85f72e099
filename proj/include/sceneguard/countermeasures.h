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

#ifndef SCENEGUARD_COUNTERMEASURES_H_
#define SCENEGUARD_COUNTERMEASURES_H_

#include <string>
#include <vector>

#include "sceneguard/audio.h"
#include "sceneguard/encoder.h"

namespace sceneguard {

enum class CountermeasureKind {
  kNone,
  kSpectralSubtraction,
  kLowpass3400,
  kDownsample8k,
  kExternalCodec,
};

// Attacker-side preprocessing description. Construct through the factories
// so the per-kind parameters are validated.
struct Countermeasure {
  CountermeasureKind kind = CountermeasureKind::kNone;

  // Spectral subtraction (Boll-style defaults, fixed for reproducibility).
  double oversubtraction = 2.0;       // alpha
  double spectral_floor = 0.01;       // beta
  double noise_frame_fraction = 0.1;  // lowest-energy decile

  // Lowpass.
  double cutoff_hz = 3400.0;
  int filter_order = 4;

  // Downsample (round-trips back to the canonical rate).
  int target_rate_hz = 8000;

  // External codec hook: command templates with {in}, {out}, {bitrate}
  // placeholders; both must exit 0.
  std::string encode_cmd;
  std::string decode_cmd;
  std::string bitrate;

  static Countermeasure None();
  static Countermeasure SpectralSubtraction();
  static Countermeasure Lowpass3400();
  static Countermeasure Downsample8k();
  static Countermeasure ExternalCodec(const std::string& encode_cmd,
                                      const std::string& decode_cmd,
                                      const std::string& bitrate);

  std::string Name() const;
  void Validate() const;
};

// Applies one countermeasure. Native kinds are total on canonical-rate
// audio; the codec hook raises BackendError (carrying stderr) on command
// failure and keeps its temp files for diagnosis.
Waveform ApplyCountermeasure(const Countermeasure& cm, const Waveform& w);

// Magnitude-domain subtraction rule, exposed for direct testing: the noise
// floor is the per-bin mean magnitude over the `fraction` lowest-energy
// frames and |Y| = max(|X| - alpha * floor, beta * |X|).
std::vector<std::vector<double>> SpectralSubtractMagnitudes(
    const std::vector<std::vector<double>>& magnitudes, double alpha,
    double beta, double fraction);

struct RobustnessRow {
  std::string name;
  double sim_mean = 0.0;
  double delta_sim = 0.0;  // vs the unprocessed baseline
};

// For each countermeasure, applies it to every protected sample and averages
// cosine(embed(clean_i), embed(processed_i)). Deltas are relative to the
// unprocessed protected audio.
std::vector<RobustnessRow> RunRobustnessMatrix(
    const std::vector<Waveform>& protected_audio,
    const std::vector<Waveform>& clean_audio,
    const std::vector<Countermeasure>& cms, const EncoderBackend& backend);

}  // namespace sceneguard

#endif  // SCENEGUARD_COUNTERMEASURES_H_
