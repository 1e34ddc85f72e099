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

#ifndef SCENEGUARD_MIXER_H_
#define SCENEGUARD_MIXER_H_

#include <vector>

#include "sceneguard/audio.h"

namespace sceneguard {

// Valid strength range for a given SNR window. gamma_min corresponds to the
// loudest allowed SNR (snr_max_db), gamma_max to the quietest (snr_min_db),
// both evaluated with the mask fully open.
struct SnrBounds {
  double snr_min_db = 0.0;
  double snr_max_db = 0.0;
  double gamma_min = 0.0;
  double gamma_max = 0.0;
};

// x'(t) = x(t) + gamma * mask(t) * n(t). No normalization is applied here.
// Throws ContractError on length mismatch.
Waveform Mix(const Waveform& speech, const Waveform& noise,
             const std::vector<double>& mask, double gamma);

// 10 * log10(P_x / P_n') where P_n' is the mean square of the effective
// injected noise gamma * mask * n. Throws ContractError when the effective
// noise is identically zero.
double EffectiveSnrDb(const Waveform& speech, const Waveform& noise,
                      const std::vector<double>& mask, double gamma);

// gamma_min = sqrt(P_x / (P_n * 10^(snr_max/10))),
// gamma_max = sqrt(P_x / (P_n * 10^(snr_min/10))).
// A degenerate range (snr_min == snr_max) yields gamma_min == gamma_max.
SnrBounds ComputeGammaBounds(double p_x, double p_n, double snr_min_db,
                             double snr_max_db);

// Scales so that max |sample| == target_peak. All-zero input is returned
// unchanged with a warning.
Waveform PeakNormalize(const Waveform& w, double target_peak = 0.99);

}  // namespace sceneguard

#endif  // SCENEGUARD_MIXER_H_
