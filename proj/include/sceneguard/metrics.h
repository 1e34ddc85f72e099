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

#ifndef SCENEGUARD_METRICS_H_
#define SCENEGUARD_METRICS_H_

#include <array>
#include <string>
#include <vector>

#include "sceneguard/audio.h"

namespace sceneguard {

// Short-time objective intelligibility, reference procedure: both signals
// resampled to 10 kHz, clean-driven silent-frame removal (40 dB dynamic
// range), 256-sample frames / 512 FFT, 15 one-third-octave bands from
// 150 Hz, 30-frame segments with normalization and clipping at -15 dB SDR,
// averaged band/segment correlation. The processed signal is padded or
// truncated to the clean length. Throws ContractError when fewer than one
// analysis segment survives.
double ComputeStoi(const Waveform& clean, const Waveform& processed);

// 13 mel-cepstral coefficients per frame (DCT of 40-band log-mel power,
// canonical analysis parameters).
std::vector<std::array<double, 13>> MelCepstra(const Waveform& w);

// Frame-aligned mel-cepstral distortion in dB, c0 excluded:
// (10 / ln 10) * sqrt(2) * mean_f ||delta c_{1..12}||.
double McdFromCepstra(const std::vector<std::array<double, 13>>& a,
                      const std::vector<std::array<double, 13>>& b);

// MCD between equal-length, equal-rate signals. Throws ContractError on
// mismatch.
double ComputeMcd(const Waveform& clean, const Waveform& processed);

struct Transcript {
  std::string utterance_id;
  std::vector<std::string> tokens;
};

// Lowercases, strips punctuation, splits on whitespace. Idempotent.
Transcript NormalizeTranscript(const std::string& utterance_id,
                               const std::string& text);

// Word error rate: token-level Levenshtein distance with unit costs divided
// by the reference length. Throws ContractError on an empty reference.
double ComputeWer(const Transcript& reference, const Transcript& hypothesis);

// Fraction of similarities strictly above the threshold.
double AttackSuccessRate(const std::vector<double>& sims,
                         double threshold = 0.7);

}  // namespace sceneguard

#endif  // SCENEGUARD_METRICS_H_
