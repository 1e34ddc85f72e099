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

#include "sceneguard/mixer.h"

#include <algorithm>
#include <cmath>

#include "sceneguard/error.h"
#include "sceneguard/log.h"

namespace sceneguard {

Waveform Mix(const Waveform& speech, const Waveform& noise,
             const std::vector<double>& mask, double gamma) {
  if (speech.samples.size() != noise.samples.size() ||
      speech.samples.size() != mask.size())
    throw ContractError("Mix: speech, noise, and mask lengths must match");
  if (speech.sample_rate_hz != noise.sample_rate_hz)
    throw ContractError("Mix: sample rates must match");

  Waveform out;
  out.sample_rate_hz = speech.sample_rate_hz;
  out.samples.resize(speech.samples.size());
  for (size_t t = 0; t < out.samples.size(); ++t)
    out.samples[t] =
        speech.samples[t] + gamma * mask[t] * noise.samples[t];
  return out;
}

double EffectiveSnrDb(const Waveform& speech, const Waveform& noise,
                      const std::vector<double>& mask, double gamma) {
  if (speech.samples.size() != noise.samples.size() ||
      speech.samples.size() != mask.size())
    throw ContractError("EffectiveSnrDb: length mismatch");
  double p_eff = 0.0;
  for (size_t t = 0; t < noise.samples.size(); ++t) {
    const double v = gamma * mask[t] * noise.samples[t];
    p_eff += v * v;
  }
  p_eff /= static_cast<double>(noise.samples.size());
  if (p_eff <= 0.0)
    throw ContractError("EffectiveSnrDb: effective noise power is zero");
  return 10.0 * std::log10(MeanSquare(speech.samples) / p_eff);
}

SnrBounds ComputeGammaBounds(double p_x, double p_n, double snr_min_db,
                             double snr_max_db) {
  if (p_x <= 0.0 || p_n <= 0.0)
    throw ContractError("ComputeGammaBounds: powers must be positive");
  if (snr_min_db > snr_max_db)
    throw ContractError("ComputeGammaBounds: snr_min_db > snr_max_db");
  SnrBounds b;
  b.snr_min_db = snr_min_db;
  b.snr_max_db = snr_max_db;
  b.gamma_min = std::sqrt(p_x / (p_n * std::pow(10.0, snr_max_db / 10.0)));
  b.gamma_max = std::sqrt(p_x / (p_n * std::pow(10.0, snr_min_db / 10.0)));
  return b;
}

Waveform PeakNormalize(const Waveform& w, double target_peak) {
  double peak = 0.0;
  for (const double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak <= 0.0) {
    Warn("PeakNormalize: all-zero signal left unchanged");
    return w;
  }
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.resize(w.samples.size());
  const double scale = target_peak / peak;
  for (size_t t = 0; t < w.samples.size(); ++t)
    out.samples[t] = w.samples[t] * scale;
  return out;
}

}  // namespace sceneguard
