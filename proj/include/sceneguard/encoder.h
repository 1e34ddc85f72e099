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

#ifndef SCENEGUARD_ENCODER_H_
#define SCENEGUARD_ENCODER_H_

#include <optional>
#include <string>
#include <vector>

#include "sceneguard/audio.h"
#include "sceneguard/mixer.h"

namespace sceneguard {

// Unit-L2-norm speaker embedding.
struct Embedding {
  std::vector<double> values;
};

enum class EncoderKind { kBuiltinMelStats, kExternalCommand };

// Speaker-embedding backend. The builtin backend is a deterministic,
// differentiable log-mel statistics embedding (40 per-band temporal means
// and 40 standard deviations, L2-normalized). The external backend wraps a
// user command for evaluation-only scoring and supports no gradients.
struct EncoderBackend {
  EncoderKind kind = EncoderKind::kBuiltinMelStats;
  // External backend: command invoked with one argument (a temporary WAV
  // path); must print a whitespace-separated real vector on stdout and exit
  // 0. The vector dimension is fixed by the first call.
  std::string command;
};

// Analysis parameters of the builtin embedding.
struct BuiltinEncoderConfig {
  int n_mels = 40;
  int fft_size = 512;
  int hop = 160;
  double f_min_hz = 0.0;
  double f_max_hz = 8000.0;
};

double CosineSimilarity(const Embedding& a, const Embedding& b);

// Embeds at the canonical sample rate; requires >= 0.5 s of audio.
Embedding Embed(const EncoderBackend& backend, const Waveform& w);

// Builtin chain: STFT -> mel-weighted magnitudes (40 bands) -> log1p ->
// per-band temporal mean and standard deviation -> concatenate -> L2
// normalize.
Embedding EmbedBuiltin(const Waveform& w,
                       const BuiltinEncoderConfig& cfg = {});

struct SimLossResult {
  double loss = 0.0;  // cosine(embed(x'), target)
  std::vector<double> d_mask_logits;
  double d_gamma_logit = 0.0;
  std::vector<double> mask;   // sigmoid(mask_logits)
  double gamma = 0.0;         // projected into [gamma_min, gamma_max]
  double peak_scale = 1.0;    // 0.99 / max|x'| actually used
};

// Loss and exact gradient of the chain
//   sigmoid -> gamma projection -> mix -> peak normalize -> builtin embed
//   -> cosine vs target,
// differentiated with respect to the unconstrained logits. The peak
// normalization scale is treated as a constant of the gradient; pass
// `fixed_peak_scale` to pin it to a known value (finite-difference oracles
// evaluate the chain at the base point's scale).
SimLossResult SimLossAndGradient(const Waveform& speech, const Waveform& noise,
                                 const std::vector<double>& mask_logits,
                                 double gamma_logit, const SnrBounds& bounds,
                                 const Embedding& target,
                                 std::optional<double> fixed_peak_scale = {},
                                 const BuiltinEncoderConfig& cfg = {});

// Same chain for pre-projected parameters: gradients are with respect to the
// mask values and gamma directly. Used by the optimizer, which applies the
// sigmoid/affine chain rule itself.
struct ProjectedSimLossResult {
  double loss = 0.0;
  std::vector<double> d_mask;
  double d_gamma = 0.0;
  double peak_scale = 1.0;
};
ProjectedSimLossResult SimLossAndGradientProjected(
    const Waveform& speech, const Waveform& noise,
    const std::vector<double>& mask, double gamma, const Embedding& target,
    std::optional<double> fixed_peak_scale = {},
    const BuiltinEncoderConfig& cfg = {});

}  // namespace sceneguard

#endif  // SCENEGUARD_ENCODER_H_
