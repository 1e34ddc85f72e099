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

#ifndef SCENEGUARD_OPTIMIZER_H_
#define SCENEGUARD_OPTIMIZER_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "sceneguard/encoder.h"
#include "sceneguard/mixer.h"
#include "sceneguard/noise_library.h"
#include "sceneguard/rng.h"

namespace sceneguard {

// Unconstrained optimization variables: per-sample mask logits and a scalar
// strength logit. Projections: mask = sigmoid(logits), gamma affine-sigmoid
// into [gamma_min, gamma_max].
struct ProtectionParams {
  std::vector<double> mask_logits;
  double gamma_logit = 0.0;
};

struct OptimConfig {
  double lr = 0.01;
  int epochs = 50;
  double lambda_sim = 1.0;
  double lambda_reg = 0.01;
  double clip_norm = 1.0;
  double snr_min_db = 10.0;
  double snr_max_db = 20.0;
  uint64_t seed = 1337;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // When set, the returned protected waveform is peak-normalized to 0.99 the
  // way the in-loop mixtures are; off by default so output level stays
  // comparable to the input.
  bool normalize_output = false;

  void Validate() const;
};

struct GradientVec {
  std::vector<double> mask;
  double gamma = 0.0;

  double GlobalNorm() const;
};

struct AdamState {
  std::vector<double> m_mask, v_mask;
  double m_gamma = 0.0, v_gamma = 0.0;
  int64_t step = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double total_loss = 0.0;
  double sim_loss = 0.0;
  double reg_loss = 0.0;
  double grad_norm = 0.0;  // pre-clipping global L2 norm
  double snr_db = 0.0;     // effective SNR at this epoch's parameters
};

struct ProtectionResult {
  Waveform protected_audio;
  std::vector<double> final_mask;
  double final_gamma = 0.0;
  double final_snr_db = 0.0;
  std::vector<EpochRecord> trace;
};

// mask logits ~ Normal(0, 0.1^2) i.i.d. (mask near 0.5 after sigmoid),
// gamma logit = 0 (midpoint of the strength range).
ProtectionParams InitParams(size_t num_samples, Rng* rng);

// Sum and mean of squared finite differences of a mask. The mean form is the
// mask-smoothness statistic reported by the ablation harness.
double MaskSmoothnessSum(const std::vector<double>& mask);
double MaskSmoothnessMean(const std::vector<double>& mask);

struct LossBreakdown {
  double total = 0.0;
  double sim = 0.0;         // cosine similarity term
  double reg = 0.0;         // smoothness + gamma^2
  double smoothness = 0.0;  // sum of squared mask finite differences
  double gamma_sq = 0.0;
};

// Total loss lambda_sim * L_sim + lambda_reg * (smoothness + gamma^2) and
// its exact gradient with respect to the logits. `fixed_peak_scale` pins the
// peak-normalization constant (see SimLossAndGradient).
LossBreakdown TotalLossAndGradient(
    const Waveform& speech, const Waveform& noise,
    const ProtectionParams& params, const SnrBounds& bounds,
    const OptimConfig& config, const Embedding& target, GradientVec* grad,
    std::optional<double> fixed_peak_scale = {});

// Scales all gradients by max_norm / norm when the joint L2 norm exceeds
// max_norm.
void ClipGradients(GradientVec* grad, double max_norm);

// One bias-corrected Adam update. Gradients must already be clipped. Throws
// on non-finite gradients, naming the offending tensor.
void AdamStep(ProtectionParams* params, const GradientVec& grad,
              AdamState* state, const OptimConfig& config);

// Full optimization loop: per epoch, project mask and gamma, mix,
// peak-normalize, embed, evaluate the loss, clip gradients, Adam step. The
// returned waveform is rebuilt from the final parameters. Noise is
// length-matched internally when needed.
ProtectionResult Protect(const Waveform& speech, const NoiseClip& noise_clip,
                         const OptimConfig& config, Rng* rng);

// Ablation baseline: no optimization. Mask drawn once as in InitParams,
// gamma placed so the fully-open-mask SNR sits at the midpoint of the
// configured range in dB. Trace is empty.
ProtectionResult ProtectDirect(const Waveform& speech,
                               const NoiseClip& noise_clip,
                               const OptimConfig& config, Rng* rng);

}  // namespace sceneguard

#endif  // SCENEGUARD_OPTIMIZER_H_
