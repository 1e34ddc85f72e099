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

#include "sceneguard/optimizer.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "sceneguard/error.h"

namespace sceneguard {

namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double ProjectGamma(double gamma_logit, const SnrBounds& bounds) {
  return bounds.gamma_min +
         (bounds.gamma_max - bounds.gamma_min) * Sigmoid(gamma_logit);
}

void CheckFinite(const ProtectionParams& params, int epoch) {
  for (const double v : params.mask_logits) {
    if (!std::isfinite(v))
      throw Error("optimizer: non-finite mask logit after epoch " +
                  std::to_string(epoch));
  }
  if (!std::isfinite(params.gamma_logit))
    throw Error("optimizer: non-finite gamma logit after epoch " +
                std::to_string(epoch));
}

Waveform PrepareNoise(const Waveform& speech, const NoiseClip& clip,
                      Rng* rng) {
  if (clip.audio.samples.size() == speech.samples.size())
    return clip.audio;
  return MatchLength(clip, speech.samples.size(), rng);
}

}  // namespace

void OptimConfig::Validate() const {
  if (lr <= 0.0) throw ConfigError("OptimConfig: lr must be positive");
  if (epochs < 1) throw ConfigError("OptimConfig: epochs must be >= 1");
  if (clip_norm <= 0.0)
    throw ConfigError("OptimConfig: clip_norm must be positive");
  if (snr_min_db >= snr_max_db)
    throw ConfigError("OptimConfig: snr_min_db must be < snr_max_db");
}

double GradientVec::GlobalNorm() const {
  double acc = gamma * gamma;
  for (const double g : mask) acc += g * g;
  return std::sqrt(acc);
}

ProtectionParams InitParams(size_t num_samples, Rng* rng) {
  if (num_samples == 0) throw ContractError("InitParams: empty signal");
  ProtectionParams p;
  p.mask_logits.resize(num_samples);
  for (size_t t = 0; t < num_samples; ++t)
    p.mask_logits[t] = rng->Normal(0.0, 0.1);
  p.gamma_logit = 0.0;
  return p;
}

double MaskSmoothnessSum(const std::vector<double>& mask) {
  double acc = 0.0;
  for (size_t t = 0; t + 1 < mask.size(); ++t) {
    const double d = mask[t + 1] - mask[t];
    acc += d * d;
  }
  return acc;
}

double MaskSmoothnessMean(const std::vector<double>& mask) {
  if (mask.size() < 2) return 0.0;
  return MaskSmoothnessSum(mask) / static_cast<double>(mask.size() - 1);
}

LossBreakdown TotalLossAndGradient(const Waveform& speech,
                                   const Waveform& noise,
                                   const ProtectionParams& params,
                                   const SnrBounds& bounds,
                                   const OptimConfig& config,
                                   const Embedding& target, GradientVec* grad,
                                   std::optional<double> fixed_peak_scale) {
  const size_t T = params.mask_logits.size();
  std::vector<double> mask(T);
  for (size_t t = 0; t < T; ++t) mask[t] = Sigmoid(params.mask_logits[t]);
  const double sg = Sigmoid(params.gamma_logit);
  const double gamma_span = bounds.gamma_max - bounds.gamma_min;
  const double gamma = bounds.gamma_min + gamma_span * sg;

  const ProjectedSimLossResult sim = SimLossAndGradientProjected(
      speech, noise, mask, gamma, target, fixed_peak_scale);

  LossBreakdown loss;
  loss.sim = sim.loss;
  loss.smoothness = MaskSmoothnessSum(mask);
  loss.gamma_sq = gamma * gamma;
  loss.reg = loss.smoothness + loss.gamma_sq;
  loss.total = config.lambda_sim * loss.sim + config.lambda_reg * loss.reg;

  grad->mask.assign(T, 0.0);
  // d(smoothness)/d(mask[t]) = 2 (m[t] - m[t+1]) + 2 (m[t] - m[t-1]).
  for (size_t t = 0; t < T; ++t) {
    double d_mask = config.lambda_sim * sim.d_mask[t];
    double d_smooth = 0.0;
    if (t + 1 < T) d_smooth += 2.0 * (mask[t] - mask[t + 1]);
    if (t > 0) d_smooth += 2.0 * (mask[t] - mask[t - 1]);
    d_mask += config.lambda_reg * d_smooth;
    grad->mask[t] = d_mask * mask[t] * (1.0 - mask[t]);
  }
  const double d_gamma =
      config.lambda_sim * sim.d_gamma + config.lambda_reg * 2.0 * gamma;
  grad->gamma = d_gamma * gamma_span * sg * (1.0 - sg);
  return loss;
}

void ClipGradients(GradientVec* grad, double max_norm) {
  if (max_norm <= 0.0) throw ContractError("ClipGradients: max_norm <= 0");
  const double norm = grad->GlobalNorm();
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (double& g : grad->mask) g *= scale;
  grad->gamma *= scale;
}

void AdamStep(ProtectionParams* params, const GradientVec& grad,
              AdamState* state, const OptimConfig& config) {
  const size_t T = params->mask_logits.size();
  if (grad.mask.size() != T)
    throw ContractError("AdamStep: gradient size mismatch");
  for (const double g : grad.mask) {
    if (!std::isfinite(g))
      throw Error("AdamStep: non-finite mask gradient at step " +
                  std::to_string(state->step + 1));
  }
  if (!std::isfinite(grad.gamma))
    throw Error("AdamStep: non-finite gamma gradient at step " +
                std::to_string(state->step + 1));

  if (state->m_mask.size() != T) {
    state->m_mask.assign(T, 0.0);
    state->v_mask.assign(T, 0.0);
  }
  state->step += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state->step));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state->step));

  for (size_t t = 0; t < T; ++t) {
    state->m_mask[t] = b1 * state->m_mask[t] + (1.0 - b1) * grad.mask[t];
    state->v_mask[t] =
        b2 * state->v_mask[t] + (1.0 - b2) * grad.mask[t] * grad.mask[t];
    const double m_hat = state->m_mask[t] / bias1;
    const double v_hat = state->v_mask[t] / bias2;
    params->mask_logits[t] -=
        config.lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
  }
  state->m_gamma = b1 * state->m_gamma + (1.0 - b1) * grad.gamma;
  state->v_gamma = b2 * state->v_gamma + (1.0 - b2) * grad.gamma * grad.gamma;
  const double m_hat = state->m_gamma / bias1;
  const double v_hat = state->v_gamma / bias2;
  params->gamma_logit -=
      config.lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
}

ProtectionResult Protect(const Waveform& speech, const NoiseClip& noise_clip,
                         const OptimConfig& config, Rng* rng) {
  config.Validate();
  if (speech.samples.size() < static_cast<size_t>(kCanonicalSampleRate / 2))
    throw ContractError("Protect: speech must be at least 0.5 s");

  const Waveform noise = PrepareNoise(speech, noise_clip, rng);
  const double p_x = MeanSquare(speech.samples);
  const double p_n = MeanSquare(noise.samples);
  if (p_x <= 0.0 || p_n <= 0.0)
    throw ContractError("Protect: zero-power speech or noise");
  const SnrBounds bounds =
      ComputeGammaBounds(p_x, p_n, config.snr_min_db, config.snr_max_db);

  ProtectionParams params = InitParams(speech.samples.size(), rng);
  const Embedding target = EmbedBuiltin(speech);

  AdamState adam;
  GradientVec grad;
  ProtectionResult result;
  result.trace.reserve(config.epochs);

  std::vector<double> mask(speech.samples.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const LossBreakdown loss = TotalLossAndGradient(
        speech, noise, params, bounds, config, target, &grad);
    if (!std::isfinite(loss.total))
      throw Error("Protect: non-finite loss at epoch " +
                  std::to_string(epoch));

    for (size_t t = 0; t < mask.size(); ++t)
      mask[t] = Sigmoid(params.mask_logits[t]);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.total_loss = loss.total;
    rec.sim_loss = loss.sim;
    rec.reg_loss = loss.reg;
    rec.grad_norm = grad.GlobalNorm();
    rec.snr_db = EffectiveSnrDb(speech, noise, mask,
                                ProjectGamma(params.gamma_logit, bounds));
    result.trace.push_back(rec);

    ClipGradients(&grad, config.clip_norm);
    AdamStep(&params, grad, &adam, config);
    CheckFinite(params, epoch);
  }

  result.final_mask.resize(speech.samples.size());
  for (size_t t = 0; t < result.final_mask.size(); ++t)
    result.final_mask[t] = Sigmoid(params.mask_logits[t]);
  result.final_gamma = ProjectGamma(params.gamma_logit, bounds);
  result.protected_audio =
      Mix(speech, noise, result.final_mask, result.final_gamma);
  if (config.normalize_output)
    result.protected_audio = PeakNormalize(result.protected_audio);
  result.final_snr_db =
      EffectiveSnrDb(speech, noise, result.final_mask, result.final_gamma);
  return result;
}

ProtectionResult ProtectDirect(const Waveform& speech,
                               const NoiseClip& noise_clip,
                               const OptimConfig& config, Rng* rng) {
  config.Validate();
  if (speech.samples.size() < static_cast<size_t>(kCanonicalSampleRate / 2))
    throw ContractError("ProtectDirect: speech must be at least 0.5 s");

  const Waveform noise = PrepareNoise(speech, noise_clip, rng);
  const double p_x = MeanSquare(speech.samples);
  const double p_n = MeanSquare(noise.samples);
  if (p_x <= 0.0 || p_n <= 0.0)
    throw ContractError("ProtectDirect: zero-power speech or noise");

  ProtectionResult result;
  result.final_mask.resize(speech.samples.size());
  for (size_t t = 0; t < result.final_mask.size(); ++t)
    result.final_mask[t] = Sigmoid(rng->Normal(0.0, 0.1));
  // Gamma at the dB midpoint of the configured range with the mask fully
  // open.
  const double mid_db = 0.5 * (config.snr_min_db + config.snr_max_db);
  result.final_gamma = std::sqrt(p_x / (p_n * std::pow(10.0, mid_db / 10.0)));
  result.protected_audio =
      Mix(speech, noise, result.final_mask, result.final_gamma);
  if (config.normalize_output)
    result.protected_audio = PeakNormalize(result.protected_audio);
  result.final_snr_db =
      EffectiveSnrDb(speech, noise, result.final_mask, result.final_gamma);
  return result;
}

}  // namespace sceneguard
