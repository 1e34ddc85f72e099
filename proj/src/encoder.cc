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

#include "sceneguard/encoder.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <sstream>

#include "sceneguard/error.h"

namespace sceneguard {

namespace {

constexpr size_t kMinEmbedSamples = kCanonicalSampleRate / 2;  // 0.5 s
// Keeps the variance -> stddev derivative finite on pathologically flat
// bands; real signals sit many orders of magnitude above this.
constexpr double kVarianceEps = 1e-20;

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Shared mel filterbank cache: the builtin configuration is fixed per
// process run, and rebuilding 40x257 triangles per embed call is wasted
// work in the optimizer loop.
const MelFilterbank& CachedFilterbank(const BuiltinEncoderConfig& cfg) {
  static std::mutex mu;
  static BuiltinEncoderConfig cached_cfg;
  static MelFilterbank cached;
  static bool valid = false;
  std::lock_guard<std::mutex> lock(mu);
  if (!valid || cached_cfg.n_mels != cfg.n_mels ||
      cached_cfg.fft_size != cfg.fft_size ||
      cached_cfg.f_min_hz != cfg.f_min_hz ||
      cached_cfg.f_max_hz != cfg.f_max_hz) {
    cached = ComputeMelFilterbank(cfg.n_mels, cfg.fft_size,
                                  kCanonicalSampleRate, cfg.f_min_hz,
                                  cfg.f_max_hz);
    cached_cfg = cfg;
    valid = true;
  }
  return cached;
}

// Full forward state of the builtin chain, retained for backprop.
struct BuiltinForward {
  std::vector<std::vector<std::complex<double>>> spectra;  // F x bins
  std::vector<std::vector<double>> mel_mag;             // F x B
  std::vector<std::vector<double>> log_mel;                // F x B
  std::vector<double> mean;                                // B
  std::vector<double> variance;                            // B
  std::vector<double> stddev;                              // B
  std::vector<double> unnormalized;                        // 2B
  double norm = 0.0;
  std::vector<double> embedding;                           // 2B, unit norm
};

BuiltinForward BuiltinForwardPass(const std::vector<double>& samples,
                                  const BuiltinEncoderConfig& cfg) {
  if (samples.size() < kMinEmbedSamples)
    throw ContractError("embed: need at least 0.5 s of audio");

  const MelFilterbank& fb = CachedFilterbank(cfg);
  const size_t bins = static_cast<size_t>(cfg.fft_size) / 2 + 1;
  Waveform tmp;
  tmp.sample_rate_hz = kCanonicalSampleRate;
  tmp.samples = samples;
  BuiltinForward fwd;
  fwd.spectra = StftComplex(tmp, cfg.fft_size, cfg.hop);

  const size_t F = fwd.spectra.size();
  const size_t B = static_cast<size_t>(cfg.n_mels);
  fwd.mel_mag.assign(F, std::vector<double>(B, 0.0));
  fwd.log_mel.assign(F, std::vector<double>(B, 0.0));
  std::vector<double> magnitude(bins);
  for (size_t f = 0; f < F; ++f) {
    for (size_t k = 0; k < bins; ++k)
      magnitude[k] = std::abs(fwd.spectra[f][k]);
    for (size_t b = 0; b < B; ++b) {
      double e = 0.0;
      const auto& row = fb.weights[b];
      for (size_t k = 0; k < bins; ++k) e += row[k] * magnitude[k];
      fwd.mel_mag[f][b] = e;
      fwd.log_mel[f][b] = std::log1p(e);
    }
  }

  fwd.mean.assign(B, 0.0);
  fwd.variance.assign(B, 0.0);
  fwd.stddev.assign(B, 0.0);
  const double inv_f = 1.0 / static_cast<double>(F);
  for (size_t b = 0; b < B; ++b) {
    double m = 0.0;
    for (size_t f = 0; f < F; ++f) m += fwd.log_mel[f][b];
    m *= inv_f;
    double v = 0.0;
    for (size_t f = 0; f < F; ++f) {
      const double d = fwd.log_mel[f][b] - m;
      v += d * d;
    }
    v *= inv_f;
    fwd.mean[b] = m;
    fwd.variance[b] = v;
    fwd.stddev[b] = std::sqrt(v + kVarianceEps);
  }

  fwd.unnormalized.resize(2 * B);
  for (size_t b = 0; b < B; ++b) {
    fwd.unnormalized[b] = fwd.mean[b];
    fwd.unnormalized[B + b] = fwd.stddev[b];
  }
  double norm2 = 0.0;
  for (const double u : fwd.unnormalized) norm2 += u * u;
  fwd.norm = std::sqrt(norm2);
  if (!(fwd.norm > 0.0))
    throw ContractError("embed: degenerate signal (zero-power features)");
  fwd.embedding.resize(2 * B);
  for (size_t i = 0; i < fwd.embedding.size(); ++i)
    fwd.embedding[i] = fwd.unnormalized[i] / fwd.norm;
  return fwd;
}

// Backprop from d(loss)/d(embedding) to d(loss)/d(signal sample).
std::vector<double> BuiltinBackwardPass(const BuiltinForward& fwd,
                                        const std::vector<double>& d_embedding,
                                        size_t num_samples,
                                        const BuiltinEncoderConfig& cfg) {
  const MelFilterbank& fb = CachedFilterbank(cfg);
  const size_t F = fwd.spectra.size();
  const size_t B = fwd.mean.size();
  const size_t bins = static_cast<size_t>(cfg.fft_size) / 2 + 1;
  const size_t n_fft = static_cast<size_t>(cfg.fft_size);

  // Through L2 normalization: e = u / |u|.
  double e_dot = 0.0;
  for (size_t i = 0; i < d_embedding.size(); ++i)
    e_dot += d_embedding[i] * fwd.embedding[i];
  std::vector<double> d_u(2 * B);
  for (size_t i = 0; i < 2 * B; ++i)
    d_u[i] = (d_embedding[i] - fwd.embedding[i] * e_dot) / fwd.norm;

  // Through the per-band statistics to the log-mel frames.
  const double inv_f = 1.0 / static_cast<double>(F);
  std::vector<std::vector<double>> d_log(F, std::vector<double>(B, 0.0));
  for (size_t b = 0; b < B; ++b) {
    const double d_mean = d_u[b];
    const double d_var = d_u[B + b] / (2.0 * fwd.stddev[b]);
    for (size_t f = 0; f < F; ++f) {
      d_log[f][b] = d_mean * inv_f +
                    d_var * 2.0 * (fwd.log_mel[f][b] - fwd.mean[b]) * inv_f;
    }
  }

  // Through log1p and the filterbank to per-bin magnitude gradients, then
  // through |X| back to windowed time samples via an inverse transform:
  //   dL/dy[tau] = w[tau] * Re( sum_k gbin[k] (X[k]/|X[k]|) e^{+i2pi k tau/N} ).
  const std::vector<double> window = HannWindow(cfg.fft_size);
  std::vector<double> d_signal(num_samples, 0.0);
  std::vector<double> gbin(bins);
  std::vector<std::complex<double>> buf(n_fft);
  for (size_t f = 0; f < F; ++f) {
    for (size_t b = 0; b < B; ++b)
      d_log[f][b] /= (1.0 + fwd.mel_mag[f][b]);
    for (size_t k = 0; k < bins; ++k) {
      double g = 0.0;
      for (size_t b = 0; b < B; ++b) g += fb.weights[b][k] * d_log[f][b];
      gbin[k] = g;
    }
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (size_t k = 0; k < bins; ++k) {
      const double mag = std::abs(fwd.spectra[f][k]);
      if (mag > 0.0) buf[k] = gbin[k] * fwd.spectra[f][k] / mag;
    }
    Fft(&buf, /*inverse=*/true);
    const size_t start = f * static_cast<size_t>(cfg.hop);
    for (size_t t = 0; t < n_fft; ++t)
      d_signal[start + t] += window[t] * buf[t].real();
  }
  return d_signal;
}

Embedding RunExternalEncoder(const std::string& command, const Waveform& w);

}  // namespace

double CosineSimilarity(const Embedding& a, const Embedding& b) {
  if (a.values.size() != b.values.size())
    throw ContractError("CosineSimilarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na <= 0.0 || nb <= 0.0)
    throw ContractError("CosineSimilarity: zero-norm embedding");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

Embedding EmbedBuiltin(const Waveform& w, const BuiltinEncoderConfig& cfg) {
  if (w.sample_rate_hz != kCanonicalSampleRate)
    throw ContractError("embed: audio must be at the canonical rate");
  Embedding e;
  e.values = BuiltinForwardPass(w.samples, cfg).embedding;
  return e;
}

Embedding Embed(const EncoderBackend& backend, const Waveform& w) {
  if (w.sample_rate_hz != kCanonicalSampleRate)
    throw ContractError("embed: audio must be at the canonical rate");
  if (w.samples.size() < kMinEmbedSamples)
    throw ContractError("embed: need at least 0.5 s of audio");
  if (backend.kind == EncoderKind::kBuiltinMelStats) return EmbedBuiltin(w);
  return RunExternalEncoder(backend.command, w);
}

ProjectedSimLossResult SimLossAndGradientProjected(
    const Waveform& speech, const Waveform& noise,
    const std::vector<double>& mask, double gamma, const Embedding& target,
    std::optional<double> fixed_peak_scale, const BuiltinEncoderConfig& cfg) {
  if (speech.samples.size() != noise.samples.size() ||
      speech.samples.size() != mask.size())
    throw ContractError("SimLoss: speech/noise/mask length mismatch");
  const size_t T = speech.samples.size();

  // Mixture and its peak-normalized form. The normalization scale is a
  // constant of the gradient.
  std::vector<double> mixed(T);
  double peak = 0.0;
  for (size_t t = 0; t < T; ++t) {
    mixed[t] = speech.samples[t] + gamma * mask[t] * noise.samples[t];
    peak = std::max(peak, std::abs(mixed[t]));
  }
  if (peak <= 0.0)
    throw ContractError("SimLoss: degenerate all-zero mixture");
  const double scale =
      fixed_peak_scale.has_value() ? *fixed_peak_scale : 0.99 / peak;
  std::vector<double> normalized(T);
  for (size_t t = 0; t < T; ++t) normalized[t] = mixed[t] * scale;

  const BuiltinForward fwd = BuiltinForwardPass(normalized, cfg);
  if (fwd.embedding.size() != target.values.size())
    throw ContractError("SimLoss: target embedding dimension mismatch");

  double loss = 0.0;
  for (size_t i = 0; i < fwd.embedding.size(); ++i)
    loss += fwd.embedding[i] * target.values[i];

  // d(loss)/d(embedding) = target; propagate to the normalized signal, then
  // through the constant scale and the mixing model.
  const std::vector<double> d_signal =
      BuiltinBackwardPass(fwd, target.values, T, cfg);

  ProjectedSimLossResult out;
  out.loss = loss;
  out.peak_scale = scale;
  out.d_mask.resize(T);
  double d_gamma = 0.0;
  for (size_t t = 0; t < T; ++t) {
    const double d_mixed = d_signal[t] * scale;
    out.d_mask[t] = d_mixed * gamma * noise.samples[t];
    d_gamma += d_mixed * mask[t] * noise.samples[t];
  }
  out.d_gamma = d_gamma;
  return out;
}

SimLossResult SimLossAndGradient(const Waveform& speech, const Waveform& noise,
                                 const std::vector<double>& mask_logits,
                                 double gamma_logit, const SnrBounds& bounds,
                                 const Embedding& target,
                                 std::optional<double> fixed_peak_scale,
                                 const BuiltinEncoderConfig& cfg) {
  const size_t T = mask_logits.size();
  SimLossResult out;
  out.mask.resize(T);
  for (size_t t = 0; t < T; ++t) out.mask[t] = Sigmoid(mask_logits[t]);
  const double sg = Sigmoid(gamma_logit);
  out.gamma = bounds.gamma_min + (bounds.gamma_max - bounds.gamma_min) * sg;

  const ProjectedSimLossResult inner = SimLossAndGradientProjected(
      speech, noise, out.mask, out.gamma, target, fixed_peak_scale, cfg);

  out.loss = inner.loss;
  out.peak_scale = inner.peak_scale;
  out.d_mask_logits.resize(T);
  for (size_t t = 0; t < T; ++t)
    out.d_mask_logits[t] = inner.d_mask[t] * out.mask[t] * (1.0 - out.mask[t]);
  out.d_gamma_logit = inner.d_gamma * (bounds.gamma_max - bounds.gamma_min) *
                      sg * (1.0 - sg);
  return out;
}

namespace {

// --- external encoder ----------------------------------------------------

// Serializes external invocations; the protocol pins the output dimension to
// whatever the first call of each command produced.
std::mutex g_external_mutex;
std::map<std::string, size_t>& ExternalDims() {
  static std::map<std::string, size_t> dims;
  return dims;
}
std::atomic<uint64_t> g_tempfile_counter{0};

Embedding RunExternalEncoder(const std::string& command, const Waveform& w) {
  if (command.empty())
    throw ConfigError("external encoder backend has no command configured");

  std::lock_guard<std::mutex> lock(g_external_mutex);

  const auto dir = std::filesystem::temp_directory_path();
  const std::string wav_path =
      (dir / ("sceneguard_embed_" + std::to_string(::getpid()) + "_" +
              std::to_string(g_tempfile_counter.fetch_add(1)) + ".wav"))
          .string();
  WriteWav(w, wav_path);

  const std::string cmdline = command + " '" + wav_path + "'";
  FILE* pipe = popen(cmdline.c_str(), "r");
  if (pipe == nullptr) {
    std::filesystem::remove(wav_path);
    throw BackendError("external encoder: cannot spawn: " + cmdline);
  }
  std::string output;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  const int status = pclose(pipe);
  std::filesystem::remove(wav_path);
  if (status != 0)
    throw BackendError("external encoder exited with status " +
                       std::to_string(status));

  Embedding e;
  std::istringstream iss(output);
  double v;
  while (iss >> v) e.values.push_back(v);
  if (e.values.empty())
    throw BackendError("external encoder produced no numeric output");
  size_t& pinned = ExternalDims()[command];
  if (pinned == 0) {
    pinned = e.values.size();
  } else if (e.values.size() != pinned) {
    throw BackendError("external encoder dimension changed: expected " +
                       std::to_string(pinned) + ", got " +
                       std::to_string(e.values.size()));
  }
  double norm2 = 0.0;
  for (const double x : e.values) {
    if (!std::isfinite(x))
      throw BackendError("external encoder produced a non-finite value");
    norm2 += x * x;
  }
  if (norm2 <= 0.0)
    throw BackendError("external encoder produced a zero vector");
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : e.values) x *= inv;
  return e;
}

}  // namespace

}  // namespace sceneguard
