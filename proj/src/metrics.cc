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

#include "sceneguard/metrics.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <sstream>

#include "sceneguard/error.h"

namespace sceneguard {

namespace {

constexpr double kPi = 3.14159265358979323846;

// STOI constants (reference definition).
constexpr int kStoiRate = 10000;
constexpr int kStoiFrame = 256;
constexpr int kStoiHop = 128;
constexpr int kStoiFft = 512;
constexpr int kStoiBands = 15;
constexpr double kStoiLowestCenterHz = 150.0;
constexpr int kStoiSegment = 30;          // frames per short-time segment
constexpr double kStoiDynRangeDb = 40.0;  // silent-frame threshold
constexpr double kStoiBeta = -15.0;       // lower SDR bound, dB

// MATLAB-style symmetric Hanning without zero endpoints.
std::vector<double> HanningSymmetric(int n) {
  std::vector<double> w(n);
  for (int t = 0; t < n; ++t)
    w[t] = 0.5 * (1.0 - std::cos(2.0 * kPi * (t + 1) / (n + 1)));
  return w;
}

// Frame starts used by the reference STOI code: 0, hop, 2*hop, ...,
// strictly below len - frame.
std::vector<size_t> StoiFrameStarts(size_t len) {
  std::vector<size_t> starts;
  if (len <= static_cast<size_t>(kStoiFrame)) return starts;
  for (size_t s = 0; s < len - static_cast<size_t>(kStoiFrame); s += kStoiHop)
    starts.push_back(s);
  return starts;
}

// Removes frames whose clean-signal energy falls more than kStoiDynRangeDb
// below the loudest frame; kept frames are windowed and overlap-added back
// into shorter signals. Frame selection is driven by the clean signal only.
void RemoveSilentFrames(std::vector<double>* x, std::vector<double>* y) {
  const auto starts = StoiFrameStarts(x->size());
  if (starts.empty()) {
    x->clear();
    y->clear();
    return;
  }
  const auto w = HanningSymmetric(kStoiFrame);

  std::vector<double> energy_db(starts.size());
  double max_db = -1e300;
  for (size_t j = 0; j < starts.size(); ++j) {
    double e = 0.0;
    for (int t = 0; t < kStoiFrame; ++t) {
      const double v = (*x)[starts[j] + t] * w[t];
      e += v * v;
    }
    energy_db[j] = 10.0 * std::log10(e / kStoiFrame + 1e-300);
    max_db = std::max(max_db, energy_db[j]);
  }

  std::vector<double> xs(x->size(), 0.0), ys(y->size(), 0.0);
  size_t count = 0;
  size_t last_end = 0;
  for (size_t j = 0; j < starts.size(); ++j) {
    if (energy_db[j] - max_db + kStoiDynRangeDb <= 0.0) continue;
    const size_t out = count * static_cast<size_t>(kStoiHop);
    for (int t = 0; t < kStoiFrame; ++t) {
      xs[out + t] += (*x)[starts[j] + t] * w[t];
      ys[out + t] += (*y)[starts[j] + t] * w[t];
    }
    last_end = out + kStoiFrame;
    ++count;
  }
  xs.resize(last_end);
  ys.resize(last_end);
  *x = std::move(xs);
  *y = std::move(ys);
}

// One-sided magnitude-squared STFT with the reference framing.
std::vector<std::vector<double>> StoiPowerSpectra(
    const std::vector<double>& sig) {
  const auto starts = StoiFrameStarts(sig.size());
  const auto w = HanningSymmetric(kStoiFrame);
  const size_t bins = kStoiFft / 2 + 1;
  std::vector<std::vector<double>> power(starts.size(),
                                         std::vector<double>(bins, 0.0));
  std::vector<std::complex<double>> buf(kStoiFft);
  for (size_t j = 0; j < starts.size(); ++j) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (int t = 0; t < kStoiFrame; ++t)
      buf[t] = {sig[starts[j] + t] * w[t], 0.0};
    Fft(&buf, /*inverse=*/false);
    for (size_t k = 0; k < bins; ++k) power[j][k] = std::norm(buf[k]);
  }
  return power;
}

double SegmentCorrelation(const double* a, const double* b, int n) {
  double ma = 0.0, mb = 0.0;
  for (int i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double na = 0.0, nb = 0.0, dot = 0.0;
  for (int i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    na += da * da;
    nb += db * db;
    dot += da * db;
  }
  if (na <= 0.0 && nb <= 0.0) return 1.0;  // both constant
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace

double ComputeStoi(const Waveform& clean, const Waveform& processed) {
  if (clean.sample_rate_hz != processed.sample_rate_hz)
    throw ContractError("stoi: sample rates must match");

  Waveform x10 = Resample(clean, kStoiRate);
  Waveform y10 = Resample(processed, kStoiRate);
  y10.samples.resize(x10.samples.size(), 0.0);

  std::vector<double> x = std::move(x10.samples);
  std::vector<double> y = std::move(y10.samples);
  RemoveSilentFrames(&x, &y);

  const auto px = StoiPowerSpectra(x);
  const auto py = StoiPowerSpectra(y);
  const size_t num_frames = px.size();
  if (num_frames < static_cast<size_t>(kStoiSegment))
    throw ContractError(
        "stoi: signal too short after silent-frame removal (need one "
        "384 ms analysis segment)");

  static const std::vector<std::vector<double>> bands =
      ThirdOctaveBands(kStoiRate, kStoiFft, kStoiBands, kStoiLowestCenterHz);

  // Band envelopes: X_j(m) = sqrt(sum_k in band |X(k, m)|^2).
  std::vector<std::vector<double>> bx(kStoiBands,
                                      std::vector<double>(num_frames));
  std::vector<std::vector<double>> by(kStoiBands,
                                      std::vector<double>(num_frames));
  for (int j = 0; j < kStoiBands; ++j) {
    for (size_t m = 0; m < num_frames; ++m) {
      double ex = 0.0, ey = 0.0;
      for (size_t k = 0; k < bands[j].size(); ++k) {
        if (bands[j][k] > 0.0) {
          ex += px[m][k];
          ey += py[m][k];
        }
      }
      bx[j][m] = std::sqrt(ex);
      by[j][m] = std::sqrt(ey);
    }
  }

  const double clip_factor = std::pow(10.0, -kStoiBeta / 20.0);
  const int n = kStoiSegment;
  double acc = 0.0;
  size_t count = 0;
  std::vector<double> y_prime(n);
  for (size_t m = static_cast<size_t>(n); m <= num_frames; ++m) {
    const size_t seg0 = m - static_cast<size_t>(n);
    for (int j = 0; j < kStoiBands; ++j) {
      const double* xs = bx[j].data() + seg0;
      const double* ys = by[j].data() + seg0;
      double sum_x2 = 0.0, sum_y2 = 0.0;
      for (int i = 0; i < n; ++i) {
        sum_x2 += xs[i] * xs[i];
        sum_y2 += ys[i] * ys[i];
      }
      const double alpha = sum_y2 > 0.0 ? std::sqrt(sum_x2 / sum_y2) : 0.0;
      for (int i = 0; i < n; ++i)
        y_prime[i] = std::min(alpha * ys[i], xs[i] * (1.0 + clip_factor));
      acc += SegmentCorrelation(xs, y_prime.data(), n);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

std::vector<std::array<double, 13>> MelCepstra(const Waveform& w) {
  constexpr int kFft = 512;
  constexpr int kHop = 160;
  constexpr int kMels = 40;
  static const MelFilterbank fb = ComputeMelFilterbank(
      kMels, kFft, kCanonicalSampleRate, 0.0, kCanonicalSampleRate / 2.0);

  const auto frames = StftComplex(w, kFft, kHop);
  const size_t bins = kFft / 2 + 1;
  std::vector<std::array<double, 13>> cepstra(frames.size());
  std::vector<double> power(bins);
  std::vector<double> log_mel(kMels);
  for (size_t f = 0; f < frames.size(); ++f) {
    for (size_t k = 0; k < bins; ++k) power[k] = std::norm(frames[f][k]);
    for (int b = 0; b < kMels; ++b) {
      double e = 0.0;
      for (size_t k = 0; k < bins; ++k) e += fb.weights[b][k] * power[k];
      log_mel[b] = std::log1p(e);
    }
    for (int d = 0; d < 13; ++d) {
      double c = 0.0;
      for (int b = 0; b < kMels; ++b)
        c += log_mel[b] * std::cos(kPi * d * (b + 0.5) / kMels);
      cepstra[f][d] = c;
    }
  }
  return cepstra;
}

double McdFromCepstra(const std::vector<std::array<double, 13>>& a,
                      const std::vector<std::array<double, 13>>& b) {
  if (a.size() != b.size())
    throw ContractError("mcd: frame count mismatch");
  if (a.empty()) throw ContractError("mcd: no frames");
  double acc = 0.0;
  for (size_t f = 0; f < a.size(); ++f) {
    double d2 = 0.0;
    for (int d = 1; d < 13; ++d) {
      const double diff = a[f][d] - b[f][d];
      d2 += diff * diff;
    }
    acc += std::sqrt(d2);
  }
  return (10.0 / std::log(10.0)) * std::sqrt(2.0) * acc /
         static_cast<double>(a.size());
}

double ComputeMcd(const Waveform& clean, const Waveform& processed) {
  if (clean.samples.size() != processed.samples.size())
    throw ContractError("mcd: signals must have equal length");
  if (clean.sample_rate_hz != processed.sample_rate_hz)
    throw ContractError("mcd: signals must have equal rate");
  return McdFromCepstra(MelCepstra(clean), MelCepstra(processed));
}

Transcript NormalizeTranscript(const std::string& utterance_id,
                               const std::string& text) {
  Transcript t;
  t.utterance_id = utterance_id;
  std::string cleaned;
  cleaned.reserve(text.size());
  for (const char c : text) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '\'') {
      cleaned.push_back(static_cast<char>(std::tolower(u)));
    } else {
      cleaned.push_back(' ');
    }
  }
  std::istringstream iss(cleaned);
  std::string token;
  while (iss >> token) t.tokens.push_back(token);
  return t;
}

double ComputeWer(const Transcript& reference, const Transcript& hypothesis) {
  const auto& ref = reference.tokens;
  const auto& hyp = hypothesis.tokens;
  if (ref.empty()) throw ContractError("wer: empty reference transcript");

  std::vector<size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= hyp.size(); ++j) {
      const size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[hyp.size()]) /
         static_cast<double>(ref.size());
}

double AttackSuccessRate(const std::vector<double>& sims, double threshold) {
  if (sims.empty()) throw ContractError("attack success rate: empty input");
  size_t n = 0;
  for (const double s : sims)
    if (s > threshold) ++n;
  return static_cast<double>(n) / static_cast<double>(sims.size());
}

}  // namespace sceneguard
