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

#include "sceneguard/countermeasures.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sceneguard/error.h"

namespace sceneguard {

namespace {

constexpr int kSubtractionFft = 512;
constexpr int kSubtractionHop = 128;

std::atomic<uint64_t> g_codec_counter{0};

std::string ExpandTemplate(std::string tmpl, const std::string& in,
                           const std::string& out,
                           const std::string& bitrate) {
  auto replace_all = [](std::string s, const std::string& what,
                        const std::string& with) {
    size_t pos = 0;
    while ((pos = s.find(what, pos)) != std::string::npos) {
      s.replace(pos, what.size(), with);
      pos += with.size();
    }
    return s;
  };
  tmpl = replace_all(std::move(tmpl), "{in}", in);
  tmpl = replace_all(std::move(tmpl), "{out}", out);
  tmpl = replace_all(std::move(tmpl), "{bitrate}", bitrate);
  return tmpl;
}

// Runs a shell command, returning its exit status and captured stderr.
int RunCommand(const std::string& cmd, std::string* stderr_text) {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string err_path =
      (dir / ("sceneguard_cmd_err_" + std::to_string(::getpid()) + "_" +
              std::to_string(g_codec_counter.fetch_add(1)) + ".txt"))
          .string();
  const std::string full = cmd + " 2>'" + err_path + "'";
  const int status = std::system(full.c_str());
  std::ifstream err(err_path);
  if (err) {
    stderr_text->assign((std::istreambuf_iterator<char>(err)),
                        std::istreambuf_iterator<char>());
  }
  std::filesystem::remove(err_path);
  return status;
}

Waveform ApplySpectralSubtraction(const Countermeasure& cm,
                                  const Waveform& w) {
  if (w.samples.size() < static_cast<size_t>(kSubtractionFft)) return w;

  // Pad with zeros so overlap-add covers the edges exactly.
  Waveform padded;
  padded.sample_rate_hz = w.sample_rate_hz;
  padded.samples.assign(kSubtractionFft, 0.0);
  padded.samples.insert(padded.samples.end(), w.samples.begin(),
                        w.samples.end());
  padded.samples.insert(padded.samples.end(), kSubtractionFft, 0.0);

  auto frames = StftComplex(padded, kSubtractionFft, kSubtractionHop);
  std::vector<std::vector<double>> mags(frames.size());
  for (size_t f = 0; f < frames.size(); ++f) {
    mags[f].resize(frames[f].size());
    for (size_t k = 0; k < frames[f].size(); ++k)
      mags[f][k] = std::abs(frames[f][k]);
  }

  const auto subtracted = SpectralSubtractMagnitudes(
      mags, cm.oversubtraction, cm.spectral_floor, cm.noise_frame_fraction);

  // Keep the original phase, rescale magnitudes.
  for (size_t f = 0; f < frames.size(); ++f) {
    for (size_t k = 0; k < frames[f].size(); ++k) {
      const double m = mags[f][k];
      frames[f][k] = (m > 0.0)
                         ? frames[f][k] * (subtracted[f][k] / m)
                         : std::complex<double>(0.0, 0.0);
    }
  }

  Waveform rebuilt = IstftOverlapAdd(frames, kSubtractionFft, kSubtractionHop,
                                     padded.samples.size(), w.sample_rate_hz);
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.assign(rebuilt.samples.begin() + kSubtractionFft,
                     rebuilt.samples.begin() + kSubtractionFft +
                         w.samples.size());
  return out;
}

Waveform ApplyExternalCodec(const Countermeasure& cm, const Waveform& w) {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string stem =
      "sceneguard_codec_" + std::to_string(::getpid()) + "_" +
      std::to_string(g_codec_counter.fetch_add(1));
  const std::string wav_in = (dir / (stem + "_in.wav")).string();
  const std::string coded = (dir / (stem + "_coded.bin")).string();
  const std::string wav_out = (dir / (stem + "_out.wav")).string();

  WriteWav(w, wav_in);
  std::string err;
  const std::string encode =
      ExpandTemplate(cm.encode_cmd, wav_in, coded, cm.bitrate);
  if (RunCommand(encode, &err) != 0) {
    // Temp files retained on failure for diagnosis.
    throw BackendError("codec encode failed: " + encode +
                       (err.empty() ? "" : "\nstderr: " + err));
  }
  const std::string decode =
      ExpandTemplate(cm.decode_cmd, coded, wav_out, cm.bitrate);
  if (RunCommand(decode, &err) != 0) {
    throw BackendError("codec decode failed: " + decode +
                       (err.empty() ? "" : "\nstderr: " + err));
  }
  Waveform out = Resample(ReadWav(wav_out), w.sample_rate_hz);
  std::filesystem::remove(wav_in);
  std::filesystem::remove(coded);
  std::filesystem::remove(wav_out);
  return out;
}

}  // namespace

Countermeasure Countermeasure::None() {
  Countermeasure cm;
  cm.kind = CountermeasureKind::kNone;
  return cm;
}

Countermeasure Countermeasure::SpectralSubtraction() {
  Countermeasure cm;
  cm.kind = CountermeasureKind::kSpectralSubtraction;
  return cm;
}

Countermeasure Countermeasure::Lowpass3400() {
  Countermeasure cm;
  cm.kind = CountermeasureKind::kLowpass3400;
  return cm;
}

Countermeasure Countermeasure::Downsample8k() {
  Countermeasure cm;
  cm.kind = CountermeasureKind::kDownsample8k;
  return cm;
}

Countermeasure Countermeasure::ExternalCodec(const std::string& encode_cmd,
                                             const std::string& decode_cmd,
                                             const std::string& bitrate) {
  Countermeasure cm;
  cm.kind = CountermeasureKind::kExternalCodec;
  cm.encode_cmd = encode_cmd;
  cm.decode_cmd = decode_cmd;
  cm.bitrate = bitrate;
  cm.Validate();
  return cm;
}

std::string Countermeasure::Name() const {
  switch (kind) {
    case CountermeasureKind::kNone:
      return "none";
    case CountermeasureKind::kSpectralSubtraction:
      return "spectral_subtraction";
    case CountermeasureKind::kLowpass3400:
      return "lowpass_3400";
    case CountermeasureKind::kDownsample8k:
      return "downsample_8k";
    case CountermeasureKind::kExternalCodec:
      return bitrate.empty() ? "external_codec" : "external_codec_" + bitrate;
  }
  return "unknown";
}

void Countermeasure::Validate() const {
  switch (kind) {
    case CountermeasureKind::kSpectralSubtraction:
      if (oversubtraction < 0.0 || spectral_floor < 0.0 ||
          spectral_floor > 1.0 || noise_frame_fraction <= 0.0 ||
          noise_frame_fraction > 1.0)
        throw ConfigError("spectral subtraction: invalid parameters");
      break;
    case CountermeasureKind::kLowpass3400:
      if (cutoff_hz <= 0.0 || cutoff_hz >= kCanonicalSampleRate / 2.0)
        throw ConfigError("lowpass: cutoff must be below Nyquist");
      if (filter_order < 2 || filter_order % 2 != 0)
        throw ConfigError("lowpass: order must be even");
      break;
    case CountermeasureKind::kDownsample8k:
      if (target_rate_hz <= 0)
        throw ConfigError("downsample: target rate must be positive");
      break;
    case CountermeasureKind::kExternalCodec:
      if (encode_cmd.empty() || decode_cmd.empty())
        throw ConfigError("external codec: encode and decode commands needed");
      break;
    case CountermeasureKind::kNone:
      break;
  }
}

std::vector<std::vector<double>> SpectralSubtractMagnitudes(
    const std::vector<std::vector<double>>& magnitudes, double alpha,
    double beta, double fraction) {
  if (magnitudes.empty()) return {};
  const size_t F = magnitudes.size();
  const size_t bins = magnitudes.front().size();

  // Rank frames by total energy; the floor is the per-bin mean over the
  // lowest `fraction` of frames.
  std::vector<double> frame_energy(F, 0.0);
  for (size_t f = 0; f < F; ++f)
    for (const double m : magnitudes[f]) frame_energy[f] += m * m;
  std::vector<size_t> order(F);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return frame_energy[a] < frame_energy[b];
  });
  const size_t n_noise =
      std::max<size_t>(1, static_cast<size_t>(std::floor(F * fraction)));

  std::vector<double> floor_mag(bins, 0.0);
  for (size_t i = 0; i < n_noise; ++i) {
    const auto& row = magnitudes[order[i]];
    for (size_t k = 0; k < bins; ++k) floor_mag[k] += row[k];
  }
  for (double& v : floor_mag) v /= static_cast<double>(n_noise);

  std::vector<std::vector<double>> out(F, std::vector<double>(bins, 0.0));
  for (size_t f = 0; f < F; ++f) {
    for (size_t k = 0; k < bins; ++k) {
      out[f][k] = std::max(magnitudes[f][k] - alpha * floor_mag[k],
                           beta * magnitudes[f][k]);
    }
  }
  return out;
}

Waveform ApplyCountermeasure(const Countermeasure& cm, const Waveform& w) {
  cm.Validate();
  switch (cm.kind) {
    case CountermeasureKind::kNone:
      return w;
    case CountermeasureKind::kSpectralSubtraction:
      return ApplySpectralSubtraction(cm, w);
    case CountermeasureKind::kLowpass3400:
      return ButterworthLowpass(w, cm.cutoff_hz, cm.filter_order);
    case CountermeasureKind::kDownsample8k:
      return Resample(Resample(w, cm.target_rate_hz), w.sample_rate_hz);
    case CountermeasureKind::kExternalCodec:
      return ApplyExternalCodec(cm, w);
  }
  throw ConfigError("unknown countermeasure kind");
}

std::vector<RobustnessRow> RunRobustnessMatrix(
    const std::vector<Waveform>& protected_audio,
    const std::vector<Waveform>& clean_audio,
    const std::vector<Countermeasure>& cms, const EncoderBackend& backend) {
  if (protected_audio.size() != clean_audio.size())
    throw ContractError("RunRobustnessMatrix: lists must be aligned");
  if (protected_audio.empty())
    throw ContractError("RunRobustnessMatrix: empty sample list");

  std::vector<Embedding> clean_emb(clean_audio.size());
  for (size_t i = 0; i < clean_audio.size(); ++i)
    clean_emb[i] = Embed(backend, clean_audio[i]);

  // Baseline: unprocessed protected audio.
  double baseline = 0.0;
  for (size_t i = 0; i < protected_audio.size(); ++i)
    baseline +=
        CosineSimilarity(clean_emb[i], Embed(backend, protected_audio[i]));
  baseline /= static_cast<double>(protected_audio.size());

  std::vector<RobustnessRow> rows;
  rows.reserve(cms.size());
  for (const auto& cm : cms) {
    RobustnessRow row;
    row.name = cm.Name();
    if (cm.kind == CountermeasureKind::kNone) {
      row.sim_mean = baseline;
      row.delta_sim = 0.0;
    } else {
      double acc = 0.0;
      for (size_t i = 0; i < protected_audio.size(); ++i) {
        const Waveform processed = ApplyCountermeasure(cm, protected_audio[i]);
        acc += CosineSimilarity(clean_emb[i], Embed(backend, processed));
      }
      row.sim_mean = acc / static_cast<double>(protected_audio.size());
      row.delta_sim = row.sim_mean - baseline;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace sceneguard
