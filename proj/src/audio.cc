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

#include "sceneguard/audio.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "sceneguard/error.h"
#include "sceneguard/log.h"

namespace sceneguard {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool IsPowerOfTwo(int n) { return n > 0 && (n & (n - 1)) == 0; }

// --- little-endian readers over a byte buffer ----------------------------

struct ByteReader {
  const uint8_t* data;
  size_t size;
  size_t pos = 0;

  bool CanRead(size_t n) const { return pos + n <= size; }

  uint32_t ReadU32() {
    if (!CanRead(4)) throw FormatError("truncated WAV header");
    uint32_t v = static_cast<uint32_t>(data[pos]) |
                 (static_cast<uint32_t>(data[pos + 1]) << 8) |
                 (static_cast<uint32_t>(data[pos + 2]) << 16) |
                 (static_cast<uint32_t>(data[pos + 3]) << 24);
    pos += 4;
    return v;
  }

  uint16_t ReadU16() {
    if (!CanRead(2)) throw FormatError("truncated WAV header");
    uint16_t v = static_cast<uint16_t>(data[pos]) |
                 static_cast<uint16_t>(static_cast<uint16_t>(data[pos + 1])
                                       << 8);
    pos += 2;
    return v;
  }

  void ReadTag(char out[4]) {
    if (!CanRead(4)) throw FormatError("truncated WAV header");
    std::memcpy(out, data + pos, 4);
    pos += 4;
  }

  void Skip(size_t n) {
    if (!CanRead(n)) throw FormatError("truncated WAV chunk");
    pos += n;
  }
};

constexpr uint16_t kWaveFormatPcm = 0x0001;
constexpr uint16_t kWaveFormatIeeeFloat = 0x0003;
constexpr uint16_t kWaveFormatExtensible = 0xFFFE;

}  // namespace

double MeanSquare(const std::vector<double>& samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

double Rms(const std::vector<double>& samples) {
  return std::sqrt(MeanSquare(samples));
}

Waveform ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  in.close();

  ByteReader r{bytes.data(), bytes.size()};
  char tag[4];
  r.ReadTag(tag);
  if (std::memcmp(tag, "RIFF", 4) != 0)
    throw FormatError("not a RIFF file: " + path);
  r.ReadU32();  // RIFF size, unused.
  r.ReadTag(tag);
  if (std::memcmp(tag, "WAVE", 4) != 0)
    throw FormatError("not a WAVE file: " + path);

  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t bits_per_sample = 0;
  bool have_fmt = false;
  const uint8_t* pcm_data = nullptr;
  size_t pcm_size = 0;

  while (r.CanRead(8)) {
    r.ReadTag(tag);
    const uint32_t chunk_size = r.ReadU32();
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError("fmt chunk too small: " + path);
      const size_t fmt_end = r.pos + chunk_size;
      format = r.ReadU16();
      channels = r.ReadU16();
      sample_rate = r.ReadU32();
      r.ReadU32();  // byte rate
      r.ReadU16();  // block align
      bits_per_sample = r.ReadU16();
      if (format == kWaveFormatExtensible) {
        // Sub-format GUID starts 8 bytes into the extension; its first two
        // bytes hold the actual format code.
        if (chunk_size < 40)
          throw FormatError("extensible fmt chunk too small: " + path);
        r.ReadU16();  // cbSize
        r.ReadU16();  // valid bits
        r.ReadU32();  // channel mask
        format = r.ReadU16();
      }
      if (fmt_end < r.pos) throw FormatError("corrupt fmt chunk: " + path);
      r.Skip(fmt_end - r.pos);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!r.CanRead(chunk_size))
        throw FormatError("data chunk extends past end of file: " + path);
      pcm_data = r.data + r.pos;
      pcm_size = chunk_size;
      r.Skip(chunk_size);
    } else {
      r.Skip(chunk_size);
    }
    if (chunk_size % 2 == 1 && r.CanRead(1)) r.Skip(1);  // word alignment
  }

  if (!have_fmt || pcm_data == nullptr)
    throw FormatError("missing fmt or data chunk: " + path);
  if (channels == 0 || sample_rate == 0)
    throw FormatError("invalid channel count or sample rate: " + path);

  const bool pcm16 = (format == kWaveFormatPcm && bits_per_sample == 16);
  const bool f32 = (format == kWaveFormatIeeeFloat && bits_per_sample == 32);
  if (!pcm16 && !f32)
    throw FormatError("unsupported WAV encoding (need PCM16 or float32): " +
                      path);

  const size_t bytes_per_sample = bits_per_sample / 8;
  const size_t frame_bytes = bytes_per_sample * channels;
  const size_t num_frames = pcm_size / frame_bytes;

  Waveform w;
  w.sample_rate_hz = static_cast<int>(sample_rate);
  w.samples.resize(num_frames);
  const double inv_channels = 1.0 / channels;
  for (size_t i = 0; i < num_frames; ++i) {
    double acc = 0.0;
    const uint8_t* frame = pcm_data + i * frame_bytes;
    for (size_t c = 0; c < channels; ++c) {
      const uint8_t* p = frame + c * bytes_per_sample;
      if (pcm16) {
        const int16_t v =
            static_cast<int16_t>(static_cast<uint16_t>(p[0]) |
                                 (static_cast<uint16_t>(p[1]) << 8));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        uint32_t u = static_cast<uint32_t>(p[0]) |
                     (static_cast<uint32_t>(p[1]) << 8) |
                     (static_cast<uint32_t>(p[2]) << 16) |
                     (static_cast<uint32_t>(p[3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        acc += static_cast<double>(f);
      }
    }
    w.samples[i] = acc * inv_channels;
  }
  return w;
}

void WriteWav(const Waveform& w, const std::string& path) {
  bool clipped = false;
  std::vector<int16_t> pcm(w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i) {
    double s = w.samples[i];
    if (s > 1.0 || s < -1.0) {
      clipped = true;
      s = std::clamp(s, -1.0, 1.0);
    }
    const long q = std::lround(s * 32768.0);
    pcm[i] = static_cast<int16_t>(std::clamp<long>(q, -32768, 32767));
  }
  if (clipped)
    Warn("WriteWav: samples outside [-1, 1] clipped in " + path);

  const uint32_t data_bytes = static_cast<uint32_t>(pcm.size() * 2);
  const uint32_t sr = static_cast<uint32_t>(w.sample_rate_hz);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  auto put_u32 = [&out](uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                 static_cast<char>((v >> 16) & 0xFF),
                 static_cast<char>((v >> 24) & 0xFF)};
    out.write(b, 4);
  };
  auto put_u16 = [&out](uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xFF),
                 static_cast<char>((v >> 8) & 0xFF)};
    out.write(b, 2);
  };

  out.write("RIFF", 4);
  put_u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(kWaveFormatPcm);
  put_u16(1);  // mono
  put_u32(sr);
  put_u32(sr * 2);  // byte rate
  put_u16(2);       // block align
  put_u16(16);      // bits per sample
  out.write("data", 4);
  put_u32(data_bytes);
  out.write(reinterpret_cast<const char*>(pcm.data()), data_bytes);
  if (!out) throw IoError("write failed: " + path);
}

namespace {

// Zeroth-order modified Bessel function, power series.
double BesselI0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double x2 = x * x * 0.25;
  for (int k = 1; k < 64; ++k) {
    term *= x2 / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double Sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

Waveform Resample(const Waveform& w, int target_rate_hz) {
  if (target_rate_hz <= 0)
    throw ContractError("Resample: target rate must be positive");
  if (w.sample_rate_hz <= 0)
    throw ContractError("Resample: input rate must be positive");
  if (target_rate_hz == w.sample_rate_hz) return w;

  const double ratio =
      static_cast<double>(target_rate_hz) / w.sample_rate_hz;
  const size_t out_len = static_cast<size_t>(
      std::llround(static_cast<double>(w.samples.size()) * ratio));

  Waveform out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.assign(out_len, 0.0);
  if (w.samples.empty() || out_len == 0) return out;

  // Kernel defined at the lower of the two rates: half-width of kHalfTaps
  // samples, cutoff slightly inside Nyquist, Kaiser window (beta = 10 gives
  // roughly 100 dB stopband).
  constexpr int kHalfTaps = 32;
  constexpr double kBeta = 10.0;
  constexpr double kCutoff = 0.95;
  const double scale = std::min(1.0, ratio);  // source-sample -> kernel units
  const double half_width_src = kHalfTaps / scale;
  const double inv_i0_beta = 1.0 / BesselI0(kBeta);
  const int64_t n = static_cast<int64_t>(w.samples.size());

  for (size_t i = 0; i < out_len; ++i) {
    const double t = static_cast<double>(i) / ratio;  // center, source units
    int64_t j0 = static_cast<int64_t>(std::ceil(t - half_width_src));
    int64_t j1 = static_cast<int64_t>(std::floor(t + half_width_src));
    j0 = std::max<int64_t>(j0, 0);
    j1 = std::min<int64_t>(j1, n - 1);
    double acc = 0.0;
    double wsum = 0.0;
    for (int64_t j = j0; j <= j1; ++j) {
      const double u = (static_cast<double>(j) - t) * scale;
      const double frac = u / kHalfTaps;
      if (frac <= -1.0 || frac >= 1.0) continue;
      const double window =
          BesselI0(kBeta * std::sqrt(1.0 - frac * frac)) * inv_i0_beta;
      const double h = kCutoff * Sinc(kCutoff * u) * window;
      acc += w.samples[static_cast<size_t>(j)] * h;
      wsum += h;
    }
    // Per-phase normalization keeps unity DC gain, including at the edges
    // where the kernel is truncated.
    out.samples[i] = (std::abs(wsum) > 1e-12) ? acc / wsum : acc;
  }
  return out;
}

std::vector<double> HannWindow(int size) {
  std::vector<double> w(size);
  for (int t = 0; t < size; ++t)
    w[t] = 0.5 * (1.0 - std::cos(2.0 * kPi * t / size));
  return w;
}

void Fft(std::vector<std::complex<double>>* data, bool inverse) {
  auto& a = *data;
  const size_t n = a.size();
  if (n == 0) return;
  if ((n & (n - 1)) != 0)
    throw ContractError("Fft: size must be a power of two");

  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) *
                       (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<std::vector<std::complex<double>>> StftComplex(const Waveform& w,
                                                           int fft_size,
                                                           int hop) {
  if (!IsPowerOfTwo(fft_size))
    throw ContractError("StftComplex: fft_size must be a power of two");
  if (hop <= 0 || hop > fft_size)
    throw ContractError("StftComplex: need 0 < hop <= fft_size");
  if (w.samples.size() < static_cast<size_t>(fft_size))
    throw ContractError("StftComplex: signal shorter than fft_size");

  const size_t num_frames =
      1 + (w.samples.size() - static_cast<size_t>(fft_size)) /
              static_cast<size_t>(hop);
  const std::vector<double> window = HannWindow(fft_size);
  const size_t bins = static_cast<size_t>(fft_size) / 2 + 1;

  std::vector<std::vector<std::complex<double>>> frames(num_frames);
  std::vector<std::complex<double>> buf(fft_size);
  for (size_t f = 0; f < num_frames; ++f) {
    const size_t start = f * static_cast<size_t>(hop);
    for (int t = 0; t < fft_size; ++t)
      buf[t] = {w.samples[start + t] * window[t], 0.0};
    Fft(&buf, /*inverse=*/false);
    frames[f].assign(buf.begin(), buf.begin() + bins);
  }
  return frames;
}

Spectrogram Stft(const Waveform& w, int fft_size, int hop) {
  const auto frames = StftComplex(w, fft_size, hop);
  Spectrogram s;
  s.frame_hop_samples = hop;
  s.fft_size = fft_size;
  s.sample_rate_hz = w.sample_rate_hz;
  s.magnitudes.resize(frames.size());
  for (size_t f = 0; f < frames.size(); ++f) {
    s.magnitudes[f].resize(frames[f].size());
    for (size_t k = 0; k < frames[f].size(); ++k)
      s.magnitudes[f][k] = std::abs(frames[f][k]);
  }
  return s;
}

Waveform IstftOverlapAdd(
    const std::vector<std::vector<std::complex<double>>>& frames, int fft_size,
    int hop, size_t num_samples, int sample_rate_hz) {
  if (!IsPowerOfTwo(fft_size))
    throw ContractError("IstftOverlapAdd: fft_size must be a power of two");
  const size_t bins = static_cast<size_t>(fft_size) / 2 + 1;
  const std::vector<double> window = HannWindow(fft_size);
  const size_t total =
      frames.empty() ? 0
                     : (frames.size() - 1) * static_cast<size_t>(hop) +
                           static_cast<size_t>(fft_size);

  std::vector<double> acc(total, 0.0);
  std::vector<double> norm(total, 0.0);
  std::vector<std::complex<double>> buf(fft_size);
  for (size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].size() != bins)
      throw ContractError("IstftOverlapAdd: inconsistent bin count");
    for (size_t k = 0; k < bins; ++k) buf[k] = frames[f][k];
    for (size_t k = bins; k < static_cast<size_t>(fft_size); ++k)
      buf[k] = std::conj(frames[f][fft_size - k]);
    Fft(&buf, /*inverse=*/true);
    const size_t start = f * static_cast<size_t>(hop);
    for (int t = 0; t < fft_size; ++t) {
      const double sample = buf[t].real() / fft_size;
      acc[start + t] += sample * window[t];
      norm[start + t] += window[t] * window[t];
    }
  }

  Waveform out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.resize(std::min(num_samples, total), 0.0);
  for (size_t t = 0; t < out.samples.size(); ++t)
    out.samples[t] = norm[t] > 1e-10 ? acc[t] / norm[t] : 0.0;
  out.samples.resize(num_samples, 0.0);
  return out;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank ComputeMelFilterbank(int n_mels, int fft_size,
                                   int sample_rate_hz, double f_min_hz,
                                   double f_max_hz) {
  if (n_mels <= 0) throw ConfigError("mel filterbank: n_mels must be >= 1");
  if (!(f_min_hz >= 0.0 && f_min_hz < f_max_hz &&
        f_max_hz <= sample_rate_hz / 2.0))
    throw ConfigError("mel filterbank: need 0 <= f_min < f_max <= Nyquist");

  const size_t bins = static_cast<size_t>(fft_size) / 2 + 1;
  const double mel_lo = HzToMel(f_min_hz);
  const double mel_hi = HzToMel(f_max_hz);

  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  MelFilterbank fb;
  fb.f_min_hz = f_min_hz;
  fb.f_max_hz = f_max_hz;
  fb.weights.assign(n_mels, std::vector<double>(bins, 0.0));
  for (int b = 0; b < n_mels; ++b) {
    const double left = edges[b];
    const double center = edges[b + 1];
    const double right = edges[b + 2];
    bool any = false;
    for (size_t k = 0; k < bins; ++k) {
      const double f =
          static_cast<double>(k) * sample_rate_hz / fft_size;
      double v = 0.0;
      if (f > left && f < right) {
        v = (f <= center) ? (f - left) / (center - left)
                          : (right - f) / (right - center);
      }
      if (v > 0.0) {
        fb.weights[b][k] = v;
        any = true;
      }
    }
    if (!any)
      throw ConfigError(
          "mel filterbank: filter " + std::to_string(b) +
          " is empty at this FFT resolution; reduce n_mels or raise fft_size");
  }
  return fb;
}

std::vector<std::vector<double>> ThirdOctaveBands(int sample_rate_hz,
                                                  int fft_size, int n_bands,
                                                  double lowest_center_hz) {
  const size_t bins = static_cast<size_t>(fft_size) / 2 + 1;
  std::vector<std::vector<double>> bands(n_bands,
                                         std::vector<double>(bins, 0.0));
  auto nearest_bin = [&](double hz) {
    const double pos = hz * fft_size / sample_rate_hz;
    long k = std::lround(pos);
    return std::clamp<long>(k, 0, static_cast<long>(bins) - 1);
  };
  for (int j = 0; j < n_bands; ++j) {
    const double cf = lowest_center_hz * std::pow(2.0, j / 3.0);
    const double fl = cf * std::pow(2.0, -1.0 / 6.0);
    const double fr = cf * std::pow(2.0, 1.0 / 6.0);
    const long kl = nearest_bin(fl);
    const long kr = nearest_bin(fr);
    for (long k = kl; k < kr; ++k) bands[j][static_cast<size_t>(k)] = 1.0;
  }
  return bands;
}

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

  // Steady-state DF2T filter state for a unit-step input (unity DC gain).
  void SteadyState(double x0, double* z1, double* z2) const {
    *z2 = (b2 - a2) * x0;
    *z1 = (b1 - a1 + b2 - a2) * x0;
  }
};

std::vector<Biquad> DesignButterworthLowpass(double cutoff_hz, int order,
                                             int sample_rate_hz) {
  // Bilinear transform with the cutoff prewarped; analog prototype poles at
  // angles (2k - 1) * pi / (2 * order) off the negative real axis.
  const double k_warp = 1.0 / std::tan(kPi * cutoff_hz / sample_rate_hz);
  const double k2 = k_warp * k_warp;
  std::vector<Biquad> sections;
  sections.reserve(order / 2);
  for (int s = 0; s < order / 2; ++s) {
    const double a = 2.0 * std::sin(kPi * (2.0 * s + 1.0) / (2.0 * order));
    const double d = k2 + a * k_warp + 1.0;
    Biquad q;
    q.b0 = 1.0 / d;
    q.b1 = 2.0 * q.b0;
    q.b2 = q.b0;
    q.a1 = 2.0 * (1.0 - k2) / d;
    q.a2 = (k2 - a * k_warp + 1.0) / d;
    sections.push_back(q);
  }
  return sections;
}

void FilterInPlace(const Biquad& q, std::vector<double>* x) {
  double z1, z2;
  q.SteadyState((*x)[0], &z1, &z2);
  for (double& v : *x) {
    const double in = v;
    const double out = q.b0 * in + z1;
    z1 = q.b1 * in - q.a1 * out + z2;
    z2 = q.b2 * in - q.a2 * out;
    v = out;
  }
}

}  // namespace

Waveform ButterworthLowpass(const Waveform& w, double cutoff_hz, int order) {
  if (order < 2 || order % 2 != 0)
    throw ConfigError("ButterworthLowpass: order must be even and >= 2");
  if (!(cutoff_hz > 0.0 && cutoff_hz < w.sample_rate_hz / 2.0))
    throw ConfigError("ButterworthLowpass: cutoff must be below Nyquist");
  if (w.samples.empty()) return w;

  const auto sections = DesignButterworthLowpass(cutoff_hz, order,
                                                 w.sample_rate_hz);

  // Odd-reflection padding keeps the forward-backward transients out of the
  // signal proper.
  const size_t pad = std::min(w.samples.size() - 1,
                              static_cast<size_t>(36 * order));
  std::vector<double> x;
  x.reserve(w.samples.size() + 2 * pad);
  for (size_t i = 0; i < pad; ++i)
    x.push_back(2.0 * w.samples.front() - w.samples[pad - i]);
  x.insert(x.end(), w.samples.begin(), w.samples.end());
  for (size_t i = 0; i < pad; ++i)
    x.push_back(2.0 * w.samples.back() -
                w.samples[w.samples.size() - 2 - i]);

  for (const Biquad& q : sections) FilterInPlace(q, &x);
  std::reverse(x.begin(), x.end());
  for (const Biquad& q : sections) FilterInPlace(q, &x);
  std::reverse(x.begin(), x.end());

  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.assign(x.begin() + pad, x.begin() + pad + w.samples.size());
  return out;
}

}  // namespace sceneguard
