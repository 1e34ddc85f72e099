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

#ifndef SCENEGUARD_AUDIO_H_
#define SCENEGUARD_AUDIO_H_

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace sceneguard {

// Every pipeline stage operates at this rate; inputs are resampled on
// ingestion.
constexpr int kCanonicalSampleRate = 16000;

// Mono audio. Samples are dimensionless amplitudes, nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 0;

  size_t size() const { return samples.size(); }
  double duration_sec() const {
    return sample_rate_hz > 0
               ? static_cast<double>(samples.size()) / sample_rate_hz
               : 0.0;
  }
};

// Magnitude spectrogram, frames x bins with bins == fft_size / 2 + 1.
struct Spectrogram {
  std::vector<std::vector<double>> magnitudes;
  int frame_hop_samples = 0;
  int fft_size = 0;
  int sample_rate_hz = 0;

  size_t num_frames() const { return magnitudes.size(); }
  size_t num_bins() const {
    return magnitudes.empty() ? 0 : magnitudes.front().size();
  }
};

// Triangular mel filterbank, n_mels x bins, weights >= 0 with every row
// containing at least one nonzero entry.
struct MelFilterbank {
  std::vector<std::vector<double>> weights;
  double f_min_hz = 0.0;
  double f_max_hz = 0.0;

  size_t num_mels() const { return weights.size(); }
  size_t num_bins() const {
    return weights.empty() ? 0 : weights.front().size();
  }
};

// Mean of squared samples.
double MeanSquare(const std::vector<double>& samples);
double Rms(const std::vector<double>& samples);

// Reads a RIFF/WAVE file (PCM 16-bit or IEEE float 32-bit, any channel
// count). Multichannel audio is downmixed to mono by arithmetic mean and
// samples are scaled to [-1, 1]. Throws FormatError on malformed or
// unsupported files, IoError if the file cannot be opened.
Waveform ReadWav(const std::string& path);

// Writes 16-bit PCM mono. Samples outside [-1, 1] are clipped with a
// warning. Round-trip through ReadWav reproduces samples within 1/32768.
void WriteWav(const Waveform& w, const std::string& path);

// Windowed-sinc rational resampling (Kaiser window). Output length is
// round(len * target / source); equal rates return the input unchanged.
Waveform Resample(const Waveform& w, int target_rate_hz);

// Periodic Hann window: 0.5 * (1 - cos(2*pi*t / size)).
std::vector<double> HannWindow(int size);

// In-place iterative radix-2 FFT; size must be a power of two. The inverse
// transform is unnormalized (no 1/N factor).
void Fft(std::vector<std::complex<double>>* data, bool inverse);

// One-sided complex STFT with a periodic Hann window. Frame f covers samples
// [f*hop, f*hop + fft_size); frames = 1 + floor((len - fft_size) / hop).
// Throws ContractError when the signal is shorter than fft_size.
std::vector<std::vector<std::complex<double>>> StftComplex(
    const Waveform& w, int fft_size, int hop);

// Magnitude STFT over StftComplex.
Spectrogram Stft(const Waveform& w, int fft_size, int hop);

// Weighted overlap-add inverse of StftComplex (Hann analysis and synthesis
// windows, squared-window normalization). num_samples trims the result to
// the original signal length.
Waveform IstftOverlapAdd(
    const std::vector<std::vector<std::complex<double>>>& frames, int fft_size,
    int hop, size_t num_samples, int sample_rate_hz);

// HTK mel scale: 2595 * log10(1 + f / 700).
double HzToMel(double hz);
double MelToHz(double mel);

// Triangular filters spaced uniformly on the mel scale between f_min_hz and
// f_max_hz. Throws ConfigError if any filter row would be all-zero at the
// given FFT resolution.
MelFilterbank ComputeMelFilterbank(int n_mels, int fft_size,
                                   int sample_rate_hz, double f_min_hz,
                                   double f_max_hz);

// One-third-octave band selection matrix (n_bands x bins). Band centers are
// lowest_center_hz * 2^(j/3); edges are the geometric means of adjacent
// centers, snapped to the nearest FFT bin.
std::vector<std::vector<double>> ThirdOctaveBands(int sample_rate_hz,
                                                  int fft_size, int n_bands,
                                                  double lowest_center_hz);

// Butterworth lowpass as cascaded second-order sections, applied forward and
// backward (zero phase, so the effective magnitude order doubles). `order`
// is the single-pass order and must be even. Throws ConfigError if the
// cutoff is at or above Nyquist.
Waveform ButterworthLowpass(const Waveform& w, double cutoff_hz, int order);

}  // namespace sceneguard

#endif  // SCENEGUARD_AUDIO_H_
