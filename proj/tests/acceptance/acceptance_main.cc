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

// Acceptance suite. Runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion; exits with the number of
// failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sceneguard/countermeasures.h"
#include "sceneguard/encoder.h"
#include "sceneguard/error.h"
#include "sceneguard/harness.h"
#include "sceneguard/log.h"
#include "sceneguard/metrics.h"
#include "sceneguard/mixer.h"
#include "sceneguard/optimizer.h"
#include "sceneguard/rng.h"
#include "sceneguard/stats.h"
#include "testing/synth.h"

using namespace sceneguard;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

double MeanOf(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

Waveform MakeSine(double freq_hz, double duration_sec, int rate,
                  double amplitude = 0.5) {
  Waveform w;
  w.sample_rate_hz = rate;
  const size_t n = static_cast<size_t>(duration_sec * rate);
  w.samples.resize(n);
  for (size_t t = 0; t < n; ++t)
    w.samples[t] = amplitude * std::sin(2.0 * kPi * freq_hz * t / rate);
  return w;
}

NoiseClip MakeClip(uint64_t seed, double duration_sec) {
  NoiseClip clip;
  clip.scene = "synthetic";
  clip.source_id = "synthetic-" + std::to_string(seed);
  clip.audio = testing::MakeSceneNoise(seed, duration_sec);
  return clip;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness
// ---------------------------------------------------------------------------

Outcome CriterionGradient() {
  const OptimConfig config;
  Rng pick(90210);
  double worst_rel = 0.0;
  int checked = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    for (const double duration : {0.5, 1.0, 3.0}) {
      const Waveform speech = testing::MakeSpeechLike(seed, duration);
      const Waveform noise = testing::MakeSceneNoise(seed + 5000, duration);
      const SnrBounds bounds = ComputeGammaBounds(
          MeanSquare(speech.samples), MeanSquare(noise.samples),
          config.snr_min_db, config.snr_max_db);
      const Embedding target = EmbedBuiltin(speech);

      Rng rng(Rng::DeriveSeed(seed, "grad-acceptance"));
      ProtectionParams params;
      params.mask_logits.resize(speech.samples.size());
      for (auto& m : params.mask_logits) m = rng.Normal(0.0, 0.5);
      params.gamma_logit = rng.Normal(0.0, 0.5);

      GradientVec grad;
      const LossBreakdown base = TotalLossAndGradient(
          speech, noise, params, bounds, config, target, &grad);
      (void)base;
      // The chain defines its gradient with the peak-normalization scale
      // held constant; evaluate the finite differences of that same
      // fixed-scale function.
      const double scale =
          SimLossAndGradient(speech, noise, params.mask_logits,
                             params.gamma_logit, bounds, target)
              .peak_scale;
      const double h = 1e-4;

      auto loss_at = [&](const std::vector<double>& logits,
                         double gamma_logit) {
        ProtectionParams p;
        p.mask_logits = logits;
        p.gamma_logit = gamma_logit;
        GradientVec unused;
        return TotalLossAndGradient(speech, noise, p, bounds, config, target,
                                    &unused, scale)
            .total;
      };

      auto check_coord = [&](double analytic, double fd) {
        if (std::abs(analytic) <= 1e-6 && std::abs(fd) <= 1e-6) return;
        const double rel = std::abs(analytic - fd) /
                           std::max(std::abs(analytic), std::abs(fd));
        worst_rel = std::max(worst_rel, rel);
        ++checked;
      };

      {
        const double fp = loss_at(params.mask_logits, params.gamma_logit + h);
        const double fm = loss_at(params.mask_logits, params.gamma_logit - h);
        check_coord(grad.gamma, (fp - fm) / (2.0 * h));
      }
      for (int probe = 0; probe < 6; ++probe) {
        const size_t t = pick.UniformIndex(params.mask_logits.size());
        std::vector<double> logits = params.mask_logits;
        logits[t] += h;
        const double fp = loss_at(logits, params.gamma_logit);
        logits[t] = params.mask_logits[t] - h;
        const double fm = loss_at(logits, params.gamma_logit);
        check_coord(grad.mask[t], (fp - fm) / (2.0 * h));
      }
    }
  }
  return {worst_rel < 1e-3,
          Fmt("max relative error %.3e over %d coordinates "
              "(10 seeds x 3 lengths, h=1e-4, threshold 1e-3)",
              worst_rel, checked)};
}

// ---------------------------------------------------------------------------
// 2. SNR constraint after optimization
// ---------------------------------------------------------------------------

Outcome CriterionSnrConstraint() {
  const OptimConfig config;  // 50 epochs, [10, 20] dB
  double worst_low = 1e9, worst_high = -1e9;
  for (int i = 0; i < 20; ++i) {
    const Waveform speech = testing::MakeSpeechLike(100 + i, 1.0);
    const NoiseClip clip = MakeClip(200 + i, 1.0);  // equal length
    Rng rng(Rng::DeriveSeed(1337, "snr-acceptance-" + std::to_string(i)));
    const ProtectionResult result = Protect(speech, clip, config, &rng);

    const SnrBounds bounds = ComputeGammaBounds(
        MeanSquare(speech.samples), MeanSquare(clip.audio.samples),
        config.snr_min_db, config.snr_max_db);
    if (!(result.final_gamma >= bounds.gamma_min &&
          result.final_gamma <= bounds.gamma_max))
      return {false, Fmt("case %d: gamma %.6g outside [%.6g, %.6g]", i,
                         result.final_gamma, bounds.gamma_min,
                         bounds.gamma_max)};

    const std::vector<double> open(speech.samples.size(), 1.0);
    const double snr =
        EffectiveSnrDb(speech, clip.audio, open, result.final_gamma);
    worst_low = std::min(worst_low, snr);
    worst_high = std::max(worst_high, snr);
    if (!(snr >= config.snr_min_db - 1e-6 && snr <= config.snr_max_db + 1e-6))
      return {false,
              Fmt("case %d: open-mask SNR %.9f dB outside [10, 20]", i, snr)};
  }
  return {true, Fmt("20 cases: open-mask SNR in [%.4f, %.4f] dB, "
                    "gamma always inside its bounds",
                    worst_low, worst_high)};
}

// ---------------------------------------------------------------------------
// 3. Optimization beats direct mixing
// ---------------------------------------------------------------------------

Outcome CriterionOptimizationBeatsDirect() {
  const OptimConfig config;
  std::vector<double> sims_opt, sims_dir, deltas;
  for (int i = 0; i < 20; ++i) {
    const Waveform speech = testing::MakeSpeechLike(300 + i, 1.0);
    const NoiseClip clip = MakeClip(400 + i, 1.0);
    const Embedding clean_emb = EmbedBuiltin(speech);

    Rng rng_opt(Rng::DeriveSeed(1337, "opt-arm-" + std::to_string(i)));
    Rng rng_dir(Rng::DeriveSeed(1337, "dir-arm-" + std::to_string(i)));
    const ProtectionResult opt = Protect(speech, clip, config, &rng_opt);
    const ProtectionResult dir =
        ProtectDirect(speech, clip, config, &rng_dir);

    const double sim_opt =
        CosineSimilarity(clean_emb, EmbedBuiltin(opt.protected_audio));
    const double sim_dir =
        CosineSimilarity(clean_emb, EmbedBuiltin(dir.protected_audio));
    sims_opt.push_back(sim_opt);
    sims_dir.push_back(sim_dir);
    deltas.push_back(sim_opt - sim_dir);
  }
  const double mean_opt = MeanOf(sims_opt);
  const double mean_dir = MeanOf(sims_dir);
  Rng rng(Rng::DeriveSeed(1337, "opt-vs-direct-test"));
  const TestResult t = PairedPermutationTest(deltas, 10000, &rng);
  const bool pass = mean_opt < mean_dir && t.p_value < 0.05;
  return {pass, Fmt("mean SIM optimized %.4f vs direct %.4f, paired "
                    "sign-flip p = %.4g (20 pairs)",
                    mean_opt, mean_dir, t.p_value)};
}

// ---------------------------------------------------------------------------
// 4 & 5. SNR ablation ordering and the usability floor
// ---------------------------------------------------------------------------

struct SweepRow {
  double snr_min, snr_max;
  double sim_mean, stoi_mean;
};

std::vector<SweepRow> RunSnrSweep() {
  const std::vector<std::pair<double, double>> ranges = {
      {5.0, 10.0}, {10.0, 20.0}, {15.0, 25.0}, {20.0, 30.0}};
  std::vector<SweepRow> rows;
  for (const auto& [lo, hi] : ranges) {
    OptimConfig config;
    config.snr_min_db = lo;
    config.snr_max_db = hi;
    std::vector<double> sims, stois;
    for (int i = 0; i < 10; ++i) {
      const Waveform speech = testing::MakeSpeechLike(500 + i, 2.0);
      const NoiseClip clip = MakeClip(600 + i, 2.0);
      Rng rng(Rng::DeriveSeed(1337, Fmt("sweep-%g-%g-%d", lo, hi, i)));
      const ProtectionResult result = Protect(speech, clip, config, &rng);
      sims.push_back(CosineSimilarity(
          EmbedBuiltin(speech), EmbedBuiltin(result.protected_audio)));
      stois.push_back(ComputeStoi(speech, result.protected_audio));
    }
    rows.push_back({lo, hi, MeanOf(sims), MeanOf(stois)});
  }
  return rows;
}

Outcome CriterionSnrAblationOrdering(const std::vector<SweepRow>& rows) {
  bool ordered = true;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].sim_mean > rows[i - 1].sim_mean)) ordered = false;
    if (!(rows[i].stoi_mean > rows[i - 1].stoi_mean)) ordered = false;
  }
  std::string detail = "mean SIM / STOI by range:";
  for (const auto& row : rows)
    detail += Fmt(" [%g,%g]=%.4f/%.4f", row.snr_min, row.snr_max,
                  row.sim_mean, row.stoi_mean);
  return {ordered, detail};
}

Outcome CriterionUsabilityFloor(const std::vector<SweepRow>& rows) {
  for (const auto& row : rows) {
    if (row.snr_min == 10.0 && row.snr_max == 20.0) {
      return {row.stoi_mean >= 0.85,
              Fmt("mean STOI %.4f at the default [10, 20] dB range "
                  "(floor 0.85, 10 utterances)",
                  row.stoi_mean)};
    }
  }
  return {false, "default range missing from the sweep"};
}

// ---------------------------------------------------------------------------
// 6. Regularization sensitivity
// ---------------------------------------------------------------------------

Outcome CriterionRegularizationSensitivity() {
  // The three lambda arms are paired: identical speech, noise, and
  // initialization per utterance, so the mask statistics differ only
  // through the regularization weight.
  std::vector<double> smoothness_means;
  std::string detail = "mean mask smoothness:";
  for (const double lambda : {0.001, 0.01, 0.1}) {
    OptimConfig config;
    config.lambda_reg = lambda;
    std::vector<double> values;
    for (int i = 0; i < 10; ++i) {
      const Waveform speech = testing::MakeSpeechLike(500 + i, 1.0);
      const NoiseClip clip = MakeClip(600 + i, 1.0);
      Rng rng(Rng::DeriveSeed(1337, Fmt("reg-case-%d", i)));
      const ProtectionResult result = Protect(speech, clip, config, &rng);
      values.push_back(MaskSmoothnessMean(result.final_mask));
    }
    smoothness_means.push_back(MeanOf(values));
    detail += Fmt(" lambda=%g: %.3e", lambda, smoothness_means.back());
  }
  const bool monotone = smoothness_means[1] <= smoothness_means[0] &&
                        smoothness_means[2] <= smoothness_means[1];
  return {monotone, detail};
}

// ---------------------------------------------------------------------------
// 7. DSP correctness
// ---------------------------------------------------------------------------

double InteriorEnergy(const std::vector<double>& s, size_t trim) {
  double acc = 0.0;
  for (size_t t = trim; t + trim < s.size(); ++t) acc += s[t] * s[t];
  return acc;
}

Outcome CriterionDsp() {
  std::string detail;

  // Butterworth 3400 Hz order 4 forward-backward.
  const Waveform pass_in = MakeSine(400.0, 1.0, 16000);
  const Waveform pass_out = ButterworthLowpass(pass_in, 3400.0, 4);
  const double pass_db = 10.0 * std::log10(
      InteriorEnergy(pass_out.samples, 500) /
      InteriorEnergy(pass_in.samples, 500));
  if (std::abs(pass_db) > 0.2)
    return {false, Fmt("400 Hz passband deviation %.3f dB > 0.2", pass_db)};

  const Waveform stop_in = MakeSine(7000.0, 1.0, 16000);
  const Waveform stop_out = ButterworthLowpass(stop_in, 3400.0, 4);
  const double stop_db = 10.0 * std::log10(
      InteriorEnergy(stop_in.samples, 500) /
      InteriorEnergy(stop_out.samples, 500));
  if (stop_db < 40.0)
    return {false, Fmt("7 kHz attenuation %.1f dB < 40", stop_db)};

  // Resample round trip on a sub-3.4 kHz bandlimited signal.
  Waveform band = testing::MakeSpeechLike(8100, 1.0);
  band = ButterworthLowpass(band, 3000.0, 4);
  const Waveform round = Resample(Resample(band, 8000), 16000);
  double sig = 0.0, err = 0.0;
  for (size_t t = 200; t + 200 < band.samples.size(); ++t) {
    sig += band.samples[t] * band.samples[t];
    const double d = band.samples[t] - round.samples[t];
    err += d * d;
  }
  const double snr = 10.0 * std::log10(sig / err);
  if (snr < 35.0)
    return {false, Fmt("resample round-trip SNR %.1f dB < 35", snr)};

  // Spectral subtraction on stationary noise.
  Rng rng(424242);
  Waveform noise;
  noise.sample_rate_hz = kCanonicalSampleRate;
  noise.samples.resize(16000);
  for (auto& s : noise.samples) s = 0.1 * rng.Normal(0.0, 1.0);
  const Waveform sub =
      ApplyCountermeasure(Countermeasure::SpectralSubtraction(), noise);
  const double reduction_db = 10.0 * std::log10(
      InteriorEnergy(noise.samples, 500) / InteriorEnergy(sub.samples, 500));
  if (reduction_db < 6.0)
    return {false,
            Fmt("spectral subtraction reduction %.1f dB < 6", reduction_db)};

  detail = Fmt("400 Hz %+.3f dB, 7 kHz -%.1f dB, round-trip SNR %.1f dB, "
               "subtraction -%.1f dB",
               pass_db, stop_db, snr, reduction_db);
  return {true, detail};
}

// ---------------------------------------------------------------------------
// 8. Metric identities
// ---------------------------------------------------------------------------

Outcome CriterionMetricIdentities() {
  const Waveform w = testing::MakeSpeechLike(8200, 1.5);
  const double stoi_self = ComputeStoi(w, w);
  if (std::abs(stoi_self - 1.0) > 1e-6)
    return {false, Fmt("STOI(x, x) = %.8f", stoi_self)};
  const double mcd_self = ComputeMcd(w, w);
  if (mcd_self != 0.0) return {false, Fmt("MCD(x, x) = %g", mcd_self)};

  const Transcript ref = NormalizeTranscript("u", "a b c");
  const Transcript hyp = NormalizeTranscript("u", "a x c");
  if (ComputeWer(ref, ref) != 0.0)
    return {false, "WER(identical) != 0"};
  if (ComputeWer(ref, hyp) != 1.0 / 3.0)
    return {false, Fmt("WER(1 sub in 3) = %.17g != 1/3", ComputeWer(ref, hyp))};
  return {true, "STOI(x,x)=1, MCD(x,x)=0, WER identities exact"};
}

// ---------------------------------------------------------------------------
// 9. Statistics calibration
// ---------------------------------------------------------------------------

Outcome CriterionStatsCalibration() {
  // Bootstrap coverage over 1000 Normal(0,1) replicates, n = 100.
  int covered = 0;
  const int reps = 1000;
  for (int rep = 0; rep < reps; ++rep) {
    Rng gen(Rng::DeriveSeed(1337, "coverage-data-" + std::to_string(rep)));
    std::vector<double> data(100);
    for (auto& x : data) x = gen.Normal(0.0, 1.0);
    Rng boot(Rng::DeriveSeed(1337, "coverage-boot-" + std::to_string(rep)));
    const BootstrapCi ci = ComputeBootstrapCi(data, 0.95, 10000, &boot);
    if (ci.lo <= 0.0 && 0.0 <= ci.hi) ++covered;
  }
  const double coverage = static_cast<double>(covered) / reps;
  if (coverage < 0.93 || coverage > 0.97)
    return {false, Fmt("bootstrap coverage %.3f outside [0.93, 0.97]",
                       coverage)};

  // Null permutation p-values vs Uniform(0,1): one-sample KS at the 1%
  // level, 500 replicates of 15 vs 15.
  const int ks_reps = 500;
  std::vector<double> pvals(ks_reps);
  for (int rep = 0; rep < ks_reps; ++rep) {
    Rng gen(Rng::DeriveSeed(1337, "ks-data-" + std::to_string(rep)));
    std::vector<double> a(15), b(15);
    for (auto& x : a) x = gen.Normal(0.0, 1.0);
    for (auto& x : b) x = gen.Normal(0.0, 1.0);
    Rng perm(Rng::DeriveSeed(1337, "ks-perm-" + std::to_string(rep)));
    pvals[rep] = PermutationTest(a, b, 10000, &perm).p_value;
  }
  std::sort(pvals.begin(), pvals.end());
  double d_stat = 0.0;
  for (int i = 0; i < ks_reps; ++i) {
    const double f_lo = static_cast<double>(i) / ks_reps;
    const double f_hi = static_cast<double>(i + 1) / ks_reps;
    d_stat = std::max({d_stat, std::abs(pvals[i] - f_lo),
                       std::abs(pvals[i] - f_hi)});
  }
  const double sqrt_n = std::sqrt(static_cast<double>(ks_reps));
  const double d_crit = 1.628 / (sqrt_n + 0.12 + 0.11 / sqrt_n);  // 1% level
  if (d_stat > d_crit)
    return {false, Fmt("KS D = %.4f > %.4f: null p-values not uniform",
                       d_stat, d_crit)};

  // Monte Carlo agrees with exhaustive enumeration on small instances.
  double worst_z = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    Rng gen(Rng::DeriveSeed(1337, "mc-ex-data-" + std::to_string(inst)));
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = gen.Normal(0.0, 1.0);
    for (auto& x : b) x = gen.Normal(1.0, 1.0);
    Rng r_ex(1),
        r_mc(Rng::DeriveSeed(1337, "mc-ex-stream-" + std::to_string(inst)));
    const double p_ex =
        PermutationTest(a, b, 10000, &r_ex, PermutationMode::kExhaustive)
            .p_value;
    const double p_mc =
        PermutationTest(a, b, 10000, &r_mc, PermutationMode::kMonteCarlo)
            .p_value;
    const double sigma = std::sqrt(p_ex * (1.0 - p_ex) / 10000.0);
    worst_z = std::max(worst_z, std::abs(p_mc - p_ex) / sigma);
    if (std::abs(p_mc - p_ex) > 2.0 * sigma)
      return {false,
              Fmt("instance %d: |MC %.4f - exhaustive %.4f| > 2 sigma %.4f",
                  inst, p_mc, p_ex, 2.0 * sigma)};
  }

  // Cohen's d on constructed unit-separation groups.
  const double half = 1.0 / std::sqrt(2.0);
  const double d = CohensD({1.0 - half, 1.0 + half}, {-half, half});
  if (std::abs(d - 1.0) > 1e-9)
    return {false, Fmt("Cohen's d %.12f != 1", d)};

  return {true, Fmt("coverage %.3f, KS D %.4f (crit %.4f), MC/exhaustive "
                    "max |z| %.2f of 2.00, Cohen's d exact",
                    coverage, d_stat, d_crit, worst_z)};
}

// ---------------------------------------------------------------------------
// 10. Determinism of the harness
// ---------------------------------------------------------------------------

// Builds a small on-disk corpus and returns the config path.
std::string BuildCorpus(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root / "clean");
  fs::create_directories(root / "noise");
  std::string speech_manifest = "utterance_id,wav_path,scene\n";
  for (int i = 0; i < 4; ++i) {
    const std::string id = "utt" + std::to_string(i);
    WriteWav(testing::MakeSpeechLike(8800 + i, 1.0),
             (root / "clean" / (id + ".wav")).string());
    speech_manifest += id + ",clean/" + id + ".wav,park\n";
  }
  std::ofstream(root / "speech.csv") << speech_manifest;
  std::string noise_manifest = "path,scene\n";
  for (int i = 0; i < 2; ++i) {
    const std::string name = "noise" + std::to_string(i) + ".wav";
    WriteWav(testing::MakeSceneNoise(8900 + i, 1.3),
             (root / "noise" / name).string());
    noise_manifest += "noise/" + name + ",park\n";
  }
  std::ofstream(root / "noise.csv") << noise_manifest;
  const json config = {{"speech_manifest", "speech.csv"},
                       {"noise_manifest", "noise.csv"},
                       {"seed", 1337},
                       {"optim", {{"epochs", 8}}}};
  const std::string path = (root / "config.json").string();
  std::ofstream(path) << config.dump(2);
  return path;
}

std::string ReadAll(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Execution metadata excluded from the determinism comparison: wall-clock
// fields everywhere, plus the echoed worker count (the lever under test) and
// output directory (differs between the compared runs by construction).
void StripVolatile(json* doc) {
  if (doc->is_object()) {
    doc->erase("wall_clock_sec");
    if (doc->contains("config") && (*doc)["config"].is_object()) {
      (*doc)["config"].erase("jobs");
      (*doc)["config"].erase("output_dir");
    }
    for (auto& [key, value] : doc->items()) StripVolatile(&value);
  } else if (doc->is_array()) {
    for (auto& value : *doc) StripVolatile(&value);
  }
}

std::string NormalizedReport(const fs::path& path) {
  json doc = json::parse(ReadAll(path));
  StripVolatile(&doc);
  return doc.dump();
}

Outcome CriterionDeterminism() {
  const fs::path root =
      fs::temp_directory_path() / "sceneguard_acceptance_determinism";
  const std::string config_path = BuildCorpus(root);

  auto run_protect = [&](const std::string& tag, int jobs) {
    ExperimentConfig cfg = LoadExperimentConfig(config_path);
    cfg.output_dir = (root / tag).string();
    cfg.jobs = jobs;
    if (CmdProtect(cfg) != 0) throw Error("protect failed in " + tag);
    return cfg;
  };
  run_protect("run_a", 1);
  run_protect("run_b", 1);
  const ExperimentConfig cfg_parallel = run_protect("run_p", 4);

  for (int i = 0; i < 4; ++i) {
    const std::string wav = "utt" + std::to_string(i) + ".wav";
    const std::string trace = "utt" + std::to_string(i) + ".trace.json";
    if (ReadAll(root / "run_a" / wav) != ReadAll(root / "run_b" / wav))
      return {false, "WAV bytes differ between identical runs: " + wav};
    if (ReadAll(root / "run_a" / wav) != ReadAll(root / "run_p" / wav))
      return {false, "WAV bytes differ between jobs=1 and jobs=4: " + wav};
    if (ReadAll(root / "run_a" / trace) != ReadAll(root / "run_b" / trace))
      return {false, "trace differs between identical runs: " + trace};
    if (ReadAll(root / "run_a" / trace) != ReadAll(root / "run_p" / trace))
      return {false, "trace differs between jobs=1 and jobs=4: " + trace};
  }
  if (ReadAll(root / "run_a" / "summary.csv") !=
          ReadAll(root / "run_b" / "summary.csv") ||
      ReadAll(root / "run_a" / "summary.csv") !=
          ReadAll(root / "run_p" / "summary.csv"))
    return {false, "summary.csv differs across runs"};
  if (NormalizedReport(root / "run_a" / "protect_report.json") !=
          NormalizedReport(root / "run_b" / "protect_report.json") ||
      NormalizedReport(root / "run_a" / "protect_report.json") !=
          NormalizedReport(root / "run_p" / "protect_report.json"))
    return {false, "protect_report.json differs across runs"};

  // Reports: evaluate, robustness, and one ablation recipe, twice each.
  auto run_reports = [&](const std::string& tag, int jobs) {
    ExperimentConfig cfg = LoadExperimentConfig(config_path);
    cfg.jobs = jobs;
    cfg.output_dir = (root / tag).string();
    if (CmdEvaluate(cfg, (root / "clean").string(),
                    (root / "run_a").string()) != 0)
      throw Error("evaluate failed in " + tag);
    if (CmdRobustness(cfg, (root / "clean").string(),
                      (root / "run_a").string()) != 0)
      throw Error("robustness failed in " + tag);
    if (CmdAblate(cfg, AblateMode::kOptimization) != 0)
      throw Error("ablate failed in " + tag);
  };
  run_reports("reports_a", 1);
  run_reports("reports_b", 4);
  for (const char* name :
       {"evaluate_report.json", "robustness_report.json",
        "ablate_optimization_report.json"}) {
    if (NormalizedReport(root / "reports_a" / name) !=
        NormalizedReport(root / "reports_b" / name))
      return {false, std::string("report differs across runs: ") + name};
  }
  for (const char* name :
       {"evaluate_summary.csv", "robustness_summary.csv",
        "ablate_optimization_summary.csv"}) {
    if (ReadAll(root / "reports_a" / name) !=
        ReadAll(root / "reports_b" / name))
      return {false, std::string("summary differs across runs: ") + name};
  }
  return {true,
          "protect outputs byte-identical across reruns and jobs=1 vs "
          "jobs=4; all reports identical up to wall-clock fields"};
}

}  // namespace

int main() {
  SetWarningHandler([](const std::string&) {});  // keep stderr quiet

  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> fn;
  };

  // Criteria 4 and 5 share one sweep.
  std::vector<SweepRow> sweep_rows;
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness vs central finite differences",
       CriterionGradient},
      {2, "SNR constraint honored after optimization", CriterionSnrConstraint},
      {3, "optimization beats direct mixing (paired test)",
       CriterionOptimizationBeatsDirect},
      {4, "SNR ablation ordering (SIM and STOI increase with SNR)",
       [&]() {
         sweep_rows = RunSnrSweep();
         return CriterionSnrAblationOrdering(sweep_rows);
       }},
      {5, "usability floor: mean STOI >= 0.85 at [10, 20] dB",
       [&]() { return CriterionUsabilityFloor(sweep_rows); }},
      {6, "regularization sensitivity: smoothness non-increasing in lambda",
       CriterionRegularizationSensitivity},
      {7, "DSP correctness against analytic oracles", CriterionDsp},
      {8, "metric identities", CriterionMetricIdentities},
      {9, "statistics calibration", CriterionStatsCalibration},
      {10, "determinism under seed 1337, including jobs > 1",
       CriterionDeterminism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start)
            .count();
    std::printf("[%s] criterion %2d: %s (%.1f s)\n",
                outcome.pass ? "PASS" : "FAIL", criterion.id,
                criterion.name.c_str(), seconds);
    std::printf("           %s\n", outcome.detail.c_str());
    if (!outcome.pass) ++failures;
  }
  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d acceptance criteria FAILED\n", failures);
  }
  return failures;
}
