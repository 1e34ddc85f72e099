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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/stat.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sceneguard/encoder.h"
#include "sceneguard/error.h"
#include "sceneguard/mixer.h"
#include "sceneguard/rng.h"
#include "testing/synth.h"

using namespace sceneguard;
namespace fs = std::filesystem;

namespace {

// Loss of the chain at given logits with the peak scale pinned; the
// finite-difference oracle for the analytic gradient. The chain's gradient
// is defined for a fixed normalizer scale, so the oracle evaluates the same
// fixed-scale function.
double LossAt(const Waveform& speech, const Waveform& noise,
              const std::vector<double>& mask_logits, double gamma_logit,
              const SnrBounds& bounds, const Embedding& target, double scale) {
  return SimLossAndGradient(speech, noise, mask_logits, gamma_logit, bounds,
                            target, scale)
      .loss;
}

struct GradCase {
  Waveform speech;
  Waveform noise;
  std::vector<double> mask_logits;
  double gamma_logit = 0.0;
  SnrBounds bounds;
  Embedding target;
};

GradCase MakeGradCase(uint64_t seed, double duration_sec) {
  GradCase c;
  c.speech = testing::MakeSpeechLike(seed, duration_sec);
  c.noise = testing::MakeSceneNoise(seed + 1000, duration_sec);
  c.bounds = ComputeGammaBounds(MeanSquare(c.speech.samples),
                                MeanSquare(c.noise.samples), 10.0, 20.0);
  Rng rng(Rng::DeriveSeed(seed, "gradcase"));
  c.mask_logits.resize(c.speech.samples.size());
  for (auto& m : c.mask_logits) m = rng.Normal(0.0, 0.5);
  c.gamma_logit = rng.Normal(0.0, 0.5);
  c.target = EmbedBuiltin(c.speech);
  return c;
}

std::string ScriptPath(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "sceneguard_test_encoder";
  fs::create_directories(dir);
  const fs::path path = dir / name;
  {
    std::ofstream out(path);
    out << "#!/bin/sh\n" << body;
  }
  ::chmod(path.c_str(), 0755);
  return path.string();
}

}  // namespace

TEST_CASE("CosineSimilarity identities") {
  Embedding a{{1.0, 0.0, 0.0}};
  Embedding b{{0.0, 1.0, 0.0}};
  Embedding neg{{-1.0, 0.0, 0.0}};
  CHECK(CosineSimilarity(a, a) == doctest::Approx(1.0));
  CHECK(CosineSimilarity(a, b) == doctest::Approx(0.0));
  CHECK(CosineSimilarity(a, neg) == doctest::Approx(-1.0));
  CHECK(CosineSimilarity(a, b) == CosineSimilarity(b, a));
}

TEST_CASE("EmbedBuiltin is deterministic, unit norm, and finite") {
  const Waveform w = testing::MakeSpeechLike(77, 1.0);
  const Embedding a = EmbedBuiltin(w);
  const Embedding b = EmbedBuiltin(w);
  CHECK(a.values == b.values);
  CHECK(a.values.size() == 80);
  double norm2 = 0.0;
  for (const double v : a.values) {
    CHECK(std::isfinite(v));
    norm2 += v * v;
  }
  CHECK(std::sqrt(norm2) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("EmbedBuiltin rejects short or wrong-rate audio") {
  Waveform w = testing::MakeSpeechLike(78, 0.2);
  CHECK_THROWS_AS(EmbedBuiltin(w), ContractError);
  Waveform wrong_rate = testing::MakeSpeechLike(79, 1.0);
  wrong_rate.sample_rate_hz = 8000;
  CHECK_THROWS_AS(EmbedBuiltin(wrong_rate), ContractError);
}

TEST_CASE("EmbedBuiltin is nearly scale-invariant") {
  const Waveform w = testing::MakeSpeechLike(80, 1.0);
  Waveform half = w;
  for (auto& s : half.samples) s *= 0.5;
  CHECK(CosineSimilarity(EmbedBuiltin(w), EmbedBuiltin(half)) >= 0.99);
}

TEST_CASE("EmbedBuiltin tolerates trailing silence") {
  const Waveform w = testing::MakeSpeechLike(81, 1.0);
  Waveform padded = w;
  padded.samples.resize(w.samples.size() * 11 / 10, 0.0);
  CHECK(CosineSimilarity(EmbedBuiltin(w), EmbedBuiltin(padded)) >= 0.95);
}

TEST_CASE("Scene noise at 10 dB moves the builtin embedding") {
  for (uint64_t seed : {101, 102, 103}) {
    const Waveform speech = testing::MakeSpeechLike(seed, 1.0);
    const Waveform noise = testing::MakeSceneNoise(seed + 50, 1.0);
    const SnrBounds b = ComputeGammaBounds(MeanSquare(speech.samples),
                                           MeanSquare(noise.samples), 10.0,
                                           20.0);
    const std::vector<double> open(speech.samples.size(), 1.0);
    const Waveform mixed = Mix(speech, noise, open, b.gamma_max);
    const double sim =
        CosineSimilarity(EmbedBuiltin(speech), EmbedBuiltin(mixed));
    CHECK(sim < 1.0 - 1e-4);
  }
}

TEST_CASE("Analytic gradient matches central finite differences") {
  Rng pick(2024);
  for (uint64_t seed : {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}) {
    for (const double duration : {0.5, 1.0}) {
      GradCase c = MakeGradCase(seed, duration);
      const SimLossResult res =
          SimLossAndGradient(c.speech, c.noise, c.mask_logits, c.gamma_logit,
                             c.bounds, c.target);
      const double scale = res.peak_scale;
      const double h = 1e-4;

      // Gamma logit.
      {
        const double f_plus = LossAt(c.speech, c.noise, c.mask_logits,
                                     c.gamma_logit + h, c.bounds, c.target,
                                     scale);
        const double f_minus = LossAt(c.speech, c.noise, c.mask_logits,
                                      c.gamma_logit - h, c.bounds, c.target,
                                      scale);
        const double fd = (f_plus - f_minus) / (2.0 * h);
        if (std::abs(res.d_gamma_logit) > 1e-6 || std::abs(fd) > 1e-6) {
          const double rel = std::abs(res.d_gamma_logit - fd) /
                             std::max(std::abs(res.d_gamma_logit),
                                      std::abs(fd));
          CHECK(rel < 1e-3);
        }
      }

      // A handful of random mask coordinates.
      for (int probe = 0; probe < 5; ++probe) {
        const size_t t = pick.UniformIndex(c.mask_logits.size());
        std::vector<double> logits = c.mask_logits;
        logits[t] = c.mask_logits[t] + h;
        const double f_plus = LossAt(c.speech, c.noise, logits,
                                     c.gamma_logit, c.bounds, c.target,
                                     scale);
        logits[t] = c.mask_logits[t] - h;
        const double f_minus = LossAt(c.speech, c.noise, logits,
                                      c.gamma_logit, c.bounds, c.target,
                                      scale);
        const double fd = (f_plus - f_minus) / (2.0 * h);
        const double analytic = res.d_mask_logits[t];
        if (std::abs(analytic) > 1e-6 || std::abs(fd) > 1e-6) {
          const double rel = std::abs(analytic - fd) /
                             std::max(std::abs(analytic), std::abs(fd));
          CHECK(rel < 1e-3);
        }
      }
    }
  }
}

TEST_CASE("Near-closed mask reduces the loss to the clean cosine") {
  const Waveform speech = testing::MakeSpeechLike(200, 0.7);
  const Waveform noise = testing::MakeSceneNoise(201, 0.7);
  const SnrBounds bounds = ComputeGammaBounds(MeanSquare(speech.samples),
                                              MeanSquare(noise.samples), 10.0,
                                              20.0);
  const Embedding target = EmbedBuiltin(speech);
  const std::vector<double> closed(speech.samples.size(), -40.0);
  const SimLossResult res =
      SimLossAndGradient(speech, noise, closed, 0.0, bounds, target);
  // x' == x up to the normalizer, and the embedding is scale-robust; the
  // 5e-3 margin is the encoder's calibrated scale sensitivity.
  CHECK(res.loss == doctest::Approx(1.0).epsilon(5e-3));
  CHECK(res.loss <= 1.0);
}

TEST_CASE("External encoder protocol round trip") {
  const std::string cmd =
      ScriptPath("encoder_ok.sh", "echo 3 0 4 0\n");
  EncoderBackend backend;
  backend.kind = EncoderKind::kExternalCommand;
  backend.command = cmd;
  const Waveform w = testing::MakeSpeechLike(300, 0.6);
  const Embedding e = Embed(backend, w);
  REQUIRE(e.values.size() == 4);
  CHECK(e.values[0] == doctest::Approx(0.6));
  CHECK(e.values[2] == doctest::Approx(0.8));

  // Dimension is pinned by the first call.
  const std::string changing = ScriptPath(
      "encoder_dim.sh",
      "f=/tmp/sceneguard_dim_state\nif [ -f $f ]; then echo 1 2 3; else "
      "touch $f; echo 1 2; fi\n");
  ::unlink("/tmp/sceneguard_dim_state");
  EncoderBackend dim_backend;
  dim_backend.kind = EncoderKind::kExternalCommand;
  dim_backend.command = changing;
  CHECK(Embed(dim_backend, w).values.size() == 2);
  CHECK_THROWS_AS(Embed(dim_backend, w), BackendError);
  ::unlink("/tmp/sceneguard_dim_state");
}

TEST_CASE("External encoder failures become BackendError") {
  EncoderBackend failing;
  failing.kind = EncoderKind::kExternalCommand;
  failing.command = ScriptPath("encoder_fail.sh", "exit 3\n");
  const Waveform w = testing::MakeSpeechLike(301, 0.6);
  CHECK_THROWS_AS(Embed(failing, w), BackendError);

  EncoderBackend garbled;
  garbled.kind = EncoderKind::kExternalCommand;
  garbled.command = ScriptPath("encoder_garbled.sh", "echo not numbers\n");
  CHECK_THROWS_AS(Embed(garbled, w), BackendError);
}
