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

#ifndef SCENEGUARD_RNG_H_
#define SCENEGUARD_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace sceneguard {

// Seeded random source. All distribution draws are implemented by hand on top
// of mt19937_64 so that a given seed produces the same stream on every
// standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t NextU64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double NextDouble() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * NextDouble(); }

  // Uniform in [0, n). Lemire multiply-shift reduction.
  size_t UniformIndex(size_t n) {
    return static_cast<size_t>(
        (static_cast<unsigned __int128>(NextU64()) * n) >> 64);
  }

  // Box-Muller with the second deviate cached.
  double Normal(double mean, double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = 0.0;
    do {
      u1 = NextDouble();
    } while (u1 <= 0.0);
    const double u2 = NextDouble();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  // Derives an independent stream seed from a base seed and a string label.
  // Used so that per-utterance work items get reproducible streams that do
  // not depend on scheduling order.
  static uint64_t DeriveSeed(uint64_t base, std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label.
    for (const char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    uint64_t z = base ^ h;
    // Two splitmix64 rounds to decorrelate nearby (base, label) pairs.
    for (int i = 0; i < 2; ++i) {
      z += 0x9e3779b97f4a7c15ULL;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      z = z ^ (z >> 31);
    }
    return z;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sceneguard

#endif  // SCENEGUARD_RNG_H_
