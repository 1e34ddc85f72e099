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
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sceneguard/error.h"
#include "sceneguard/stats.h"

using namespace sceneguard;

TEST_CASE("Bootstrap CI on constant data collapses to the constant") {
  Rng rng(1);
  const BootstrapCi ci = ComputeBootstrapCi({3.0, 3.0, 3.0, 3.0}, 0.95,
                                            2000, &rng);
  CHECK(ci.point == 3.0);
  CHECK(ci.lo == 3.0);
  CHECK(ci.hi == 3.0);
}

TEST_CASE("Bootstrap CI is deterministic under a seed and brackets the mean") {
  std::vector<double> data;
  Rng gen(7);
  for (int i = 0; i < 50; ++i) data.push_back(gen.Normal(2.0, 1.0));
  Rng rng_a(99), rng_b(99);
  const BootstrapCi a = ComputeBootstrapCi(data, 0.95, 5000, &rng_a);
  const BootstrapCi b = ComputeBootstrapCi(data, 0.95, 5000, &rng_b);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  CHECK(a.lo <= a.point);
  CHECK(a.point <= a.hi);
  CHECK_THROWS_AS(ComputeBootstrapCi({1.0}, 0.95, 100, &rng_a),
                  ContractError);
}

TEST_CASE("Bootstrap CI width shrinks roughly as 1/sqrt(n)") {
  Rng gen(11);
  std::vector<double> big;
  for (int i = 0; i < 400; ++i) big.push_back(gen.Normal(0.0, 1.0));
  const std::vector<double> small(big.begin(), big.begin() + 100);
  Rng rng_a(5), rng_b(5);
  const BootstrapCi wide = ComputeBootstrapCi(small, 0.95, 4000, &rng_a);
  const BootstrapCi narrow = ComputeBootstrapCi(big, 0.95, 4000, &rng_b);
  CHECK((narrow.hi - narrow.lo) < 0.6 * (wide.hi - wide.lo));
}

TEST_CASE("Permutation test on identical groups is insignificant") {
  const std::vector<double> g = {1.0, 2.0, 3.0, 4.0};
  Rng rng(3);
  const TestResult r = PermutationTest(g, g, 10000, &rng);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value > 0.9);
}

TEST_CASE("Exhaustive permutation matches the closed-form extreme case") {
  const std::vector<double> a = {0.0, 0.0, 0.0, 0.0, 0.0};
  const std::vector<double> b = {10.0, 10.0, 10.0, 10.0, 10.0};
  Rng rng(4);
  const TestResult r = PermutationTest(a, b, 10000, &rng);
  CHECK(r.exhaustive);
  CHECK(r.iterations == 252);
  CHECK(r.p_value == doctest::Approx(2.0 / 252.0).epsilon(1e-12));
}

TEST_CASE("Monte Carlo and exhaustive modes agree within sampling error") {
  // n_a = n_b = 6 over distinguishable values.
  std::vector<double> a, b;
  Rng gen(21);
  for (int i = 0; i < 6; ++i) {
    a.push_back(gen.Normal(0.0, 1.0));
    b.push_back(gen.Normal(0.8, 1.0));
  }
  Rng rng_ex(1), rng_mc(2);
  const TestResult ex =
      PermutationTest(a, b, 10000, &rng_ex, PermutationMode::kExhaustive);
  const TestResult mc =
      PermutationTest(a, b, 10000, &rng_mc, PermutationMode::kMonteCarlo);
  CHECK(ex.exhaustive);
  CHECK_FALSE(mc.exhaustive);
  const double bound =
      2.0 * std::sqrt(ex.p_value * (1.0 - ex.p_value) / 10000.0);
  CHECK(std::abs(mc.p_value - ex.p_value) <= bound + 2e-4);
}

TEST_CASE("Permutation p-values are never zero and are seed-deterministic") {
  std::vector<double> a, b;
  Rng gen(31);
  for (int i = 0; i < 30; ++i) {
    a.push_back(gen.Normal(0.0, 1.0));
    b.push_back(gen.Normal(3.0, 1.0));
  }
  Rng rng_a(8), rng_b(8);
  const TestResult ra = PermutationTest(a, b, 10000, &rng_a);
  const TestResult rb = PermutationTest(a, b, 10000, &rng_b);
  CHECK(ra.p_value == rb.p_value);
  CHECK(ra.p_value >= 1.0 / 10001.0);
  CHECK_FALSE(ra.exhaustive);  // C(60, 30) is astronomically large
}

TEST_CASE("Cohen's d identities") {
  const std::vector<double> same = {1.0, 2.0, 3.0};
  CHECK(CohensD(same, same) == 0.0);

  // Groups constructed with mean separation 1 and unit sample sd.
  const double d = 1.0 / std::sqrt(2.0);
  const std::vector<double> a = {1.0 - d, 1.0 + d};
  const std::vector<double> b = {-d, d};
  CHECK(CohensD(a, b) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(CohensD(b, a) == doctest::Approx(-1.0).epsilon(1e-9));

  CHECK_THROWS_AS(CohensD({1.0, 1.0}, {1.0, 1.0}), ContractError);
  CHECK_THROWS_AS(CohensD({1.0}, {1.0, 2.0}), ContractError);
}

TEST_CASE("Paired permutation test degenerate and exact cases") {
  Rng rng(5);
  const TestResult zeros =
      PairedPermutationTest({0.0, 0.0, 0.0, 0.0}, 10000, &rng);
  CHECK(zeros.p_value == 1.0);

  const TestResult ones = PairedPermutationTest(
      {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0}, 10000, &rng);
  CHECK(ones.exhaustive);
  CHECK(ones.iterations == 256);
  CHECK(ones.p_value == doctest::Approx(2.0 / 256.0).epsilon(1e-12));

  Rng rng_a(9), rng_b(9);
  std::vector<double> deltas;
  Rng gen(41);
  for (int i = 0; i < 25; ++i) deltas.push_back(gen.Normal(0.3, 1.0));
  const TestResult pa = PairedPermutationTest(deltas, 8000, &rng_a);
  const TestResult pb = PairedPermutationTest(deltas, 8000, &rng_b);
  CHECK(pa.p_value == pb.p_value);
  CHECK_FALSE(pa.exhaustive);  // 2^25 splits
}

TEST_CASE("Normal approximation p-value behaves sanely") {
  std::vector<double> a, b;
  Rng gen(51);
  for (int i = 0; i < 40; ++i) {
    a.push_back(gen.Normal(0.0, 1.0));
    b.push_back(gen.Normal(0.0, 1.0));
  }
  const double p_null = NormalApproxPValue(a, b);
  CHECK(p_null > 0.001);
  for (auto& x : b) x += 10.0;
  const double p_sep = NormalApproxPValue(a, b);
  CHECK(p_sep < 1e-10);
}
