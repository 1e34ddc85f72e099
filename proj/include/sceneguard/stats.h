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

#ifndef SCENEGUARD_STATS_H_
#define SCENEGUARD_STATS_H_

#include <vector>

#include "sceneguard/rng.h"

namespace sceneguard {

struct BootstrapCi {
  double point = 0.0;  // sample mean
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  int iterations = 10000;
};

// Percentile bootstrap over resampled means. Deterministic under a seed.
BootstrapCi ComputeBootstrapCi(const std::vector<double>& data, double level,
                               int iterations, Rng* rng);

enum class PermutationMode { kAuto, kExhaustive, kMonteCarlo };

struct TestResult {
  double statistic = 0.0;  // observed difference of means (or mean delta)
  double p_value = 1.0;
  int iterations = 0;   // permutations actually evaluated
  double cohens_d = 0.0;
  bool exhaustive = false;
};

// Two-sided permutation test on |mean(a) - mean(b)|. In Monte Carlo mode
// the p-value uses the add-one estimator (never exactly zero); kAuto
// switches to exhaustive enumeration when the number of distinct splits is
// at most 20,000, where the p-value is exact.
TestResult PermutationTest(const std::vector<double>& group_a,
                           const std::vector<double>& group_b, int iterations,
                           Rng* rng, PermutationMode mode = PermutationMode::kAuto);

// (mean_a - mean_b) / pooled sample standard deviation. Throws on zero
// pooled variance.
double CohensD(const std::vector<double>& group_a,
               const std::vector<double>& group_b);

// Two-sided sign-flip permutation test on mean(deltas). cohens_d is the
// paired effect size mean(deltas)/sd(deltas), NaN when sd is zero.
TestResult PairedPermutationTest(const std::vector<double>& deltas,
                                 int iterations, Rng* rng,
                                 PermutationMode mode = PermutationMode::kAuto);

// Two-sided two-sample z-test p-value using pooled variance; a labeled
// companion to the permutation p for effects smaller than 1/iterations.
// Returns NaN when the pooled variance is zero.
double NormalApproxPValue(const std::vector<double>& group_a,
                          const std::vector<double>& group_b);

}  // namespace sceneguard

#endif  // SCENEGUARD_STATS_H_
