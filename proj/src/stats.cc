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

#include "sceneguard/stats.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sceneguard/error.h"

namespace sceneguard {

namespace {

constexpr int kExhaustiveLimit = 20000;

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

double SampleVariance(const std::vector<double>& v, double mean) {
  double acc = 0.0;
  for (const double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

// Interpolated quantile (linear between order statistics) of a sorted
// vector.
double SortedQuantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

// Number of distinct splits C(n, k), saturating above the exhaustive limit.
long long BinomialCapped(size_t n, size_t k) {
  long long result = 1;
  k = std::min(k, n - k);
  for (size_t i = 1; i <= k; ++i) {
    result = result * static_cast<long long>(n - k + i) /
             static_cast<long long>(i);
    if (result > 4 * static_cast<long long>(kExhaustiveLimit))
      return result;  // already past any threshold we care about
  }
  return result;
}

// Comparison slack so that exact ties (identical sums accumulated in
// different orders) count as "at least as extreme".
double TieTolerance(double observed) {
  return 1e-12 * std::max(1.0, std::abs(observed));
}

double StandardNormalCdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

}  // namespace

BootstrapCi ComputeBootstrapCi(const std::vector<double>& data, double level,
                               int iterations, Rng* rng) {
  if (data.size() < 2)
    throw ContractError("bootstrap: need at least 2 data points");
  if (!(level > 0.0 && level < 1.0))
    throw ContractError("bootstrap: level must be in (0, 1)");
  if (iterations < 1) throw ContractError("bootstrap: iterations must be >= 1");

  const size_t n = data.size();
  std::vector<double> means(iterations);
  for (int it = 0; it < iterations; ++it) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += data[rng->UniformIndex(n)];
    means[it] = acc / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());

  BootstrapCi ci;
  ci.point = Mean(data);
  ci.level = level;
  ci.iterations = iterations;
  ci.lo = SortedQuantile(means, (1.0 - level) / 2.0);
  ci.hi = SortedQuantile(means, (1.0 + level) / 2.0);
  return ci;
}

double CohensD(const std::vector<double>& group_a,
               const std::vector<double>& group_b) {
  if (group_a.size() < 2 || group_b.size() < 2)
    throw ContractError("cohens d: both groups need at least 2 values");
  const double ma = Mean(group_a);
  const double mb = Mean(group_b);
  const double va = SampleVariance(group_a, ma);
  const double vb = SampleVariance(group_b, mb);
  const double na = static_cast<double>(group_a.size());
  const double nb = static_cast<double>(group_b.size());
  const double pooled =
      ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
  if (pooled <= 0.0)
    throw ContractError("cohens d: zero pooled variance, effect undefined");
  return (ma - mb) / std::sqrt(pooled);
}

TestResult PermutationTest(const std::vector<double>& group_a,
                           const std::vector<double>& group_b, int iterations,
                           Rng* rng, PermutationMode mode) {
  if (group_a.empty() || group_b.empty())
    throw ContractError("permutation test: both groups must be non-empty");

  const size_t na = group_a.size();
  const size_t nb = group_b.size();
  std::vector<double> pooled;
  pooled.reserve(na + nb);
  pooled.insert(pooled.end(), group_a.begin(), group_a.end());
  pooled.insert(pooled.end(), group_b.begin(), group_b.end());
  const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);

  const double mean_a = Mean(group_a);
  const double mean_b = Mean(group_b);
  const double observed = mean_a - mean_b;
  const double obs_abs = std::abs(observed);
  const double tol = TieTolerance(obs_abs);

  TestResult result;
  result.statistic = observed;
  try {
    result.cohens_d = CohensD(group_a, group_b);
  } catch (const ContractError&) {
    result.cohens_d = std::numeric_limits<double>::quiet_NaN();
  }

  auto diff_from_sum_a = [&](double sum_a) {
    const double ma = sum_a / static_cast<double>(na);
    const double mb = (total - sum_a) / static_cast<double>(nb);
    return ma - mb;
  };

  const bool exhaustive =
      mode == PermutationMode::kExhaustive ||
      (mode == PermutationMode::kAuto &&
       BinomialCapped(na + nb, na) <= kExhaustiveLimit);

  if (exhaustive) {
    // Walk every C(na+nb, na) assignment of pooled values to group a.
    std::vector<size_t> idx(na);
    std::iota(idx.begin(), idx.end(), 0);
    long long count = 0, total_splits = 0;
    while (true) {
      double sum_a = 0.0;
      for (const size_t i : idx) sum_a += pooled[i];
      if (std::abs(diff_from_sum_a(sum_a)) >= obs_abs - tol) ++count;
      ++total_splits;
      // Next combination in lexicographic order.
      size_t i = na;
      while (i > 0 && idx[i - 1] == na + nb - (na - i) - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (size_t j = i; j < na; ++j) idx[j] = idx[j - 1] + 1;
    }
    result.exhaustive = true;
    result.iterations = static_cast<int>(total_splits);
    result.p_value =
        static_cast<double>(count) / static_cast<double>(total_splits);
    return result;
  }

  long long count = 0;
  std::vector<double> shuffled = pooled;
  for (int it = 0; it < iterations; ++it) {
    // Partial Fisher-Yates: only the first na positions are needed.
    for (size_t i = 0; i < na; ++i) {
      const size_t j = i + rng->UniformIndex(shuffled.size() - i);
      std::swap(shuffled[i], shuffled[j]);
    }
    double sum_a = 0.0;
    for (size_t i = 0; i < na; ++i) sum_a += shuffled[i];
    if (std::abs(diff_from_sum_a(sum_a)) >= obs_abs - tol) ++count;
  }
  result.exhaustive = false;
  result.iterations = iterations;
  result.p_value = static_cast<double>(1 + count) /
                   static_cast<double>(1 + iterations);
  return result;
}

TestResult PairedPermutationTest(const std::vector<double>& deltas,
                                 int iterations, Rng* rng,
                                 PermutationMode mode) {
  if (deltas.empty())
    throw ContractError("paired permutation test: empty deltas");

  const size_t n = deltas.size();
  const double observed = Mean(deltas);
  const double obs_abs = std::abs(observed);
  const double tol = TieTolerance(obs_abs);

  TestResult result;
  result.statistic = observed;
  if (n >= 2) {
    const double sd = std::sqrt(SampleVariance(deltas, observed));
    result.cohens_d = sd > 0.0 ? observed / sd
                               : std::numeric_limits<double>::quiet_NaN();
  } else {
    result.cohens_d = std::numeric_limits<double>::quiet_NaN();
  }

  const bool exhaustive =
      mode == PermutationMode::kExhaustive ||
      (mode == PermutationMode::kAuto &&
       n < 63 && (1LL << n) <= kExhaustiveLimit);

  if (exhaustive) {
    const long long total = 1LL << n;
    long long count = 0;
    for (long long signs = 0; signs < total; ++signs) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i)
        acc += (signs >> i) & 1 ? -deltas[i] : deltas[i];
      if (std::abs(acc / static_cast<double>(n)) >= obs_abs - tol) ++count;
    }
    result.exhaustive = true;
    result.iterations = static_cast<int>(total);
    result.p_value = static_cast<double>(count) / static_cast<double>(total);
    return result;
  }

  long long count = 0;
  for (int it = 0; it < iterations; ++it) {
    double acc = 0.0;
    uint64_t bits = 0;
    int avail = 0;
    for (size_t i = 0; i < n; ++i) {
      if (avail == 0) {
        bits = rng->NextU64();
        avail = 64;
      }
      acc += (bits & 1) ? -deltas[i] : deltas[i];
      bits >>= 1;
      --avail;
    }
    if (std::abs(acc / static_cast<double>(n)) >= obs_abs - tol) ++count;
  }
  result.exhaustive = false;
  result.iterations = iterations;
  result.p_value = static_cast<double>(1 + count) /
                   static_cast<double>(1 + iterations);
  return result;
}

double NormalApproxPValue(const std::vector<double>& group_a,
                          const std::vector<double>& group_b) {
  if (group_a.size() < 2 || group_b.size() < 2)
    return std::numeric_limits<double>::quiet_NaN();
  const double ma = Mean(group_a);
  const double mb = Mean(group_b);
  const double va = SampleVariance(group_a, ma);
  const double vb = SampleVariance(group_b, mb);
  const double se = std::sqrt(va / static_cast<double>(group_a.size()) +
                              vb / static_cast<double>(group_b.size()));
  if (!(se > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double z = (ma - mb) / se;
  return 2.0 * (1.0 - StandardNormalCdf(std::abs(z)));
}

}  // namespace sceneguard
