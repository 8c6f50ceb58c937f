/*
 * Copyright 2026 The GEL Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GEL_TESTS_TEST_UTIL_H_
#define GEL_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "gel/episode.h"
#include "gel/feature_map.h"
#include "gel/metrics.h"
#include "gel/numerics.h"
#include "gel/random.h"

namespace gel::testing {

inline Matrix RandomMatrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.Normal();
  return m;
}

inline Vector RandomVector(std::size_t n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = scale * rng.Normal();
  return v;
}

inline FeatureMap RandomMap(std::size_t m, std::size_t dim, Rng& rng, double scale = 1.0) {
  FeatureMap f(m, dim);
  for (double& v : f.values()) v = scale * rng.Normal();
  return f;
}

inline double RelativeError(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Small bank of Gaussian maps drawn around per-class means.
inline Bank TinyBank(int classes, int per_class, std::size_t m, std::size_t dim, Rng& rng,
                     double separation = 3.0) {
  SyntheticSpec spec;
  spec.n_classes = classes;
  spec.samples_per_class = per_class;
  spec.m = static_cast<int>(m);
  spec.dim = static_cast<int>(dim);
  spec.cluster_separation = separation;
  return GenerateSynthetic(spec, rng);
}

// Integer-valued scores give frequent ties.
inline ScoreSet RandomScoreSet(Rng& rng, std::size_t max_total = 200) {
  const std::size_t nk = 1 + rng.UniformInt(max_total / 2);
  const std::size_t nu = 1 + rng.UniformInt(max_total / 2);
  const bool heavy_ties = rng.Uniform() < 0.5;
  const std::uint64_t levels = 1 + rng.UniformInt(heavy_ties ? 6 : 1000);
  const double shift = rng.Uniform();
  ScoreSet s;
  for (std::size_t i = 0; i < nk; ++i) {
    s.known.push_back(static_cast<double>(rng.UniformInt(levels)));
  }
  for (std::size_t i = 0; i < nu; ++i) {
    s.unknown.push_back(static_cast<double>(rng.UniformInt(levels)) + shift);
  }
  return s;
}

// ---- brute-force metric oracles ----

inline double PairAuroc(const ScoreSet& s) {
  double concordant = 0.0;
  for (double u : s.unknown) {
    for (double k : s.known) concordant += u > k ? 1.0 : (u == k ? 0.5 : 0.0);
  }
  return concordant / (static_cast<double>(s.unknown.size()) * static_cast<double>(s.known.size()));
}

struct Counts {
  double tp;
  double fp;
};

inline Counts CountAtLeast(const ScoreSet& s, double t) {
  Counts c{0.0, 0.0};
  for (double u : s.unknown) c.tp += u >= t;
  for (double k : s.known) c.fp += k >= t;
  return c;
}

inline std::vector<double> ThresholdsDescending(const ScoreSet& s) {
  std::set<double, std::greater<>> t(s.known.begin(), s.known.end());
  t.insert(s.unknown.begin(), s.unknown.end());
  return {t.begin(), t.end()};
}

inline double SweepAupr(const ScoreSet& s) {
  const double p = static_cast<double>(s.unknown.size());
  double area = 0.0, prev_recall = 0.0;
  for (double t : ThresholdsDescending(s)) {
    const Counts c = CountAtLeast(s, t);
    const double recall = c.tp / p;
    area += (recall - prev_recall) * (c.tp / (c.tp + c.fp));
    prev_recall = recall;
  }
  return area;
}

inline double SweepFpr95(const ScoreSet& s) {
  const double p = static_cast<double>(s.unknown.size());
  for (double t : ThresholdsDescending(s)) {
    const Counts c = CountAtLeast(s, t);
    if (100.0 * c.tp >= 95.0 * p) return c.fp / static_cast<double>(s.known.size());
  }
  return 1.0;
}

// Ranks every item (known first, then unknown, ties keep that order) by
// counting how many items precede it.
inline double CountingF1(const ScoreSet& s) {
  std::vector<std::pair<double, bool>> items;
  for (double k : s.known) items.push_back({k, false});
  for (double u : s.unknown) items.push_back({u, true});
  const std::size_t cutoff = s.unknown.size();
  double tp = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].second) continue;
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (items[j].first > items[i].first || (items[j].first == items[i].first && j < i)) {
        ++ahead;
      }
    }
    if (ahead < cutoff) tp += 1.0;
  }
  if (tp == 0.0) return 0.0;
  const double precision = tp / static_cast<double>(cutoff);
  const double recall = tp / static_cast<double>(s.unknown.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace gel::testing

#endif  // GEL_TESTS_TEST_UTIL_H_
