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

#include "gel/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gel/error.h"

namespace gel {
namespace {

void RequireBoth(const ScoreSet& s, const char* metric) {
  if (s.known.empty() || s.unknown.empty()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(metric) +
                                                 " needs known and unknown scores (got " +
                                                 std::to_string(s.known.size()) + " / " +
                                                 std::to_string(s.unknown.size()) + ")");
  }
}

struct Tagged {
  double score;
  bool unknown;
};

// Descending by score.
std::vector<Tagged> SortedDescending(const ScoreSet& s) {
  std::vector<Tagged> all;
  all.reserve(s.known.size() + s.unknown.size());
  for (double x : s.known) all.push_back({x, false});
  for (double x : s.unknown) all.push_back({x, true});
  std::stable_sort(all.begin(), all.end(),
                   [](const Tagged& a, const Tagged& b) { return a.score > b.score; });
  return all;
}

// Calls visit(tp, fp) after each group of tied scores, walking thresholds
// from the highest score down.
template <typename Visit>
void SweepThresholds(const std::vector<Tagged>& sorted, Visit visit) {
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].unknown ? tp : fp)++;
      ++j;
    }
    if (!visit(tp, fp)) return;
    i = j;
  }
}

}  // namespace

double Accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "accuracy over unequal label lists");
  }
  if (predicted.empty()) throw Error(ErrorCode::kInvalidArgument, "accuracy of no predictions");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

double Auroc(const ScoreSet& s) {
  RequireBoth(s, "auroc");
  // Mann-Whitney U from midranks (ascending ranks, 1-based).
  std::vector<Tagged> all = SortedDescending(s);
  std::reverse(all.begin(), all.end());
  double rank_sum_unknown = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t n_unknown = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      n_unknown += all[j].unknown;
      ++j;
    }
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum_unknown += midrank * static_cast<double>(n_unknown);
    i = j;
  }
  const double nu = static_cast<double>(s.unknown.size());
  const double nk = static_cast<double>(s.known.size());
  const double u = rank_sum_unknown - nu * (nu + 1.0) / 2.0;
  return u / (nu * nk);
}

double Aupr(const ScoreSet& s) {
  RequireBoth(s, "aupr");
  const double positives = static_cast<double>(s.unknown.size());
  double area = 0.0;
  double prev_recall = 0.0;
  SweepThresholds(SortedDescending(s), [&](std::size_t tp, std::size_t fp) {
    const double recall = static_cast<double>(tp) / positives;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    return true;
  });
  return area;
}

double FprAtTpr95(const ScoreSet& s) {
  RequireBoth(s, "fpr95");
  const std::size_t positives = s.unknown.size();
  double fpr = 1.0;
  SweepThresholds(SortedDescending(s), [&](std::size_t tp, std::size_t fp) {
    if (100 * tp >= 95 * positives) {
      fpr = static_cast<double>(fp) / static_cast<double>(s.known.size());
      return false;
    }
    return true;
  });
  return fpr;
}

double F1TopQ(const ScoreSet& s) {
  RequireBoth(s, "f1");
  const std::vector<Tagged> sorted = SortedDescending(s);
  const std::size_t cutoff = s.unknown.size();
  std::size_t tp = 0;
  for (std::size_t i = 0; i < cutoff; ++i) tp += sorted[i].unknown;
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(cutoff);
  const double recall = static_cast<double>(tp) / static_cast<double>(s.unknown.size());
  return 2.0 * precision * recall / (precision + recall);
}

ScoreSet NormalizeScores(const ScoreSet& s) {
  RequireBoth(s, "histogram");
  double lo = std::min(*std::min_element(s.known.begin(), s.known.end()),
                       *std::min_element(s.unknown.begin(), s.unknown.end()));
  const double shift = lo < 0.0 ? -lo : 0.0;
  ScoreSet out = s;
  double hi = 0.0;
  for (auto* group : {&out.known, &out.unknown}) {
    for (double& x : *group) {
      x += shift;
      hi = std::max(hi, x);
    }
  }
  if (hi > 0.0) {
    for (auto* group : {&out.known, &out.unknown}) {
      for (double& x : *group) x /= hi;
    }
  }
  return out;
}

NormalizedHistogram ScoreHistogram(const ScoreSet& s, std::size_t bins) {
  if (bins < 2) throw Error(ErrorCode::kInvalidArgument, "histogram needs >= 2 bins");
  const ScoreSet norm = NormalizeScores(s);
  NormalizedHistogram h;
  const double width = 1.0 / static_cast<double>(bins);
  auto fill = [&](const std::vector<double>& xs, std::vector<double>& density) {
    density.assign(bins, 0.0);
    for (double x : xs) {
      const auto b = std::min(static_cast<std::size_t>(std::max(x, 0.0) * bins), bins - 1);
      density[b] += 1.0;
    }
    for (double& d : density) d /= static_cast<double>(xs.size()) * width;
  };
  fill(norm.known, h.known_density);
  fill(norm.unknown, h.unknown_density);
  return h;
}

double HistogramIou(const ScoreSet& s, std::size_t bins) {
  const NormalizedHistogram h = ScoreHistogram(s, bins);
  double inter = 0.0, uni = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    inter += std::min(h.known_density[b], h.unknown_density[b]);
    uni += std::max(h.known_density[b], h.unknown_density[b]);
  }
  return uni > 0.0 ? inter / uni : 1.0;
}

EpisodeResult EvaluateEpisode(const ScoreSet& s, std::span<const int> predicted,
                              std::span<const int> truth, std::optional<std::size_t> iou_bins) {
  EpisodeResult r;
  r.acc = Accuracy(predicted, truth);
  r.auroc = Auroc(s);
  r.aupr = Aupr(s);
  r.fpr95 = FprAtTpr95(s);
  r.f1 = F1TopQ(s);
  if (iou_bins) r.iou = HistogramIou(s, *iou_bins);
  return r;
}

MetricSummary Summarize(std::span<const double> values) {
  if (values.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "confidence interval needs >= 2 episodes");
  }
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
    return {values[0], 0.0};
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double stddev = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * stddev / std::sqrt(n)};
}

AggregateResult Aggregate(std::span<const EpisodeResult> results) {
  if (results.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "aggregate needs >= 2 episodes, got " + std::to_string(results.size()));
  }
  auto column = [&](auto get) {
    std::vector<double> v;
    v.reserve(results.size());
    for (const EpisodeResult& r : results) v.push_back(get(r));
    return Summarize(v);
  };
  AggregateResult a;
  a.episodes = results.size();
  a.acc = column([](const EpisodeResult& r) { return r.acc; });
  a.auroc = column([](const EpisodeResult& r) { return r.auroc; });
  a.aupr = column([](const EpisodeResult& r) { return r.aupr; });
  a.fpr95 = column([](const EpisodeResult& r) { return r.fpr95; });
  a.f1 = column([](const EpisodeResult& r) { return r.f1; });
  const bool all_iou = std::all_of(results.begin(), results.end(),
                                   [](const EpisodeResult& r) { return r.iou.has_value(); });
  if (all_iou) a.iou = column([](const EpisodeResult& r) { return *r.iou; });
  return a;
}

}  // namespace gel
