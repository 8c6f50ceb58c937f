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

// Closed-set accuracy and open-set ranking metrics. Unknown queries are the
// positive class throughout and a higher score means "more likely open".

#ifndef GEL_METRICS_H_
#define GEL_METRICS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace gel {

struct ScoreSet {
  std::vector<double> known;
  std::vector<double> unknown;
};

struct EpisodeResult {
  double acc = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  double f1 = 0.0;
  std::optional<double> iou;
};

struct MetricSummary {
  double mean = 0.0;
  // 1.96 * sample stddev / sqrt(n).
  double half_width = 0.0;
};

struct AggregateResult {
  std::size_t episodes = 0;
  MetricSummary acc;
  MetricSummary auroc;
  MetricSummary aupr;
  MetricSummary fpr95;
  MetricSummary f1;
  std::optional<MetricSummary> iou;
};

inline constexpr std::size_t kDefaultHistogramBins = 50;

double Accuracy(std::span<const int> predicted, std::span<const int> truth);

// P(random unknown outscores random known), ties counted one half.
double Auroc(const ScoreSet& s);

// Step-wise area under precision-recall over descending distinct thresholds.
double Aupr(const ScoreSet& s);

// Smallest FPR among thresholds reaching TPR >= 0.95.
double FprAtTpr95(const ScoreSet& s);

// F1 of the open class when the |unknown| highest scores are labeled open.
// Queries are ordered known-then-unknown and sorted stably by descending
// score, so at a tie on the cutoff known queries are labeled open first.
double F1TopQ(const ScoreSet& s);

// Shift scores to be non-negative, divide by the maximum, histogram each group
// as a density on [0, 1] and return sum(min) / sum(max). All-equal scores give 1.
double HistogramIou(const ScoreSet& s, std::size_t bins = kDefaultHistogramBins);

// Density histograms used by HistogramIou, exposed for plotting output.
struct NormalizedHistogram {
  std::vector<double> known_density;
  std::vector<double> unknown_density;
};
NormalizedHistogram ScoreHistogram(const ScoreSet& s, std::size_t bins);
// Scores after the shift-and-divide normalization (same order as the input).
ScoreSet NormalizeScores(const ScoreSet& s);

EpisodeResult EvaluateEpisode(const ScoreSet& s, std::span<const int> predicted,
                              std::span<const int> truth,
                              std::optional<std::size_t> iou_bins = kDefaultHistogramBins);

MetricSummary Summarize(std::span<const double> values);
// Throws kInsufficientData for fewer than two episodes.
AggregateResult Aggregate(std::span<const EpisodeResult> results);

}  // namespace gel

#endif  // GEL_METRICS_H_
