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

// Evaluation reports: a human-readable table and a JSON-lines file with one
// record per line.
//
//   {"record":"episode","label":L,"index":i,"known_scores":[..],
//    "unknown_scores":[..],"predicted":[..],"labels":[..],
//    "acc":..,"auroc":..,"aupr":..,"fpr95":..,"f1":..,"iou":..}
//   {"record":"aggregate","label":L,"episodes":n,
//    "metrics":{"acc":{"mean":..,"ci95":..},...}}
//   {"record":"histogram","label":L,"bins":b,"known_density":[..],
//    "unknown_density":[..],"iou":..}
//
// Training history files use {"record":"history","task":..,"lr":..,
// "loss_closed":..,"loss_energy":..,"loss_total":..,"val_auroc":..,"val_acc":..}.

#ifndef GEL_REPORT_H_
#define GEL_REPORT_H_

#include <cstddef>
#include <string>
#include <vector>

#include "gel/metrics.h"
#include "gel/pipeline.h"
#include "gel/training.h"

namespace gel {

struct EvalReport {
  std::string label;
  std::vector<ScoredEpisode> scored;
  std::vector<EpisodeResult> results;
  AggregateResult aggregate;
  std::size_t bins = kDefaultHistogramBins;
  // Pooled over episodes after per-episode normalization.
  NormalizedHistogram histogram;
  double pooled_iou = 0.0;
};

EvalReport BuildReport(std::string label, std::vector<ScoredEpisode> scored,
                       std::size_t bins = kDefaultHistogramBins);

void WriteReportJsonl(const std::vector<EvalReport>& reports, const std::string& path);
// Rebuilds reports from the episode records only (scores and labels); metrics
// are recomputed rather than trusted from the file.
std::vector<EvalReport> ReadReportJsonl(const std::string& path,
                                        std::size_t bins = kDefaultHistogramBins);

std::string FormatAggregateTable(const std::vector<EvalReport>& reports);

void WriteHistoryJsonl(const std::vector<HistoryEntry>& history, const std::string& path);

}  // namespace gel

#endif  // GEL_REPORT_H_
