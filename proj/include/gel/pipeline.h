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

// The single forward path shared by training and evaluation: class-wise
// branch, optional pixel-wise branch, energies, losses and (on request) the
// full analytic backward pass.

#ifndef GEL_PIPELINE_H_
#define GEL_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gel/energy.h"
#include "gel/episode.h"
#include "gel/metrics.h"
#include "gel/model.h"

namespace gel {

struct AblationFlags {
  bool use_energy_loss = true;
  bool use_pixel_branch = true;
  CombineVariant combine = CombineVariant::kFixed;
  // When false the open score is the global energy E_c even though training
  // used the combined energy ("+ Pixel wise" row).
  bool combine_score = true;
  DistanceKind distance = DistanceKind::kSquaredEuclidean;
  HingeKind hinge = HingeKind::kSquared;

  // Cumulative ablation rows.
  static AblationFlags Baseline();
  static AblationFlags EnergyLoss();
  static AblationFlags PixelWise();
  static AblationFlags Full();
  // "baseline", "energy", "pixel", "full".
  static AblationFlags FromRowName(std::string_view row);

  // Throws kInvalidArgument when use_pixel_branch is off but the combine
  // variant is not global-only.
  void Validate() const;
  bool operator==(const AblationFlags&) const = default;
};

enum class Mode { kTrain, kEval };

struct ForwardOptions {
  Mode mode = Mode::kEval;
  bool compute_grads = false;
  // Records the discrete structure (top-k picks, PReLU signs, hinge activity)
  // so finite-difference checks can detect crossing a kink.
  bool trace_structure = false;
};

struct Losses {
  double closed_set = 0.0;
  double energy = 0.0;
  double total = 0.0;
};

struct ForwardResult {
  // Known queries first (N*Q rows), then unknown queries.
  Matrix class_similarity;
  // Empty when the pixel branch is disabled.
  Matrix pixel_similarity;
  // Closed-set probabilities of the known queries.
  Matrix known_probs;
  std::vector<EnergyBreakdown> energies;
  std::vector<double> open_scores;
  Coefficients coefficients;
  std::optional<Losses> losses;
  std::optional<ModelParams> grads;
  // Train-mode calibration pass, kept for the BN running-stat update.
  std::optional<CalibrationForward> calibration;
  std::vector<std::uint32_t> structure;
  // Closest approach to a PReLU kink, top-k tie or hinge corner.
  double min_kink_distance = 0.0;
};

ForwardResult ForwardEpisode(const ModelParams& params, const Episode& episode,
                             const ModelConfig& config, const AblationFlags& flags,
                             const ForwardOptions& options);

struct ScoredEpisode {
  ScoreSet scores;
  std::vector<int> predicted;
  std::vector<int> truth;
};

// Eval-mode forward; predicted label = argmax of the closed-set probabilities.
ScoredEpisode ScoreQueries(const ModelParams& params, const Episode& episode,
                           const ModelConfig& config, const AblationFlags& flags);

// Seeded episode set; episode i depends only on (seed, i).
std::vector<Episode> SampleEpisodes(const Bank& bank, int n_way, int k_shot, int q_query,
                                    std::size_t count, std::uint64_t seed);

std::vector<ScoredEpisode> ScoreEpisodes(const ModelParams& params,
                                         const std::vector<Episode>& episodes,
                                         const ModelConfig& config, const AblationFlags& flags);

std::vector<EpisodeResult> EvaluateScored(
    const std::vector<ScoredEpisode>& scored,
    std::optional<std::size_t> iou_bins = kDefaultHistogramBins);

}  // namespace gel

#endif  // GEL_PIPELINE_H_
