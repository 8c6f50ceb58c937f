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

// Pixel-wise (local) branch: scale calibration PReLU(BN(Conv1x1(f))) that
// halves the channel count, class feature maps, and temperature-scaled top-k
// cosine similarity between calibrated pixels.

#ifndef GEL_PIXELWISE_H_
#define GEL_PIXELWISE_H_

#include <cstddef>
#include <span>
#include <vector>

#include "gel/feature_map.h"
#include "gel/numerics.h"
#include "gel/random.h"

namespace gel {

enum class BnMode { kTrain, kEval };

struct CalibrationParams {
  Matrix conv_weight;  // (dim/2) x dim
  Vector conv_bias;    // dim/2
  Vector bn_gamma;
  Vector bn_beta;
  Vector bn_running_mean;
  Vector bn_running_var;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  double prelu_slope = 0.25;

  // conv_weight ~ N(0, 1/dim); gamma 1, beta 0, running stats (0, 1).
  // Throws kInvalidArgument for odd dim.
  static CalibrationParams Init(std::size_t dim, Rng& rng);

  std::size_t in_channels() const { return conv_weight.cols(); }
  std::size_t out_channels() const { return conv_weight.rows(); }
  bool operator==(const CalibrationParams&) const = default;
};

struct CalibrationGrads {
  Matrix conv_weight;
  Vector conv_bias;
  Vector bn_gamma;
  Vector bn_beta;
  double prelu_slope = 0.0;
};

struct CalibrationForward {
  BnMode mode = BnMode::kEval;
  std::vector<FeatureMap> conv_out;
  std::vector<FeatureMap> normalized;
  std::vector<FeatureMap> pre_activation;
  std::vector<FeatureMap> output;
  // Statistics used for normalization (batch stats in train mode, running
  // stats in eval mode). batch_var is the biased variance.
  Vector mean;
  Vector var;
  std::size_t count = 0;
};

// Calibrates every map of `batch`. In train mode BN normalizes each output
// channel over all pixels of all maps in the batch.
CalibrationForward CalibrateForward(std::span<const FeatureMap> batch,
                                    const CalibrationParams& params, BnMode mode);

// Calibrates one map using `batch` for train-mode statistics.
FeatureMap ScaleCalibrate(const FeatureMap& f, const CalibrationParams& params, BnMode mode,
                          std::span<const FeatureMap> batch);

CalibrationGrads CalibrateBackward(std::span<const FeatureMap> batch,
                                   const CalibrationParams& params, const CalibrationForward& fwd,
                                   std::span<const FeatureMap> d_output);

// Momentum update of the running statistics from a train-mode forward. The
// running variance uses the unbiased batch variance.
void UpdateRunningStats(CalibrationParams& params, const CalibrationForward& fwd);

// Elementwise mean of the K calibrated support maps of one class.
FeatureMap ClassFeatureMap(std::span<const FeatureMap> support_maps);

struct PixelSimilarityConfig {
  std::size_t k_top = 4;
  double temperature = 4.0;

  // Temperature equal to k, the default pairing.
  static PixelSimilarityConfig WithTopK(std::size_t k) { return {k, static_cast<double>(k)}; }
};

struct PixelMatch {
  double similarity = 0.0;
  // cosines(u, v): query pixel u against class pixel v.
  Matrix cosines;
  // Row u: the k_top class pixels selected for query pixel u.
  std::vector<std::vector<std::size_t>> selected;
  // Smallest gap between the k-th and (k+1)-th cosine over query pixels;
  // +inf when k_top equals the pixel count.
  double min_tie_gap = 0.0;
};

// s_f = (1/T) * sum over query pixels of the sum of the k_top largest cosines
// against the class map's pixels.
double PixelSimilarity(const FeatureMap& query, const FeatureMap& class_map,
                       const PixelSimilarityConfig& cfg);
PixelMatch PixelSimilarityDetailed(const FeatureMap& query, const FeatureMap& class_map,
                                   const PixelSimilarityConfig& cfg);

// Accumulates d_similarity * ds_f/dquery and ds_f/dclass_map.
void PixelSimilarityBackward(const FeatureMap& query, const FeatureMap& class_map,
                             const PixelSimilarityConfig& cfg, const PixelMatch& match,
                             double d_similarity, FeatureMap& d_query, FeatureMap& d_class_map);

Vector PixelSimilarityAll(const FeatureMap& query, std::span<const FeatureMap> class_maps,
                          const PixelSimilarityConfig& cfg);

}  // namespace gel

#endif  // GEL_PIXELWISE_H_
