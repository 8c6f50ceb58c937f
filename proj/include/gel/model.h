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

#ifndef GEL_MODEL_H_
#define GEL_MODEL_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gel/classwise.h"
#include "gel/energy.h"
#include "gel/pixelwise.h"
#include "gel/random.h"

namespace gel {

// Every trainable quantity of the model plus the BN running statistics.
struct ModelParams {
  AttentionParams attention;
  CalibrationParams calibration;
  CombineStrategy combine;

  static ModelParams Init(std::size_t dim, CombineVariant combine, Rng& rng);

  std::size_t dim() const { return attention.dim(); }
  bool operator==(const ModelParams&) const = default;
};

// Named view of one trainable tensor. Views are stable only while the owning
// ModelParams is alive and unresized.
struct ParamGroup {
  std::string name;
  std::span<double> values;
};

// Trainable tensors in a fixed order. Combine coefficients appear only for
// the variants that train them; BN running statistics never appear.
std::vector<ParamGroup> TrainableGroups(ModelParams& params);

// Same shapes as `params` with every trainable entry zeroed; used as the
// gradient container.
ModelParams ZeroGradLike(const ModelParams& params);

bool AllTrainableFinite(ModelParams& params);

// Shared hyperparameters of the forward pass.
struct ModelConfig {
  PixelSimilarityConfig pixel = PixelSimilarityConfig::WithTopK(4);
  MarginConfig margins;
};

}  // namespace gel

#endif  // GEL_MODEL_H_
