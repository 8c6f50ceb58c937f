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

#include "gel/model.h"

#include <algorithm>

namespace gel {

ModelParams ModelParams::Init(std::size_t dim, CombineVariant combine, Rng& rng) {
  ModelParams p;
  p.attention = AttentionParams::NearIdentity(dim, rng);
  p.calibration = CalibrationParams::Init(dim, rng);
  p.combine = CombineStrategy::Make(combine, dim);
  return p;
}

std::vector<ParamGroup> TrainableGroups(ModelParams& p) {
  std::vector<ParamGroup> groups = {
      {"attention.w_q", p.attention.w_q.values()},
      {"attention.w_k", p.attention.w_k.values()},
      {"attention.w_v", p.attention.w_v.values()},
      {"calibration.conv_weight", p.calibration.conv_weight.values()},
      {"calibration.conv_bias", p.calibration.conv_bias},
      {"calibration.bn_gamma", p.calibration.bn_gamma},
      {"calibration.bn_beta", p.calibration.bn_beta},
      {"calibration.prelu_slope", std::span(&p.calibration.prelu_slope, 1)},
  };
  if (p.combine.variant == CombineVariant::kLearnable) {
    groups.push_back({"combine.alpha", std::span(&p.combine.alpha, 1)});
    groups.push_back({"combine.beta", std::span(&p.combine.beta, 1)});
  }
  if (p.combine.variant == CombineVariant::kTaskAdaptive) {
    groups.push_back({"combine.adaptor_weight", p.combine.adaptor_weight.values()});
    groups.push_back({"combine.adaptor_bias", p.combine.adaptor_bias});
  }
  return groups;
}

ModelParams ZeroGradLike(const ModelParams& params) {
  ModelParams g = params;
  for (ParamGroup& group : TrainableGroups(g)) {
    std::fill(group.values.begin(), group.values.end(), 0.0);
  }
  return g;
}

bool AllTrainableFinite(ModelParams& params) {
  for (const ParamGroup& g : TrainableGroups(params)) {
    if (!AllFinite(g.values)) return false;
  }
  return AllFinite(params.calibration.bn_running_mean) &&
         AllFinite(params.calibration.bn_running_var);
}

}  // namespace gel
