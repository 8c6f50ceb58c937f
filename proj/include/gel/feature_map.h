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

#ifndef GEL_FEATURE_MAP_H_
#define GEL_FEATURE_MAP_H_

#include <cstddef>
#include <span>
#include <vector>

#include "gel/numerics.h"

namespace gel {

// An m x m grid of dim-channel activations. Storage is pixel-major with the
// channels of one pixel contiguous: data[pixel * dim + channel], where
// pixel = row * m + col.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t m, std::size_t dim, double fill = 0.0)
      : m_(m), dim_(dim), data_(m * m * dim, fill) {}
  FeatureMap(std::size_t m, std::size_t dim, std::vector<double> data);

  std::size_t m() const { return m_; }
  std::size_t dim() const { return dim_; }
  std::size_t pixels() const { return m_ * m_; }

  std::span<double> pixel(std::size_t p) { return {data_.data() + p * dim_, dim_}; }
  std::span<const double> pixel(std::size_t p) const { return {data_.data() + p * dim_, dim_}; }
  double& at(std::size_t p, std::size_t c) { return data_[p * dim_ + c]; }
  double at(std::size_t p, std::size_t c) const { return data_[p * dim_ + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool SameGeometry(const FeatureMap& o) const { return m_ == o.m_ && dim_ == o.dim_; }
  bool operator==(const FeatureMap& o) const = default;

 private:
  std::size_t m_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Per-channel mean over all m^2 spatial positions.
Vector AvgPool(const FeatureMap& f);

// Elementwise mean of maps sharing one geometry.
FeatureMap MeanMap(std::span<const FeatureMap> maps);

}  // namespace gel

#endif  // GEL_FEATURE_MAP_H_
