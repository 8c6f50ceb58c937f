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

// Episodic data model: labeled feature-map banks, the N-way K-shot sampler
// with pseudo open-set classes, a synthetic feature generator and the GELB
// on-disk format.

#ifndef GEL_EPISODE_H_
#define GEL_EPISODE_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gel/feature_map.h"
#include "gel/random.h"

namespace gel {

struct ClassBank {
  std::uint32_t class_id = 0;
  std::vector<FeatureMap> samples;

  bool operator==(const ClassBank&) const = default;
};

using Bank = std::vector<ClassBank>;

// Where an episode sample came from: index into the bank list and into that
// class's samples.
struct SampleRef {
  std::size_t bank_index = 0;
  std::size_t sample_index = 0;

  bool operator==(const SampleRef&) const = default;
};

struct Episode {
  int n_way = 0;
  int k_shot = 0;
  int q_query = 0;

  // Class-major: support[n * k_shot + j] belongs to episode class n.
  std::vector<FeatureMap> support;
  std::vector<int> support_labels;
  // Class-major, q_query per known class.
  std::vector<FeatureMap> known_queries;
  std::vector<int> known_labels;
  // q_query per unknown class; no closed-set label.
  std::vector<FeatureMap> unknown_queries;

  std::vector<std::uint32_t> known_class_ids;
  std::vector<std::uint32_t> unknown_class_ids;

  std::vector<SampleRef> support_refs;
  std::vector<SampleRef> known_refs;
  std::vector<SampleRef> unknown_refs;

  std::size_t m() const;
  std::size_t dim() const;
};

// Draws 2N distinct eligible classes (the first N known, the rest unknown),
// then K support + Q query samples per known class and Q samples per unknown
// class, all without replacement. A class is eligible when it holds at least
// K + Q samples.
Episode SampleEpisode(const Bank& bank, int n_way, int k_shot, int q_query, Rng& rng);

struct SyntheticSpec {
  int n_classes = 40;
  int samples_per_class = 20;
  int m = 3;
  int dim = 16;
  // Radius of the sphere class means are drawn on, in units of the unit
  // per-pixel noise standard deviation.
  double cluster_separation = 4.0;
  bool local_patch = true;
  // Length of the class-unique direction added at the class's patch pixel.
  double patch_strength = 4.0;
};

Bank GenerateSynthetic(const SyntheticSpec& spec, Rng& rng);

// GELB: "GELB", u32 version (1), u32 n_classes, then per class u32 class_id,
// u32 n_samples, u32 m, u32 dim and n_samples * m * m * dim float32 values,
// everything little-endian.
inline constexpr std::uint32_t kBankFormatVersion = 1;

void SaveBank(const Bank& bank, const std::string& path);
Bank LoadBank(const std::string& path);

// Verifies every sample shares one geometry; returns it as {m, dim}, or {0, 0}
// for a bank without samples.
std::pair<std::size_t, std::size_t> BankGeometry(const Bank& bank);

// Contiguous class split used for train/validation/test partitions.
struct BankSplit {
  Bank train;
  Bank validation;
  Bank test;
};

BankSplit SplitBank(const Bank& bank, std::size_t n_train, std::size_t n_validation);

}  // namespace gel

#endif  // GEL_EPISODE_H_
