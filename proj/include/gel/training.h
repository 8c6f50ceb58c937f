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

// Episodic SGD training, finite-difference gradient verification and the GELC
// checkpoint format.

#ifndef GEL_TRAINING_H_
#define GEL_TRAINING_H_

#include <cstdint>
#include <string>
#include <vector>

#include "gel/episode.h"
#include "gel/model.h"
#include "gel/pipeline.h"

namespace gel {

struct LrSchedule {
  double decay_factor = 0.1;
  int period = 2000;
};

struct TrainConfig {
  int n_way = 5;
  int k_shot = 1;
  int q_query = 15;
  double lr_main = 1e-3;
  LrSchedule schedule;
  int total_tasks = 6000;
  std::uint64_t seed = 0;
  // Validation cadence in tasks; validation also runs before the first task.
  int eval_every = 500;
  int val_episodes = 100;
};

// lr_main * decay_factor^(task / period), task counted from 0.
double LearningRate(const TrainConfig& cfg, int task);

struct LossReport {
  double closed_set = 0.0;
  double energy = 0.0;
  double total = 0.0;
};

// One forward/backward on `episode` followed by theta <- theta - lr * grad and
// the BN running-stat update. Throws kNonFinite naming the offending term.
LossReport TrainStep(ModelParams& params, const Episode& episode, const ModelConfig& config,
                     const AblationFlags& flags, double lr);

struct GradCheckGroup {
  std::string name;
  std::size_t checked = 0;
  // Entries whose +-h probes changed the discrete structure (top-k picks,
  // PReLU signs, linear-hinge activity).
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_error = 0.0;
  double loss = 0.0;
  // Distance of the base point to the nearest kink or tie.
  double min_kink_distance = 0.0;

  bool Passed(double tolerance) const { return max_rel_error <= tolerance; }
};

// |analytic - numeric| / max(|analytic|, |numeric|, kGradCheckFloor * max(1, |loss|)).
inline constexpr double kGradCheckFloor = 1e-6;

// Central differences of the total training loss for every trainable scalar.
GradCheckReport GradCheck(const ModelParams& params, const Episode& episode,
                          const ModelConfig& config, const AblationFlags& flags, double h);

struct Geometry {
  std::uint32_t dim = 0;
  std::uint32_t m = 0;
  std::uint32_t n_way = 0;
  std::uint32_t k_shot = 0;
  std::uint32_t q_query = 0;
  std::uint32_t k_top = 0;
  double temperature = 0.0;

  bool operator==(const Geometry&) const = default;
};

struct Checkpoint {
  Geometry geometry;
  ModelConfig config;
  AblationFlags flags;
  ModelParams params;
  std::uint64_t step = 0;
  std::uint64_t rng_state = 0;
};

// GELC: "GELC", u32 version, geometry, flags and margins, step and RNG state,
// then the parameter payload as little-endian float64.
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint LoadCheckpoint(const std::string& path);
// Throws kGeometryMismatch when the feature geometry (m, dim) differs.
void CheckGeometry(const Checkpoint& ckpt, std::size_t m, std::size_t dim);

struct HistoryEntry {
  int task = 0;
  double lr = 0.0;
  // Mean training losses over tasks since the previous entry (zeros at task 0).
  LossReport train;
  double val_auroc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  // Checkpoint with the best validation AUROC (earliest on ties).
  Checkpoint best;
  Checkpoint last;
  std::vector<HistoryEntry> history;
  std::vector<LossReport> task_losses;
};

// Trains on `train` with episodes from a seeded stream, validating every
// eval_every tasks on a fixed seeded validation episode set.
TrainResult RunTraining(const Bank& train, const Bank& validation, const TrainConfig& cfg,
                        const ModelConfig& config, const AblationFlags& flags);

}  // namespace gel

#endif  // GEL_TRAINING_H_
