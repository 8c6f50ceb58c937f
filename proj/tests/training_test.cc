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

#include "gel/training.h"

#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "gel/error.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace gel {
namespace {

using ::gel::testing::TinyBank;

std::string TempPath(const std::string& name) { return ::testing::TempDir() + name; }

std::string ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteBytes(const std::string& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
}

ModelConfig TinyConfig() {
  ModelConfig c;
  c.pixel = PixelSimilarityConfig::WithTopK(2);
  return c;
}

TrainConfig SmallTrainConfig(int tasks) {
  TrainConfig cfg;
  cfg.n_way = 3;
  cfg.k_shot = 1;
  cfg.q_query = 3;
  cfg.total_tasks = tasks;
  cfg.eval_every = 50;
  cfg.val_episodes = 10;
  cfg.seed = 5;
  return cfg;
}

Checkpoint RandomCheckpoint(CombineVariant variant, std::uint64_t seed) {
  Rng rng(seed);
  Checkpoint c;
  c.geometry = {8, 2, 3, 2, 2, 2, 2.0};
  c.config = TinyConfig();
  c.config.margins = {-1.5, 0.5, 0.25};
  c.flags.combine = variant;
  c.flags.use_pixel_branch = variant != CombineVariant::kGlobalOnly;
  c.flags.combine_score = seed % 2 == 0;
  c.flags.hinge = seed % 3 == 0 ? HingeKind::kLinear : HingeKind::kSquared;
  c.flags.distance = seed % 5 == 0 ? DistanceKind::kEuclidean : DistanceKind::kSquaredEuclidean;
  c.params = ModelParams::Init(8, variant, rng);
  for (ParamGroup& g : TrainableGroups(c.params)) {
    for (double& v : g.values) v += rng.Normal();
  }
  for (double& v : c.params.calibration.bn_running_mean) v = rng.Normal();
  for (double& v : c.params.calibration.bn_running_var) v = 0.5 + rng.Uniform();
  c.step = rng.NextU64() % 100000;
  c.rng_state = rng.NextU64();
  return c;
}

void ExpectSameCheckpoint(const Checkpoint& a, const Checkpoint& b) {
  EXPECT_EQ(a.geometry, b.geometry);
  EXPECT_EQ(a.flags, b.flags);
  EXPECT_EQ(a.config.pixel.k_top, b.config.pixel.k_top);
  EXPECT_EQ(a.config.pixel.temperature, b.config.pixel.temperature);
  EXPECT_EQ(a.config.margins.m_known, b.config.margins.m_known);
  EXPECT_EQ(a.config.margins.m_unknown, b.config.margins.m_unknown);
  EXPECT_EQ(a.config.margins.lambda, b.config.margins.lambda);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.step, b.step);
  EXPECT_EQ(a.rng_state, b.rng_state);
}

TEST(LearningRateTest, StepDecay) {
  TrainConfig cfg;
  cfg.schedule = {0.1, 12000};
  EXPECT_EQ(LearningRate(cfg, 0), 1e-3);
  EXPECT_EQ(LearningRate(cfg, 11999), 1e-3);
  EXPECT_NEAR(LearningRate(cfg, 12000), 1e-4, 1e-18);
  EXPECT_NEAR(LearningRate(cfg, 24000), 1e-5, 1e-18);
  const TrainConfig desk;
  EXPECT_NEAR(LearningRate(desk, 2000), 1e-4, 1e-18);
  EXPECT_NEAR(LearningRate(desk, 5999), 1e-5, 1e-18);
}

TEST(TrainStepTest, ZeroLearningRateKeepsTrainableParameters) {
  Rng rng(1);
  const Bank bank = TinyBank(7, 5, 2, 8, rng);
  const Episode ep = SampleEpisode(bank, 3, 1, 2, rng);
  ModelParams params = ModelParams::Init(8, CombineVariant::kFixed, rng);
  const ModelParams before = params;
  const LossReport loss = TrainStep(params, ep, TinyConfig(), AblationFlags::Full(), 0.0);
  EXPECT_EQ(params.attention, before.attention);
  EXPECT_EQ(params.calibration.conv_weight, before.calibration.conv_weight);
  EXPECT_EQ(params.calibration.bn_gamma, before.calibration.bn_gamma);
  EXPECT_EQ(params.calibration.prelu_slope, before.calibration.prelu_slope);
  EXPECT_GT(loss.total, 0.0);
  EXPECT_GT(loss.closed_set, 0.0);
}

TEST(TrainStepTest, SingleStepDescends) {
  Rng rng(2);
  const Bank bank = TinyBank(7, 6, 2, 8, rng);
  for (CombineVariant v : {CombineVariant::kFixed, CombineVariant::kLearnable,
                           CombineVariant::kTaskAdaptive, CombineVariant::kDelay}) {
    const Episode ep = SampleEpisode(bank, 3, 2, 3, rng);
    ModelParams params = ModelParams::Init(8, v, rng);
    AblationFlags flags;
    flags.combine = v;
    const ForwardOptions train{Mode::kTrain};
    const double before = ForwardEpisode(params, ep, TinyConfig(), flags, train).losses->total;
    TrainStep(params, ep, TinyConfig(), flags, 1e-3);
    const double after = ForwardEpisode(params, ep, TinyConfig(), flags, train).losses->total;
    EXPECT_LT(after, before) << CombineVariantName(v);
  }
}

TEST(GradCheckTest, TinyGeometryPasses) {
  Rng rng(3);
  const Bank bank = TinyBank(7, 4, 2, 8, rng);
  const Episode ep = SampleEpisode(bank, 3, 1, 2, rng);
  const ModelParams params = ModelParams::Init(8, CombineVariant::kFixed, rng);
  const GradCheckReport r = GradCheck(params, ep, TinyConfig(), AblationFlags::Full(), 1e-5);
  EXPECT_TRUE(r.Passed(1e-4)) << r.max_rel_error;
  EXPECT_EQ(r.groups.size(), 8u);
}

TEST(GradCheckTest, GlobalOnlyHasExactZeroPixelGradients) {
  Rng rng(4);
  const Bank bank = TinyBank(7, 4, 2, 8, rng);
  const Episode ep = SampleEpisode(bank, 3, 1, 2, rng);
  const ModelParams params = ModelParams::Init(8, CombineVariant::kGlobalOnly, rng);
  const GradCheckReport r = GradCheck(params, ep, TinyConfig(), AblationFlags::EnergyLoss(), 1e-5);
  EXPECT_TRUE(r.Passed(1e-4));
  for (const GradCheckGroup& g : r.groups) {
    if (g.name.rfind("calibration.", 0) == 0) {
      EXPECT_EQ(g.max_abs_grad, 0.0) << g.name;
      EXPECT_EQ(g.max_rel_error, 0.0) << g.name;
    }
  }
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  int cases = 0;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    const CombineVariant v = static_cast<CombineVariant>(seed % 5);
    const Checkpoint c = RandomCheckpoint(v, seed);
    const std::string path = TempPath("ckpt.gelc"), again = TempPath("ckpt2.gelc");
    SaveCheckpoint(c, path);
    const Checkpoint loaded = LoadCheckpoint(path);
    ExpectSameCheckpoint(c, loaded);
    SaveCheckpoint(loaded, again);
    EXPECT_EQ(ReadBytes(path), ReadBytes(again));
    ++cases;
  }
  EXPECT_GE(cases, 100);
}

TEST(CheckpointTest, RoundTripPreservesMetrics) {
  Rng rng(6);
  const Bank bank = TinyBank(8, 6, 2, 8, rng);
  const Checkpoint c = RandomCheckpoint(CombineVariant::kFixed, 6);
  const std::string path = TempPath("metrics.gelc");
  SaveCheckpoint(c, path);
  const Checkpoint loaded = LoadCheckpoint(path);
  const auto episodes = SampleEpisodes(bank, 3, 2, 2, 5, 11);
  const auto a = EvaluateScored(ScoreEpisodes(c.params, episodes, c.config, c.flags));
  const auto b =
      EvaluateScored(ScoreEpisodes(loaded.params, episodes, loaded.config, loaded.flags));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].auroc, b[i].auroc);
    EXPECT_EQ(a[i].acc, b[i].acc);
    EXPECT_EQ(a[i].iou, b[i].iou);
  }
}

TEST(CheckpointTest, CorruptFilesRejected) {
  const Checkpoint c = RandomCheckpoint(CombineVariant::kTaskAdaptive, 7);
  const std::string path = TempPath("corrupt.gelc");
  SaveCheckpoint(c, path);
  const std::string bytes = ReadBytes(path);
  auto expect_code = [&](const std::string& data, ErrorCode code) {
    WriteBytes(path, data);
    try {
      LoadCheckpoint(path);
      ADD_FAILURE() << "expected " << ErrorCodeName(code);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  expect_code(bytes.substr(0, bytes.size() - 5), ErrorCode::kTruncated);
  expect_code(bytes.substr(0, 10), ErrorCode::kTruncated);
  expect_code("GELB" + bytes.substr(4), ErrorCode::kBadMagic);
  std::string version = bytes;
  version[4] = 2;
  expect_code(version, ErrorCode::kVersionMismatch);
  expect_code(bytes + "x", ErrorCode::kInvalidArgument);
}

TEST(CheckpointTest, GeometryMismatch) {
  Checkpoint c = RandomCheckpoint(CombineVariant::kFixed, 8);
  EXPECT_NO_THROW(CheckGeometry(c, 2, 8));
  c.geometry.dim = 16;
  try {
    CheckGeometry(c, 2, 32);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGeometryMismatch);
  }
}

TEST(RunTrainingTest, ZeroTasksReturnsInitialCheckpoint) {
  Rng rng(9);
  const Bank train = TinyBank(8, 6, 2, 8, rng);
  const Bank val = TinyBank(6, 6, 2, 8, rng);
  const TrainResult r =
      RunTraining(train, val, SmallTrainConfig(0), TinyConfig(), AblationFlags::Full());
  EXPECT_EQ(r.best.step, 0u);
  EXPECT_EQ(r.last.step, 0u);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_TRUE(r.task_losses.empty());
  Rng init = Rng(5).Fork(1);
  EXPECT_EQ(r.last.params, ModelParams::Init(8, CombineVariant::kFixed, init));
}

TEST(RunTrainingTest, DeterministicUnderFixedSeed) {
  Rng rng(10);
  const Bank train = TinyBank(8, 6, 2, 8, rng);
  const Bank val = TinyBank(6, 6, 2, 8, rng);
  const TrainResult a =
      RunTraining(train, val, SmallTrainConfig(120), TinyConfig(), AblationFlags::Full());
  const TrainResult b =
      RunTraining(train, val, SmallTrainConfig(120), TinyConfig(), AblationFlags::Full());
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].task, b.history[i].task);
    EXPECT_EQ(a.history[i].train.total, b.history[i].train.total);
    EXPECT_EQ(a.history[i].val_auroc, b.history[i].val_auroc);
  }
  EXPECT_EQ(a.last.params, b.last.params);
  EXPECT_EQ(a.history.back().task, 120);
  EXPECT_EQ(a.history.size(), 4u);
}

TEST(RunTrainingTest, LossDescendsAndStaysFinite) {
  SyntheticSpec spec;
  spec.n_classes = 20;
  spec.cluster_separation = 1.5;
  Rng rng(11);
  const Bank bank = GenerateSynthetic(spec, rng);
  const BankSplit split = SplitBank(bank, 10, 10);
  TrainConfig cfg;
  cfg.total_tasks = 1000;
  cfg.q_query = 5;
  cfg.eval_every = 1000;
  cfg.val_episodes = 5;
  cfg.lr_main = 1e-2;
  const TrainResult r = RunTraining(split.train, split.validation, cfg, {}, AblationFlags::Full());
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 200; ++i) {
    first += r.task_losses[i].total;
    last += r.task_losses[r.task_losses.size() - 1 - i].total;
  }
  EXPECT_GT(first, last);
  Checkpoint final_ckpt = r.last;
  EXPECT_TRUE(AllTrainableFinite(final_ckpt.params));
}

TEST(RunTrainingTest, Validation) {
  Rng rng(12);
  const Bank bank = TinyBank(8, 6, 2, 8, rng);
  TrainConfig cfg = SmallTrainConfig(1);
  cfg.lr_main = 0.0;
  EXPECT_THROW(RunTraining(bank, bank, cfg, TinyConfig(), AblationFlags::Full()), Error);
  AblationFlags bad;
  bad.use_pixel_branch = false;
  EXPECT_THROW(RunTraining(bank, bank, SmallTrainConfig(1), TinyConfig(), bad), Error);
}

}  // namespace
}  // namespace gel
