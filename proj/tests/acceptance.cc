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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gel/episode.h"
#include "gel/metrics.h"
#include "gel/pipeline.h"
#include "gel/training.h"
#include "test_util.h"

namespace gel {
namespace {

using ::gel::testing::CountingF1;
using ::gel::testing::PairAuroc;
using ::gel::testing::RandomMap;
using ::gel::testing::RandomMatrix;
using ::gel::testing::RandomScoreSet;
using ::gel::testing::RandomVector;
using ::gel::testing::SweepAupr;
using ::gel::testing::SweepFpr95;

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void Require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void Report(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto start = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  std::printf("%s  %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(),
              o.detail.str().c_str(), Seconds(start));
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

double MeanAuroc(const std::vector<ScoredEpisode>& scored) {
  double sum = 0.0;
  for (const ScoredEpisode& s : scored) sum += Auroc(s.scores);
  return sum / static_cast<double>(scored.size());
}

void GradientSuite(Outcome& o) {
  const auto start = Clock::now();
  ModelConfig config;
  config.pixel = PixelSimilarityConfig::WithTopK(2);
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (CombineVariant v :
       {CombineVariant::kFixed, CombineVariant::kLearnable, CombineVariant::kTaskAdaptive,
        CombineVariant::kGlobalOnly, CombineVariant::kDelay}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      Rng rng(1000 + seed);
      SyntheticSpec spec;
      spec.n_classes = 6;
      spec.samples_per_class = 4;
      spec.m = 2;
      spec.dim = 8;
      const Bank bank = GenerateSynthetic(spec, rng);
      const Episode ep = SampleEpisode(bank, 3, 2, 2, rng);
      const ModelParams params = ModelParams::Init(8, v, rng);
      AblationFlags flags;
      flags.combine = v;
      flags.use_pixel_branch = v != CombineVariant::kGlobalOnly;
      const GradCheckReport r = GradCheck(params, ep, config, flags, 1e-5);
      worst = std::max(worst, r.max_rel_error);
      for (const GradCheckGroup& g : r.groups) {
        checked += g.checked;
        skipped += g.skipped;
      }
    }
  }
  const double elapsed = Seconds(start);
  o.detail << "max rel err " << worst << " over " << checked << " scalars (" << skipped
           << " kink-skipped), 5 strategies x 4 seeds";
  o.Require(worst <= 1e-4, "relative error <= 1e-4");
  o.Require(skipped * 10 < checked, "kink exclusions under 10%");
  o.Require(elapsed < 30.0, "runtime < 30 s");
}

void MetricOracles(Outcome& o) {
  const auto start = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  std::size_t tie_heavy = 0;
  for (int i = 0; i < 1000; ++i) {
    const ScoreSet s = RandomScoreSet(rng, 200);
    std::vector<double> all = s.known;
    all.insert(all.end(), s.unknown.begin(), s.unknown.end());
    std::sort(all.begin(), all.end());
    tie_heavy +=
        std::unique(all.begin(), all.end()) - all.begin() < static_cast<long>(all.size()) / 2;
    worst =
        std::max({worst, std::abs(Auroc(s) - PairAuroc(s)), std::abs(Aupr(s) - SweepAupr(s)),
                  std::abs(FprAtTpr95(s) - SweepFpr95(s)), std::abs(F1TopQ(s) - CountingF1(s))});
  }
  const double elapsed = Seconds(start);
  o.detail << "1000 sets (" << tie_heavy << " tie-heavy), max |diff| " << worst;
  o.Require(worst <= 1e-10, "agreement <= 1e-10");
  o.Require(tie_heavy >= 100, "heavy-tie coverage");
  o.Require(elapsed < 60.0, "runtime < 60 s");
}

void HandChecks(Outcome& o) {
  const double lse = LogSumExp(std::vector<double>{0.0, 0.0});
  const double energy = GlobalEnergy(Vector(5, 0.0));
  const double margin =
      MarginEnergyLoss(std::vector<double>{0.0}, std::vector<double>{0.0}, MarginConfig{}).loss;
  const double auroc = Auroc({{1, 3}, {2, 4}});
  o.detail << "lse " << lse << ", E " << energy << ", margin " << margin << ", auroc " << auroc;
  o.Require(std::abs(lse - std::log(2.0)) <= 1e-15, "logsumexp([0,0]) = ln 2");
  o.Require(std::abs(energy + std::log(5.0)) <= 1e-12, "global energy = -ln 5");
  o.Require(margin == 2.0, "margin loss = 2");
  o.Require(auroc == 0.75, "auroc = 0.75");
}

struct EfficacyRun {
  std::vector<Episode> test;
  ModelParams initial;
  TrainResult full;
  TrainResult global_only;
  ModelConfig config;
};

EfficacyRun& Efficacy() {
  static EfficacyRun run = [] {
    EfficacyRun r;
    SyntheticSpec spec;
    spec.n_classes = 60;
    spec.samples_per_class = 20;
    spec.m = 3;
    spec.dim = 16;
    spec.cluster_separation = 4.0;
    spec.local_patch = true;
    Rng rng(7);
    const Bank bank = GenerateSynthetic(spec, rng);
    const BankSplit split = SplitBank(bank, 40, 10);
    TrainConfig cfg;
    cfg.total_tasks = 2000;
    cfg.eval_every = 500;
    cfg.val_episodes = 50;
    cfg.seed = 1;
    r.config.margins.lambda = 0.1;
    r.test = SampleEpisodes(split.test, 5, 1, 15, 200, 4242);
    r.full = RunTraining(split.train, split.validation, cfg, r.config, AblationFlags::Full());
    Rng init = Rng(cfg.seed).Fork(1);
    r.initial = ModelParams::Init(16, CombineVariant::kFixed, init);
    r.global_only =
        RunTraining(split.train, split.validation, cfg, r.config, AblationFlags::EnergyLoss());
    return r;
  }();
  return run;
}

void TrainingEfficacy(Outcome& o) {
  const auto start = Clock::now();
  EfficacyRun& r = Efficacy();
  const AblationFlags flags = AblationFlags::Full();
  const auto before = ScoreEpisodes(r.initial, r.test, r.config, flags);
  const auto after = ScoreEpisodes(r.full.last.params, r.test, r.config, flags);
  const double auroc0 = MeanAuroc(before), auroc1 = MeanAuroc(after);
  double known = 0.0, unknown = 0.0;
  std::size_t nk = 0, nu = 0;
  for (const ScoredEpisode& s : after) {
    for (double e : s.scores.known) known += e, ++nk;
    for (double e : s.scores.unknown) unknown += e, ++nu;
  }
  const double gap = unknown / static_cast<double>(nu) - known / static_cast<double>(nk);
  double first = 0.0, last = 0.0;
  const auto& losses = r.full.task_losses;
  for (std::size_t i = 0; i < 100; ++i) {
    first += losses[i].energy / 100.0;
    last += losses[losses.size() - 1 - i].energy / 100.0;
  }
  o.detail << "test AUROC " << 100 * auroc0 << " -> " << 100 * auroc1 << " (+"
           << 100 * (auroc1 - auroc0) << " pts); E_unknown - E_known " << gap << "; margin loss "
           << first << " -> " << last;
  o.Require(auroc1 - auroc0 >= 0.10, "(a) AUROC gain >= 10 points");
  o.Require(gap > 0.0, "(b) unknown energy above known");
  o.Require(last < first, "(c) margin loss decreases");
  // Both training runs share this budget with the pixel-branch criterion.
  o.Require(Seconds(start) < 300.0, "runtime < 5 min");
}

void PixelBranchValue(Outcome& o) {
  EfficacyRun& r = Efficacy();
  const double full =
      MeanAuroc(ScoreEpisodes(r.full.last.params, r.test, r.config, AblationFlags::Full()));
  const double global = MeanAuroc(
      ScoreEpisodes(r.global_only.last.params, r.test, r.config, AblationFlags::EnergyLoss()));
  o.detail << "full " << 100 * full << " vs global-only " << 100 * global << " AUROC (margin "
           << 100 * (full - global) << " pts, 200 episodes)";
  o.Require(full >= global, "full >= global-only");
}

void InvariantSuite(Outcome& o) {
  Rng rng(99);
  int cases = 0;
  auto check = [&](bool ok, const char* what) {
    ++cases;
    if (!ok) o.Require(false, what);
  };
  for (int i = 0; i < 100; ++i) {
    const Matrix m = SoftmaxRows(RandomMatrix(3, 1 + rng.UniformInt(8), rng, 300.0));
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double s = 0.0;
      for (double v : m.row(r)) s += v;
      check(std::abs(s - 1.0) <= 1e-12, "softmax normalization");
    }
    Vector v = RandomVector(1 + rng.UniformInt(8), rng, 10.0);
    const double base = LogSumExp(v), c = 50.0 * rng.Normal();
    for (double& x : v) x += c;
    check(std::abs(LogSumExp(v) - base - c) <= 1e-10, "logsumexp shift invariance");
    const Vector a = RandomVector(6, rng), b = RandomVector(6, rng);
    Vector sa = a, sb = b;
    const double la = std::exp(rng.Normal()), lb = std::exp(rng.Normal());
    for (double& x : sa) x *= la;
    for (double& x : sb) x *= lb;
    check(std::abs(Cosine(a, b) - Cosine(sb, sa)) <= 1e-12, "cosine symmetry/scale invariance");
    const ScoreSet s = RandomScoreSet(rng, 120);
    ScoreSet t = s;
    for (double& x : t.known) x = std::exp(0.3 * x) + x;
    for (double& x : t.unknown) x = std::exp(0.3 * x) + x;
    check(Auroc(s) == Auroc(t) && Aupr(s) == Aupr(t) && FprAtTpr95(s) == FprAtTpr95(t) &&
              F1TopQ(s) == F1TopQ(t),
          "rank-metric monotone invariance");
  }

  ModelConfig config;
  config.pixel = PixelSimilarityConfig::WithTopK(2);
  SyntheticSpec spec;
  spec.n_classes = 10;
  spec.samples_per_class = 6;
  spec.m = 2;
  spec.dim = 8;
  const Bank bank = GenerateSynthetic(spec, rng);
  for (int i = 0; i < 100; ++i) {
    const Episode ep = SampleEpisode(bank, 4, 1, 2, rng);
    const ModelParams params = ModelParams::Init(8, CombineVariant::kFixed, rng);
    // Class permutation.
    const std::vector<std::size_t> perm = rng.SampleWithoutReplacement(4, 4);
    Episode permuted = ep;
    std::vector<int> inverse(4);
    for (std::size_t n = 0; n < 4; ++n) {
      permuted.support[n] = ep.support[perm[n]];
      inverse[perm[n]] = static_cast<int>(n);
    }
    for (int& y : permuted.known_labels) y = inverse[static_cast<std::size_t>(y)];
    const ForwardResult fa = ForwardEpisode(params, ep, config, AblationFlags::Full(), {});
    const ForwardResult fb = ForwardEpisode(params, permuted, config, AblationFlags::Full(), {});
    bool equivariant = true;
    for (std::size_t q = 0; q < fa.known_probs.rows(); ++q) {
      for (std::size_t n = 0; n < 4; ++n) {
        equivariant &= std::abs(fb.known_probs(q, n) - fa.known_probs(q, perm[n])) <= 1e-10;
      }
    }
    const ScoredEpisode sa = ScoreQueries(params, ep, config, AblationFlags::Full());
    const ScoredEpisode sb = ScoreQueries(params, permuted, config, AblationFlags::Full());
    equivariant &= Accuracy(sa.predicted, sa.truth) == Accuracy(sb.predicted, sb.truth);
    equivariant &= std::abs(Auroc(sa.scores) - Auroc(sb.scores)) <= 1e-12;
    check(equivariant, "class-permutation equivariance");
    // Pixel-branch parameters cannot reach a global-only model.
    ModelParams g = ModelParams::Init(8, CombineVariant::kGlobalOnly, rng);
    ModelParams h = g;
    h.calibration = CalibrationParams::Init(8, rng);
    h.calibration.prelu_slope = rng.Uniform();
    const ForwardResult ga =
        ForwardEpisode(g, ep, config, AblationFlags::EnergyLoss(), {Mode::kTrain, true});
    const ForwardResult gb =
        ForwardEpisode(h, ep, config, AblationFlags::EnergyLoss(), {Mode::kTrain, true});
    check(ga.open_scores == gb.open_scores && ga.losses->total == gb.losses->total &&
              ga.grads->attention == gb.grads->attention,
          "ablation-flag isolation");
    // Checkpoint round trip.
    Checkpoint ckpt;
    ckpt.geometry = {8, 2, 4, 1, 2, 2, 2.0};
    ckpt.config = config;
    ckpt.flags.combine = static_cast<CombineVariant>(i % 5);
    ckpt.flags.use_pixel_branch = ckpt.flags.combine != CombineVariant::kGlobalOnly;
    ckpt.params = ModelParams::Init(8, ckpt.flags.combine, rng);
    for (ParamGroup& grp : TrainableGroups(ckpt.params)) {
      for (double& x : grp.values) x = rng.Normal();
    }
    ckpt.step = static_cast<std::uint64_t>(i);
    ckpt.rng_state = rng.NextU64();
    const std::string path = "/tmp/gel_acceptance_roundtrip.gelc";
    SaveCheckpoint(ckpt, path);
    const Checkpoint back = LoadCheckpoint(path);
    check(back.params == ckpt.params && back.flags == ckpt.flags &&
              back.geometry == ckpt.geometry && back.rng_state == ckpt.rng_state,
          "checkpoint round-trip bit-equality");
  }
  std::remove("/tmp/gel_acceptance_roundtrip.gelc");

  const BankSplit split = SplitBank(bank, 6, 4);
  for (int i = 0; i < 100; ++i) {
    TrainConfig cfg;
    cfg.n_way = 2;
    cfg.q_query = 2;
    cfg.total_tasks = 6;
    cfg.eval_every = 3;
    cfg.val_episodes = 2;
    cfg.seed = static_cast<std::uint64_t>(i);
    const TrainResult a = RunTraining(split.train, split.validation, cfg, config, {});
    const TrainResult b = RunTraining(split.train, split.validation, cfg, config, {});
    bool same = a.last.params == b.last.params && a.history.size() == b.history.size();
    for (std::size_t h = 0; same && h < a.history.size(); ++h) {
      same = a.history[h].val_auroc == b.history[h].val_auroc &&
             a.history[h].train.total == b.history[h].train.total;
    }
    check(same, "full-run determinism");
  }
  o.detail << cases << " property cases across 8 families";
}

void ProtocolConformance(Outcome& o) {
  SyntheticSpec spec;
  spec.n_classes = 10;
  Rng rng(5);
  const Bank bank = GenerateSynthetic(spec, rng);
  const Episode ep = SampleEpisode(bank, 5, 1, 15, rng);
  o.detail << ep.support.size() << " support / " << ep.known_queries.size() << " known / "
           << ep.unknown_queries.size() << " unknown";
  o.Require(
      ep.support.size() == 5 && ep.known_queries.size() == 75 && ep.unknown_queries.size() == 75,
      "5 / 75 / 75 samples");
  // Ascending scores with the 75 unknowns interleaved: the top-75 cutoff
  // must be what decides F1.
  ScoreSet s;
  for (int i = 0; i < 75; ++i) {
    s.known.push_back(2.0 * i);
    s.unknown.push_back(2.0 * i + 1.0);
  }
  // Top 75 of 150 interleaved scores: ranks 0..74 hold 38 unknowns.
  const double want = 38.0 / 75.0;
  o.detail << "; f1 " << F1TopQ(s) << " (cutoff-75 value " << want << ")";
  o.Require(std::abs(F1TopQ(s) - want) <= 1e-15, "f1 cutoff 75");
}

}  // namespace
}  // namespace gel

int main() {
  using namespace gel;
  Report("gradient suite", GradientSuite);
  Report("metric oracles", MetricOracles);
  Report("hand-check values", HandChecks);
  Report("training efficacy", TrainingEfficacy);
  Report("pixel-branch value", PixelBranchValue);
  Report("invariant suite", InvariantSuite);
  Report("protocol conformance", ProtocolConformance);
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
