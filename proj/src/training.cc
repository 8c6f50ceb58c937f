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

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.h"
#include "gel/error.h"

namespace gel {

double LearningRate(const TrainConfig& cfg, int task) {
  if (cfg.schedule.period <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "learning-rate period must be positive");
  }
  return cfg.lr_main * std::pow(cfg.schedule.decay_factor, task / cfg.schedule.period);
}

LossReport TrainStep(ModelParams& params, const Episode& episode, const ModelConfig& config,
                     const AblationFlags& flags, double lr) {
  ForwardResult fwd =
      ForwardEpisode(params, episode, config, flags, {Mode::kTrain, /*compute_grads=*/true});
  ModelParams& grads = *fwd.grads;
  std::vector<ParamGroup> theta = TrainableGroups(params);
  std::vector<ParamGroup> delta = TrainableGroups(grads);
  for (std::size_t g = 0; g < theta.size(); ++g) {
    if (!AllFinite(delta[g].values)) {
      throw Error(ErrorCode::kNonFinite, "gradient of " + theta[g].name + " is not finite");
    }
    for (std::size_t i = 0; i < theta[g].values.size(); ++i) {
      theta[g].values[i] -= lr * delta[g].values[i];
    }
    if (!AllFinite(theta[g].values)) {
      throw Error(ErrorCode::kNonFinite, "parameter " + theta[g].name + " became non-finite");
    }
  }
  if (fwd.calibration) UpdateRunningStats(params.calibration, *fwd.calibration);
  const Losses& l = *fwd.losses;
  return {l.closed_set, l.energy, l.total};
}

GradCheckReport GradCheck(const ModelParams& params, const Episode& episode,
                          const ModelConfig& config, const AblationFlags& flags, double h) {
  const ForwardOptions traced{Mode::kTrain, /*compute_grads=*/false, /*trace_structure=*/true};
  ForwardResult base =
      ForwardEpisode(params, episode, config, flags, {Mode::kTrain, /*compute_grads=*/true, true});
  GradCheckReport report;
  report.loss = base.losses->total;
  report.min_kink_distance = base.min_kink_distance;
  // Rounding in the difference quotient grows with the loss magnitude.
  const double floor = kGradCheckFloor * std::max(1.0, std::abs(report.loss));

  ModelParams probe = params;
  std::vector<ParamGroup> probe_groups = TrainableGroups(probe);
  std::vector<ParamGroup> grad_groups = TrainableGroups(*base.grads);

  for (std::size_t g = 0; g < probe_groups.size(); ++g) {
    GradCheckGroup row;
    row.name = probe_groups[g].name;
    for (std::size_t i = 0; i < probe_groups[g].values.size(); ++i) {
      double& x = probe_groups[g].values[i];
      const double saved = x;
      x = saved + h;
      const ForwardResult plus = ForwardEpisode(probe, episode, config, flags, traced);
      x = saved - h;
      const ForwardResult minus = ForwardEpisode(probe, episode, config, flags, traced);
      x = saved;
      if (plus.structure != base.structure || minus.structure != base.structure) {
        ++row.skipped;
        continue;
      }
      const double numeric = (plus.losses->total - minus.losses->total) / (2.0 * h);
      const double analytic = grad_groups[g].values[i];
      const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
      row.max_rel_error = std::max(row.max_rel_error, std::abs(analytic - numeric) / scale);
      row.max_abs_grad = std::max(row.max_abs_grad, std::abs(analytic));
      ++row.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, row.max_rel_error);
    report.groups.push_back(std::move(row));
  }
  return report;
}

namespace {

void PutValues(std::ostream& out, std::span<const double> v) {
  for (double x : v) internal::PutF64(out, x);
}

void GetValues(internal::LeReader& r, std::span<double> v, const char* what) {
  for (double& x : v) x = r.F64(what);
}

std::uint32_t FlagBits(const AblationFlags& f) {
  return (f.use_energy_loss ? 1u : 0u) | (f.use_pixel_branch ? 2u : 0u) |
         (f.combine_score ? 4u : 0u);
}

}  // namespace

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  const ModelParams& p = ckpt.params;
  const std::size_t dim = p.dim();
  if (dim != ckpt.geometry.dim) {
    throw Error(ErrorCode::kGeometryMismatch, "checkpoint geometry disagrees with its parameters");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.write("GELC", 4);
  internal::PutU32(out, kCheckpointFormatVersion);
  const Geometry& g = ckpt.geometry;
  for (std::uint32_t v : {g.dim, g.m, g.n_way, g.k_shot, g.q_query, g.k_top}) {
    internal::PutU32(out, v);
  }
  internal::PutF64(out, g.temperature);
  internal::PutU32(out, static_cast<std::uint32_t>(ckpt.flags.combine));
  internal::PutU32(out, static_cast<std::uint32_t>(ckpt.flags.distance));
  internal::PutU32(out, static_cast<std::uint32_t>(ckpt.flags.hinge));
  internal::PutU32(out, FlagBits(ckpt.flags));
  internal::PutF64(out, ckpt.config.margins.m_known);
  internal::PutF64(out, ckpt.config.margins.m_unknown);
  internal::PutF64(out, ckpt.config.margins.lambda);
  internal::PutU64(out, ckpt.step);
  internal::PutU64(out, ckpt.rng_state);

  PutValues(out, p.attention.w_q.values());
  PutValues(out, p.attention.w_k.values());
  PutValues(out, p.attention.w_v.values());
  const CalibrationParams& c = p.calibration;
  PutValues(out, c.conv_weight.values());
  PutValues(out, c.conv_bias);
  PutValues(out, c.bn_gamma);
  PutValues(out, c.bn_beta);
  PutValues(out, c.bn_running_mean);
  PutValues(out, c.bn_running_var);
  internal::PutF64(out, c.bn_eps);
  internal::PutF64(out, c.bn_momentum);
  internal::PutF64(out, c.prelu_slope);
  internal::PutF64(out, p.combine.alpha);
  internal::PutF64(out, p.combine.beta);
  // Adaptor block is always present; only task-adaptive models read it back.
  Matrix adaptor =
      p.combine.adaptor_weight.size() == 2 * dim ? p.combine.adaptor_weight : Matrix(2, dim);
  Vector bias = p.combine.adaptor_bias.size() == 2 ? p.combine.adaptor_bias : Vector{1.0, 1.0};
  PutValues(out, adaptor.values());
  PutValues(out, bias);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  internal::LeReader r(in, path);
  r.ExpectMagic("GELC");
  const std::uint32_t version = r.U32("version");
  if (version != kCheckpointFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch, path + ": GELC version " + std::to_string(version) +
                                                 ", this build reads version " +
                                                 std::to_string(kCheckpointFormatVersion));
  }
  Checkpoint ckpt;
  Geometry& g = ckpt.geometry;
  for (std::uint32_t* v : {&g.dim, &g.m, &g.n_way, &g.k_shot, &g.q_query, &g.k_top}) {
    *v = r.U32("geometry");
  }
  g.temperature = r.F64("temperature");
  if (g.dim == 0 || g.dim % 2 != 0 || g.dim > (1u << 16)) {
    throw Error(ErrorCode::kGeometryMismatch,
                path + ": implausible channel count " + std::to_string(g.dim));
  }
  const std::uint32_t combine = r.U32("combine variant");
  const std::uint32_t distance = r.U32("distance kind");
  const std::uint32_t hinge = r.U32("hinge kind");
  const std::uint32_t bits = r.U32("flags");
  if (combine > static_cast<std::uint32_t>(CombineVariant::kDelay) || distance > 1 || hinge > 1) {
    throw Error(ErrorCode::kInvalidArgument, path + ": unknown enum value in header");
  }
  ckpt.flags.combine = static_cast<CombineVariant>(combine);
  ckpt.flags.distance = static_cast<DistanceKind>(distance);
  ckpt.flags.hinge = static_cast<HingeKind>(hinge);
  ckpt.flags.use_energy_loss = bits & 1u;
  ckpt.flags.use_pixel_branch = bits & 2u;
  ckpt.flags.combine_score = bits & 4u;
  ckpt.config.pixel = {g.k_top, g.temperature};
  ckpt.config.margins.m_known = r.F64("margins");
  ckpt.config.margins.m_unknown = r.F64("margins");
  ckpt.config.margins.lambda = r.F64("lambda");
  ckpt.step = r.U64("step");
  ckpt.rng_state = r.U64("rng state");

  const std::size_t dim = g.dim;
  const std::size_t half = dim / 2;
  ModelParams& p = ckpt.params;
  p.attention = AttentionParams::Zeros(dim);
  GetValues(r, p.attention.w_q.values(), "attention");
  GetValues(r, p.attention.w_k.values(), "attention");
  GetValues(r, p.attention.w_v.values(), "attention");
  CalibrationParams& c = p.calibration;
  c.conv_weight = Matrix(half, dim);
  for (Vector* v : {&c.conv_bias, &c.bn_gamma, &c.bn_beta, &c.bn_running_mean, &c.bn_running_var}) {
    v->assign(half, 0.0);
  }
  GetValues(r, c.conv_weight.values(), "calibration");
  GetValues(r, c.conv_bias, "calibration");
  GetValues(r, c.bn_gamma, "calibration");
  GetValues(r, c.bn_beta, "calibration");
  GetValues(r, c.bn_running_mean, "calibration");
  GetValues(r, c.bn_running_var, "calibration");
  c.bn_eps = r.F64("calibration");
  c.bn_momentum = r.F64("calibration");
  c.prelu_slope = r.F64("calibration");
  p.combine.variant = ckpt.flags.combine;
  p.combine.alpha = r.F64("combine");
  p.combine.beta = r.F64("combine");
  Matrix adaptor(2, dim);
  Vector bias(2);
  GetValues(r, adaptor.values(), "combine adaptor");
  GetValues(r, bias, "combine adaptor");
  if (p.combine.variant == CombineVariant::kTaskAdaptive) {
    p.combine.adaptor_weight = std::move(adaptor);
    p.combine.adaptor_bias = std::move(bias);
  }
  if (!r.AtEnd()) {
    throw Error(ErrorCode::kInvalidArgument, path + ": trailing bytes after checkpoint payload");
  }
  if (!AllTrainableFinite(p)) {
    throw Error(ErrorCode::kNonFinite, path + ": checkpoint holds non-finite parameters");
  }
  return ckpt;
}

void CheckGeometry(const Checkpoint& ckpt, std::size_t m, std::size_t dim) {
  if (ckpt.geometry.dim != dim || ckpt.geometry.m != m) {
    throw Error(ErrorCode::kGeometryMismatch,
                "checkpoint expects m=" + std::to_string(ckpt.geometry.m) +
                    " dim=" + std::to_string(ckpt.geometry.dim) +
                    ", data has m=" + std::to_string(m) + " dim=" + std::to_string(dim));
  }
}

namespace {

double MeanValidationAuroc(const ModelParams& params, const std::vector<Episode>& episodes,
                           const ModelConfig& config, const AblationFlags& flags,
                           double* mean_acc) {
  const std::vector<EpisodeResult> results =
      EvaluateScored(ScoreEpisodes(params, episodes, config, flags), std::nullopt);
  double auroc = 0.0, acc = 0.0;
  for (const EpisodeResult& r : results) {
    auroc += r.auroc;
    acc += r.acc;
  }
  const double n = static_cast<double>(std::max<std::size_t>(results.size(), 1));
  *mean_acc = acc / n;
  return auroc / n;
}

}  // namespace

TrainResult RunTraining(const Bank& train, const Bank& validation, const TrainConfig& cfg,
                        const ModelConfig& config, const AblationFlags& flags) {
  flags.Validate();
  if (cfg.lr_main <= 0.0) throw Error(ErrorCode::kInvalidArgument, "lr_main must be positive");
  if (cfg.eval_every <= 0) throw Error(ErrorCode::kInvalidArgument, "eval_every must be positive");
  const auto [m, dim] = BankGeometry(train);
  if (dim == 0) throw Error(ErrorCode::kInsufficientData, "training bank holds no samples");

  const Rng master(cfg.seed);
  Rng init_rng = master.Fork(1);
  Rng task_rng = master.Fork(2);
  const std::uint64_t val_seed = Mix64(cfg.seed ^ 0x76616C6964617465ULL);

  Checkpoint current;
  current.geometry = {static_cast<std::uint32_t>(dim),
                      static_cast<std::uint32_t>(m),
                      static_cast<std::uint32_t>(cfg.n_way),
                      static_cast<std::uint32_t>(cfg.k_shot),
                      static_cast<std::uint32_t>(cfg.q_query),
                      static_cast<std::uint32_t>(config.pixel.k_top),
                      config.pixel.temperature};
  current.config = config;
  current.flags = flags;
  current.params = ModelParams::Init(dim, flags.combine, init_rng);
  current.rng_state = task_rng.state();

  const std::vector<Episode> val_episodes =
      SampleEpisodes(validation, cfg.n_way, cfg.k_shot, cfg.q_query,
                     static_cast<std::size_t>(cfg.val_episodes), val_seed);

  TrainResult result;
  double best_auroc = -1.0;
  auto evaluate = [&](int task, const LossReport& mean_loss) {
    HistoryEntry h;
    h.task = task;
    h.lr = LearningRate(cfg, task);
    h.train = mean_loss;
    if (!val_episodes.empty()) {
      h.val_auroc = MeanValidationAuroc(current.params, val_episodes, config, flags, &h.val_acc);
    }
    result.history.push_back(h);
    if (h.val_auroc > best_auroc) {
      best_auroc = h.val_auroc;
      result.best = current;
    }
  };

  evaluate(0, {});
  LossReport window;
  int window_tasks = 0;
  for (int task = 0; task < cfg.total_tasks; ++task) {
    const Episode ep = SampleEpisode(train, cfg.n_way, cfg.k_shot, cfg.q_query, task_rng);
    LossReport loss;
    try {
      loss = TrainStep(current.params, ep, config, flags, LearningRate(cfg, task));
    } catch (const Error& e) {
      throw Error(e.code(), "task " + std::to_string(task) + ": " + e.what());
    }
    result.task_losses.push_back(loss);
    window.closed_set += loss.closed_set;
    window.energy += loss.energy;
    window.total += loss.total;
    ++window_tasks;
    current.step = static_cast<std::uint64_t>(task) + 1;
    current.rng_state = task_rng.state();
    if ((task + 1) % cfg.eval_every == 0 || task + 1 == cfg.total_tasks) {
      const double n = static_cast<double>(window_tasks);
      evaluate(task + 1, {window.closed_set / n, window.energy / n, window.total / n});
      window = {};
      window_tasks = 0;
    }
  }
  result.last = current;
  return result;
}

}  // namespace gel
