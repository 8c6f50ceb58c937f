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

#include "gel/pipeline.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gel/error.h"

namespace gel {

AblationFlags AblationFlags::Baseline() {
  AblationFlags f;
  f.use_energy_loss = false;
  f.use_pixel_branch = false;
  f.combine = CombineVariant::kGlobalOnly;
  return f;
}

AblationFlags AblationFlags::EnergyLoss() {
  AblationFlags f = Baseline();
  f.use_energy_loss = true;
  return f;
}

AblationFlags AblationFlags::PixelWise() {
  AblationFlags f;
  f.use_energy_loss = true;
  f.use_pixel_branch = true;
  f.combine = CombineVariant::kFixed;
  f.combine_score = false;
  return f;
}

AblationFlags AblationFlags::Full() { return AblationFlags(); }

AblationFlags AblationFlags::FromRowName(std::string_view row) {
  if (row == "baseline") return Baseline();
  if (row == "energy") return EnergyLoss();
  if (row == "pixel") return PixelWise();
  if (row == "full") return Full();
  throw Error(ErrorCode::kInvalidArgument, "unknown ablation row '" + std::string(row) +
                                               "' (expected baseline, energy, pixel or full)");
}

void AblationFlags::Validate() const {
  if (!use_pixel_branch && combine != CombineVariant::kGlobalOnly) {
    throw Error(ErrorCode::kInvalidArgument, "pixel branch disabled but combine strategy is '" +
                                                 std::string(CombineVariantName(combine)) + "'");
  }
}

namespace {

void CheckEpisode(const ModelParams& params, const Episode& ep) {
  if (ep.n_way < 1 || ep.support.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "episode has no support set");
  }
  const FeatureMap& ref = ep.support.front();
  if (ref.dim() != params.dim()) {
    throw Error(ErrorCode::kGeometryMismatch, "episode features have " + std::to_string(ref.dim()) +
                                                  " channels, model expects " +
                                                  std::to_string(params.dim()));
  }
  for (const auto* group : {&ep.support, &ep.known_queries, &ep.unknown_queries}) {
    for (const FeatureMap& f : *group) {
      if (!f.SameGeometry(ref)) {
        throw Error(ErrorCode::kGeometryMismatch, "episode mixes feature-map geometries");
      }
    }
  }
  if (ep.known_labels.size() != ep.known_queries.size() ||
      ep.support_labels.size() != ep.support.size()) {
    throw Error(ErrorCode::kInvalidArgument, "episode labels do not match samples");
  }
}

}  // namespace

ForwardResult ForwardEpisode(const ModelParams& params, const Episode& ep,
                             const ModelConfig& config, const AblationFlags& flags,
                             const ForwardOptions& options) {
  flags.Validate();
  if (params.combine.variant != flags.combine) {
    throw Error(ErrorCode::kInvalidArgument,
                "model carries combine strategy '" +
                    std::string(CombineVariantName(params.combine.variant)) +
                    "' but flags request '" + std::string(CombineVariantName(flags.combine)) + "'");
  }
  if (options.compute_grads && options.mode != Mode::kTrain) {
    throw Error(ErrorCode::kInvalidArgument, "gradients are only computed in train mode");
  }
  CheckEpisode(params, ep);

  const std::size_t n_way = static_cast<std::size_t>(ep.n_way);
  const std::size_t n_known = ep.known_queries.size();
  const std::size_t n_unknown = ep.unknown_queries.size();
  const std::size_t n_query = n_known + n_unknown;
  const std::size_t n_support = ep.support.size();
  const std::size_t dim = params.dim();
  const bool train = options.mode == Mode::kTrain;

  auto query = [&](std::size_t i) -> const FeatureMap& {
    return i < n_known ? ep.known_queries[i] : ep.unknown_queries[i - n_known];
  };

  ForwardResult r;
  r.min_kink_distance = std::numeric_limits<double>::infinity();

  // Class-wise branch.
  Matrix emb(n_query, dim);
  for (std::size_t i = 0; i < n_query; ++i) {
    const Vector e = AvgPool(query(i));
    std::copy(e.begin(), e.end(), emb.row(i).begin());
  }
  const Matrix protos = ComputePrototypes(ep.support, ep.support_labels, ep.n_way);
  const AttentionForward att = EnhancePrototypesForward(protos, params.attention);
  r.class_similarity = Matrix(n_query, n_way);
  for (std::size_t i = 0; i < n_query; ++i) {
    const Vector s = ClassSimilarity(emb.row(i), att.enhanced, flags.distance);
    std::copy(s.begin(), s.end(), r.class_similarity.row(i).begin());
  }

  // Pixel-wise branch over the whole episode batch.
  std::vector<FeatureMap> batch;
  std::vector<FeatureMap> class_maps;
  std::vector<std::vector<PixelMatch>> matches;
  std::vector<std::size_t> support_per_class(n_way, 0);
  if (flags.use_pixel_branch) {
    batch.reserve(n_support + n_query);
    batch.insert(batch.end(), ep.support.begin(), ep.support.end());
    batch.insert(batch.end(), ep.known_queries.begin(), ep.known_queries.end());
    batch.insert(batch.end(), ep.unknown_queries.begin(), ep.unknown_queries.end());
    r.calibration =
        CalibrateForward(batch, params.calibration, train ? BnMode::kTrain : BnMode::kEval);
    const CalibrationForward& cal = *r.calibration;

    std::vector<std::vector<FeatureMap>> per_class(n_way);
    for (std::size_t j = 0; j < n_support; ++j) {
      const auto n = static_cast<std::size_t>(ep.support_labels[j]);
      per_class[n].push_back(cal.output[j]);
      ++support_per_class[n];
    }
    for (const auto& maps : per_class) class_maps.push_back(ClassFeatureMap(maps));

    r.pixel_similarity = Matrix(n_query, n_way);
    matches.resize(n_query);
    for (std::size_t i = 0; i < n_query; ++i) {
      matches[i].reserve(n_way);
      for (std::size_t n = 0; n < n_way; ++n) {
        matches[i].push_back(
            PixelSimilarityDetailed(cal.output[n_support + i], class_maps[n], config.pixel));
        r.pixel_similarity(i, n) = matches[i].back().similarity;
        r.min_kink_distance = std::min(r.min_kink_distance, matches[i].back().min_tie_gap);
      }
    }
    for (const FeatureMap& z : cal.pre_activation) {
      for (double v : z.values()) r.min_kink_distance = std::min(r.min_kink_distance, std::abs(v));
    }
  }

  // Energies and open scores.
  r.coefficients = ResolveCoefficients(params.combine, att.enhanced);
  r.energies.resize(n_query);
  r.open_scores.resize(n_query);
  for (std::size_t i = 0; i < n_query; ++i) {
    EnergyBreakdown& e = r.energies[i];
    const auto s_c = r.class_similarity.row(i);
    e.e_global = GlobalEnergy(s_c);
    std::span<const double> s_f;
    if (flags.use_pixel_branch) {
      s_f = r.pixel_similarity.row(i);
      e.e_local = LocalEnergy(s_f);
    }
    e.e_total = Combine(e.e_global, e.e_local, s_c, s_f, params.combine, att.enhanced);
    r.open_scores[i] = flags.combine_score ? e.e_total : e.e_global;
  }

  r.known_probs = Matrix(n_known, n_way);
  for (std::size_t i = 0; i < n_known; ++i) {
    const Vector p = ClosedSetProbs(r.class_similarity.row(i));
    std::copy(p.begin(), p.end(), r.known_probs.row(i).begin());
  }

  if (!train) return r;

  // Losses.
  if (n_known == 0) throw Error(ErrorCode::kInvalidArgument, "training needs known queries");
  Losses losses;
  for (std::size_t i = 0; i < n_known; ++i) {
    const auto y = static_cast<std::size_t>(ep.known_labels[i]);
    // log p(y) = s_y - logsumexp(s), which stays finite on confident rows.
    const auto s = r.class_similarity.row(i);
    losses.closed_set -= (s[y] - LogSumExp(s)) / static_cast<double>(n_known);
  }
  std::vector<double> known_e(n_known), unknown_e(n_unknown);
  for (std::size_t i = 0; i < n_known; ++i) known_e[i] = r.energies[i].e_total;
  for (std::size_t i = 0; i < n_unknown; ++i) unknown_e[i] = r.energies[n_known + i].e_total;
  MarginLossResult margin;
  if (flags.use_energy_loss || n_unknown > 0) {
    margin = MarginEnergyLoss(known_e, unknown_e, config.margins, flags.hinge);
    losses.energy = margin.loss;
  }
  losses.total = TotalLoss(losses.closed_set, flags.use_energy_loss ? losses.energy : 0.0,
                           config.margins.lambda);
  if (!std::isfinite(losses.closed_set) || !std::isfinite(losses.energy) ||
      !std::isfinite(losses.total)) {
    throw Error(ErrorCode::kNonFinite,
                std::string("non-finite loss: ") + (!std::isfinite(losses.closed_set)
                                                        ? "closed-set cross entropy"
                                                        : "margin energy loss"));
  }
  r.losses = losses;

  if (options.trace_structure) {
    for (const auto& row : matches) {
      for (const PixelMatch& m : row) {
        for (const auto& sel : m.selected) {
          std::vector<std::size_t> sorted = sel;
          std::sort(sorted.begin(), sorted.end());
          for (std::size_t v : sorted) r.structure.push_back(static_cast<std::uint32_t>(v));
        }
      }
    }
    if (r.calibration) {
      for (const FeatureMap& z : r.calibration->pre_activation) {
        for (double v : z.values()) r.structure.push_back(v >= 0.0);
      }
    }
    if (flags.hinge == HingeKind::kLinear && flags.use_energy_loss) {
      for (double e : known_e) r.structure.push_back(e > config.margins.m_known);
      for (double e : unknown_e) r.structure.push_back(e < config.margins.m_unknown);
    }
  }

  if (!options.compute_grads) return r;

  // Backward.
  ModelParams g = ZeroGradLike(params);
  Matrix d_sc(n_query, n_way);
  Matrix d_sf(flags.use_pixel_branch ? n_query : 0, n_way);
  for (std::size_t i = 0; i < n_known; ++i) {
    const auto y = static_cast<std::size_t>(ep.known_labels[i]);
    for (std::size_t n = 0; n < n_way; ++n) {
      d_sc(i, n) = (r.known_probs(i, n) - (n == y ? 1.0 : 0.0)) / static_cast<double>(n_known);
    }
  }
  double d_alpha = 0.0, d_beta = 0.0;
  if (flags.use_energy_loss) {
    for (std::size_t i = 0; i < n_query; ++i) {
      const double d_energy =
          config.margins.lambda * (i < n_known ? margin.d_known[i] : margin.d_unknown[i - n_known]);
      if (d_energy == 0.0) continue;
      const EnergyBreakdown& e = r.energies[i];
      const CombinePartials part =
          CombineBackward(e.e_global, e.e_local, params.combine, r.coefficients);
      // dE_c/ds_c = -softmax(s_c), likewise for the local energy.
      const Vector soft_c = Softmax(r.class_similarity.row(i));
      for (std::size_t n = 0; n < n_way; ++n) {
        d_sc(i, n) -= d_energy * part.d_global * soft_c[n];
      }
      if (flags.use_pixel_branch && part.d_local != 0.0) {
        const Vector soft_f = Softmax(r.pixel_similarity.row(i));
        for (std::size_t n = 0; n < n_way; ++n) {
          d_sf(i, n) -= d_energy * part.d_local * soft_f[n];
        }
      }
      d_alpha += d_energy * part.d_alpha;
      d_beta += d_energy * part.d_beta;
    }
  }

  Matrix d_pstar(n_way, dim);
  for (std::size_t i = 0; i < n_query; ++i) {
    ClassSimilarityBackward(emb.row(i), att.enhanced, flags.distance, d_sc.row(i), d_pstar);
  }
  if (params.combine.variant == CombineVariant::kLearnable) {
    g.combine.alpha = d_alpha;
    g.combine.beta = d_beta;
  } else if (params.combine.variant == CombineVariant::kTaskAdaptive) {
    Vector mean(dim, 0.0);
    for (std::size_t n = 0; n < n_way; ++n) {
      for (std::size_t c = 0; c < dim; ++c)
        mean[c] += att.enhanced(n, c) / static_cast<double>(n_way);
    }
    for (std::size_t c = 0; c < dim; ++c) {
      g.combine.adaptor_weight(0, c) = d_alpha * mean[c];
      g.combine.adaptor_weight(1, c) = d_beta * mean[c];
    }
    g.combine.adaptor_bias = {d_alpha, d_beta};
    const Matrix& w = params.combine.adaptor_weight;
    for (std::size_t n = 0; n < n_way; ++n) {
      for (std::size_t c = 0; c < dim; ++c) {
        d_pstar(n, c) += (d_alpha * w(0, c) + d_beta * w(1, c)) / static_cast<double>(n_way);
      }
    }
  }
  g.attention = EnhancePrototypesBackward(protos, att, d_pstar);

  if (flags.use_pixel_branch) {
    const CalibrationForward& cal = *r.calibration;
    const std::size_t half = params.calibration.out_channels();
    const std::size_t m = ep.support.front().m();
    std::vector<FeatureMap> d_out(batch.size(), FeatureMap(m, half));
    std::vector<FeatureMap> d_class(n_way, FeatureMap(m, half));
    for (std::size_t i = 0; i < n_query; ++i) {
      for (std::size_t n = 0; n < n_way; ++n) {
        PixelSimilarityBackward(cal.output[n_support + i], class_maps[n], config.pixel,
                                matches[i][n], d_sf(i, n), d_out[n_support + i], d_class[n]);
      }
    }
    for (std::size_t j = 0; j < n_support; ++j) {
      const auto n = static_cast<std::size_t>(ep.support_labels[j]);
      const double inv = 1.0 / static_cast<double>(support_per_class[n]);
      auto dst = d_out[j].values();
      const auto src = d_class[n].values();
      for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += src[t] * inv;
    }
    CalibrationGrads cg = CalibrateBackward(batch, params.calibration, cal, d_out);
    g.calibration.conv_weight = std::move(cg.conv_weight);
    g.calibration.conv_bias = std::move(cg.conv_bias);
    g.calibration.bn_gamma = std::move(cg.bn_gamma);
    g.calibration.bn_beta = std::move(cg.bn_beta);
    g.calibration.prelu_slope = cg.prelu_slope;
  }
  r.grads = std::move(g);
  return r;
}

ScoredEpisode ScoreQueries(const ModelParams& params, const Episode& episode,
                           const ModelConfig& config, const AblationFlags& flags) {
  const ForwardResult fwd = ForwardEpisode(params, episode, config, flags, {Mode::kEval});
  ScoredEpisode out;
  const std::size_t n_known = episode.known_queries.size();
  out.scores.known.assign(fwd.open_scores.begin(),
                          fwd.open_scores.begin() + static_cast<std::ptrdiff_t>(n_known));
  out.scores.unknown.assign(fwd.open_scores.begin() + static_cast<std::ptrdiff_t>(n_known),
                            fwd.open_scores.end());
  out.truth = episode.known_labels;
  out.predicted.reserve(n_known);
  for (std::size_t i = 0; i < n_known; ++i) {
    const auto row = fwd.known_probs.row(i);
    out.predicted.push_back(
        static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

std::vector<Episode> SampleEpisodes(const Bank& bank, int n_way, int k_shot, int q_query,
                                    std::size_t count, std::uint64_t seed) {
  const Rng base(seed);
  std::vector<Episode> episodes;
  episodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = base.Fork(i);
    episodes.push_back(SampleEpisode(bank, n_way, k_shot, q_query, rng));
  }
  return episodes;
}

std::vector<ScoredEpisode> ScoreEpisodes(const ModelParams& params,
                                         const std::vector<Episode>& episodes,
                                         const ModelConfig& config, const AblationFlags& flags) {
  std::vector<ScoredEpisode> out;
  out.reserve(episodes.size());
  for (const Episode& ep : episodes) out.push_back(ScoreQueries(params, ep, config, flags));
  return out;
}

std::vector<EpisodeResult> EvaluateScored(const std::vector<ScoredEpisode>& scored,
                                          std::optional<std::size_t> iou_bins) {
  std::vector<EpisodeResult> out;
  out.reserve(scored.size());
  for (const ScoredEpisode& s : scored) {
    out.push_back(EvaluateEpisode(s.scores, s.predicted, s.truth, iou_bins));
  }
  return out;
}

}  // namespace gel
