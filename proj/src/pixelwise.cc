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

#include "gel/pixelwise.h"

#include <cmath>
#include <limits>
#include <string>

#include "gel/error.h"

namespace gel {

CalibrationParams CalibrationParams::Init(std::size_t dim, Rng& rng) {
  if (dim == 0 || dim % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "scale calibration needs an even channel count, got " + std::to_string(dim));
  }
  const std::size_t half = dim / 2;
  CalibrationParams p;
  p.conv_weight = Matrix(half, dim);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& w : p.conv_weight.values()) w = stddev * rng.Normal();
  p.conv_bias.assign(half, 0.0);
  p.bn_gamma.assign(half, 1.0);
  p.bn_beta.assign(half, 0.0);
  p.bn_running_mean.assign(half, 0.0);
  p.bn_running_var.assign(half, 1.0);
  return p;
}

CalibrationForward CalibrateForward(std::span<const FeatureMap> batch,
                                    const CalibrationParams& params, BnMode mode) {
  const std::size_t in = params.in_channels();
  const std::size_t out = params.out_channels();
  CalibrationForward f;
  f.mode = mode;
  for (const FeatureMap& x : batch) {
    if (x.dim() != in) {
      throw Error(ErrorCode::kDimensionMismatch, "calibration expects " + std::to_string(in) +
                                                     " channels, got " + std::to_string(x.dim()));
    }
    f.count += x.pixels();
  }

  f.conv_out.reserve(batch.size());
  for (const FeatureMap& x : batch) {
    FeatureMap y(x.m(), out);
    for (std::size_t p = 0; p < x.pixels(); ++p) {
      const auto xp = x.pixel(p);
      auto yp = y.pixel(p);
      for (std::size_t o = 0; o < out; ++o) {
        yp[o] = params.conv_bias[o] + Dot(params.conv_weight.row(o), xp);
      }
    }
    f.conv_out.push_back(std::move(y));
  }

  if (mode == BnMode::kTrain) {
    if (f.count < 2) {
      throw Error(ErrorCode::kInsufficientData, "train-mode batch normalization needs >= 2 pixels");
    }
    f.mean.assign(out, 0.0);
    f.var.assign(out, 0.0);
    for (const FeatureMap& y : f.conv_out) {
      for (std::size_t p = 0; p < y.pixels(); ++p) {
        for (std::size_t o = 0; o < out; ++o) f.mean[o] += y.at(p, o);
      }
    }
    for (double& v : f.mean) v /= static_cast<double>(f.count);
    for (const FeatureMap& y : f.conv_out) {
      for (std::size_t p = 0; p < y.pixels(); ++p) {
        for (std::size_t o = 0; o < out; ++o) {
          const double d = y.at(p, o) - f.mean[o];
          f.var[o] += d * d;
        }
      }
    }
    for (double& v : f.var) v /= static_cast<double>(f.count);
  } else {
    f.mean = params.bn_running_mean;
    f.var = params.bn_running_var;
  }

  Vector inv_std(out);
  for (std::size_t o = 0; o < out; ++o) inv_std[o] = 1.0 / std::sqrt(f.var[o] + params.bn_eps);

  for (const FeatureMap& y : f.conv_out) {
    FeatureMap xhat(y.m(), out), z(y.m(), out), act(y.m(), out);
    for (std::size_t p = 0; p < y.pixels(); ++p) {
      for (std::size_t o = 0; o < out; ++o) {
        const double h = (y.at(p, o) - f.mean[o]) * inv_std[o];
        const double pre = params.bn_gamma[o] * h + params.bn_beta[o];
        xhat.at(p, o) = h;
        z.at(p, o) = pre;
        act.at(p, o) = pre >= 0.0 ? pre : params.prelu_slope * pre;
      }
    }
    f.normalized.push_back(std::move(xhat));
    f.pre_activation.push_back(std::move(z));
    f.output.push_back(std::move(act));
  }
  return f;
}

FeatureMap ScaleCalibrate(const FeatureMap& f, const CalibrationParams& params, BnMode mode,
                          std::span<const FeatureMap> batch) {
  CalibrationParams frozen = params;
  if (mode == BnMode::kTrain) {
    const CalibrationForward stats = CalibrateForward(batch, params, BnMode::kTrain);
    frozen.bn_running_mean = stats.mean;
    frozen.bn_running_var = stats.var;
  }
  return CalibrateForward(std::span(&f, 1), frozen, BnMode::kEval).output.front();
}

CalibrationGrads CalibrateBackward(std::span<const FeatureMap> batch,
                                   const CalibrationParams& params, const CalibrationForward& fwd,
                                   std::span<const FeatureMap> d_output) {
  const std::size_t in = params.in_channels();
  const std::size_t out = params.out_channels();
  if (d_output.size() != batch.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one output gradient per calibrated map");
  }
  CalibrationGrads g;
  g.conv_weight = Matrix(out, in);
  g.conv_bias.assign(out, 0.0);
  g.bn_gamma.assign(out, 0.0);
  g.bn_beta.assign(out, 0.0);

  // PReLU then the affine part of BN.
  std::vector<FeatureMap> d_xhat;
  d_xhat.reserve(batch.size());
  Vector sum_dxhat(out, 0.0), sum_dxhat_xhat(out, 0.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const FeatureMap& z = fwd.pre_activation[b];
    const FeatureMap& xhat = fwd.normalized[b];
    FeatureMap dx(z.m(), out);
    for (std::size_t p = 0; p < z.pixels(); ++p) {
      for (std::size_t o = 0; o < out; ++o) {
        const double dout = d_output[b].at(p, o);
        const double pre = z.at(p, o);
        double dz = dout;
        if (pre < 0.0) {
          g.prelu_slope += dout * pre;
          dz = dout * params.prelu_slope;
        }
        g.bn_beta[o] += dz;
        g.bn_gamma[o] += dz * xhat.at(p, o);
        const double dh = dz * params.bn_gamma[o];
        dx.at(p, o) = dh;
        sum_dxhat[o] += dh;
        sum_dxhat_xhat[o] += dh * xhat.at(p, o);
      }
    }
    d_xhat.push_back(std::move(dx));
  }

  Vector inv_std(out);
  for (std::size_t o = 0; o < out; ++o) {
    inv_std[o] = 1.0 / std::sqrt(fwd.var[o] + params.bn_eps);
  }
  const double count = static_cast<double>(fwd.count);

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const FeatureMap& x = batch[b];
    for (std::size_t p = 0; p < x.pixels(); ++p) {
      const auto xp = x.pixel(p);
      for (std::size_t o = 0; o < out; ++o) {
        double dy;
        if (fwd.mode == BnMode::kTrain) {
          dy = inv_std[o] / count *
               (count * d_xhat[b].at(p, o) - sum_dxhat[o] -
                fwd.normalized[b].at(p, o) * sum_dxhat_xhat[o]);
        } else {
          dy = d_xhat[b].at(p, o) * inv_std[o];
        }
        g.conv_bias[o] += dy;
        auto wrow = g.conv_weight.row(o);
        for (std::size_t c = 0; c < in; ++c) wrow[c] += dy * xp[c];
      }
    }
  }
  return g;
}

void UpdateRunningStats(CalibrationParams& params, const CalibrationForward& fwd) {
  if (fwd.mode != BnMode::kTrain) return;
  const double mom = params.bn_momentum;
  const double n = static_cast<double>(fwd.count);
  for (std::size_t o = 0; o < params.out_channels(); ++o) {
    const double unbiased = fwd.var[o] * n / (n - 1.0);
    params.bn_running_mean[o] = (1.0 - mom) * params.bn_running_mean[o] + mom * fwd.mean[o];
    params.bn_running_var[o] = (1.0 - mom) * params.bn_running_var[o] + mom * unbiased;
  }
}

FeatureMap ClassFeatureMap(std::span<const FeatureMap> support_maps) {
  return MeanMap(support_maps);
}

PixelMatch PixelSimilarityDetailed(const FeatureMap& query, const FeatureMap& class_map,
                                   const PixelSimilarityConfig& cfg) {
  if (!query.SameGeometry(class_map)) {
    throw Error(ErrorCode::kDimensionMismatch, "pixel similarity across mixed geometry");
  }
  const std::size_t pixels = query.pixels();
  if (cfg.k_top < 1 || cfg.k_top > pixels) {
    throw Error(ErrorCode::kOutOfRange, "k_top=" + std::to_string(cfg.k_top) + " with " +
                                            std::to_string(pixels) + " pixels per map");
  }
  PixelMatch match;
  match.cosines = Matrix(pixels, pixels);
  match.selected.resize(pixels);
  match.min_tie_gap = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t u = 0; u < pixels; ++u) {
    auto row = match.cosines.row(u);
    for (std::size_t v = 0; v < pixels; ++v) {
      row[v] = Cosine(query.pixel(u), class_map.pixel(v));
    }
    match.selected[u] = TopKIndices(row, cfg.k_top);
    double row_sum = 0.0;
    for (std::size_t v : match.selected[u]) row_sum += row[v];
    total += row_sum;
    if (cfg.k_top < pixels) {
      // Largest unselected value versus the k-th selected one.
      const double kth = row[match.selected[u].back()];
      double next = -std::numeric_limits<double>::infinity();
      std::vector<bool> taken(pixels, false);
      for (std::size_t v : match.selected[u]) taken[v] = true;
      for (std::size_t v = 0; v < pixels; ++v) {
        if (!taken[v]) next = std::max(next, row[v]);
      }
      match.min_tie_gap = std::min(match.min_tie_gap, kth - next);
    }
  }
  match.similarity = total / cfg.temperature;
  return match;
}

double PixelSimilarity(const FeatureMap& query, const FeatureMap& class_map,
                       const PixelSimilarityConfig& cfg) {
  return PixelSimilarityDetailed(query, class_map, cfg).similarity;
}

namespace {

// d cos(a, b) / da = b / (|a||b|) - cos * a / |a|^2, scaled by `weight`.
void AccumulateCosineGrad(std::span<const double> a, std::span<const double> b, double weight,
                          std::span<double> d_a) {
  const double na = Norm(a);
  const double nb = Norm(b);
  if (na == 0.0 || nb == 0.0) return;
  const double cos = Dot(a, b) / (na * nb);
  const double inv_ab = 1.0 / (na * nb);
  const double inv_aa = cos / (na * na);
  for (std::size_t c = 0; c < a.size(); ++c) {
    d_a[c] += weight * (b[c] * inv_ab - a[c] * inv_aa);
  }
}

}  // namespace

void PixelSimilarityBackward(const FeatureMap& query, const FeatureMap& class_map,
                             const PixelSimilarityConfig& cfg, const PixelMatch& match,
                             double d_similarity, FeatureMap& d_query, FeatureMap& d_class_map) {
  if (d_similarity == 0.0) return;
  const double w = d_similarity / cfg.temperature;
  for (std::size_t u = 0; u < match.selected.size(); ++u) {
    for (std::size_t v : match.selected[u]) {
      AccumulateCosineGrad(query.pixel(u), class_map.pixel(v), w, d_query.pixel(u));
      AccumulateCosineGrad(class_map.pixel(v), query.pixel(u), w, d_class_map.pixel(v));
    }
  }
}

Vector PixelSimilarityAll(const FeatureMap& query, std::span<const FeatureMap> class_maps,
                          const PixelSimilarityConfig& cfg) {
  Vector s;
  s.reserve(class_maps.size());
  for (const FeatureMap& c : class_maps) s.push_back(PixelSimilarity(query, c, cfg));
  return s;
}

}  // namespace gel
