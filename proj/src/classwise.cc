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

#include "gel/classwise.h"

#include <cmath>
#include <string>

#include "gel/error.h"

namespace gel {

AttentionParams AttentionParams::NearIdentity(std::size_t dim, Rng& rng, double noise_scale) {
  AttentionParams att = Zeros(dim);
  for (Matrix* w : {&att.w_q, &att.w_k, &att.w_v}) {
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        (*w)(i, j) = (i == j ? 1.0 : 0.0) + noise_scale * rng.Normal();
      }
    }
  }
  return att;
}

AttentionParams AttentionParams::Zeros(std::size_t dim) {
  return {Matrix(dim, dim), Matrix(dim, dim), Matrix(dim, dim)};
}

Matrix ComputePrototypes(std::span<const FeatureMap> support, std::span<const int> labels,
                         int n_way) {
  if (support.size() != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "support/label count mismatch");
  }
  if (support.empty()) throw Error(ErrorCode::kInvalidArgument, "empty support set");
  const std::size_t dim = support.front().dim();
  Matrix protos(static_cast<std::size_t>(n_way), dim);
  std::vector<int> counts(static_cast<std::size_t>(n_way), 0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    const int label = labels[i];
    if (label < 0 || label >= n_way) {
      throw Error(ErrorCode::kOutOfRange, "support label " + std::to_string(label));
    }
    const Vector e = AvgPool(support[i]);
    auto row = protos.row(static_cast<std::size_t>(label));
    for (std::size_t c = 0; c < dim; ++c) row[c] += e[c];
    ++counts[static_cast<std::size_t>(label)];
  }
  for (std::size_t n = 0; n < protos.rows(); ++n) {
    if (counts[n] == 0) {
      throw Error(ErrorCode::kInsufficientData, "class " + std::to_string(n) + " has no support");
    }
    for (double& x : protos.row(n)) x /= counts[n];
  }
  return protos;
}

AttentionForward EnhancePrototypesForward(const Matrix& prototypes, const AttentionParams& att) {
  AttentionForward f;
  f.queries = MatMul(prototypes, att.w_q);
  f.keys = MatMul(prototypes, att.w_k);
  f.values = MatMul(prototypes, att.w_v);
  Matrix logits = MatMulTransB(f.queries, f.keys);
  const double scale = 1.0 / std::sqrt(static_cast<double>(f.keys.cols()));
  for (double& x : logits.values()) x *= scale;
  f.weights = SoftmaxRows(logits);
  f.enhanced = MatMul(f.weights, f.values);
  return f;
}

Matrix EnhancePrototypes(const Matrix& prototypes, const AttentionParams& att) {
  return EnhancePrototypesForward(prototypes, att).enhanced;
}

AttentionParams EnhancePrototypesBackward(const Matrix& prototypes, const AttentionForward& fwd,
                                          const Matrix& d_enhanced) {
  // P* = A V with A = softmax(S), S = Q K^T / sqrt(d).
  const Matrix d_weights = MatMulTransB(d_enhanced, fwd.values);
  const Matrix d_values = MatMulTransA(fwd.weights, d_enhanced);

  const double scale = 1.0 / std::sqrt(static_cast<double>(fwd.keys.cols()));
  Matrix d_logits(fwd.weights.rows(), fwd.weights.cols());
  for (std::size_t i = 0; i < d_logits.rows(); ++i) {
    const double inner = Dot(d_weights.row(i), fwd.weights.row(i));
    for (std::size_t j = 0; j < d_logits.cols(); ++j) {
      d_logits(i, j) = fwd.weights(i, j) * (d_weights(i, j) - inner) * scale;
    }
  }
  const Matrix d_queries = MatMul(d_logits, fwd.keys);
  const Matrix d_keys = MatMulTransA(d_logits, fwd.queries);

  return {MatMulTransA(prototypes, d_queries), MatMulTransA(prototypes, d_keys),
          MatMulTransA(prototypes, d_values)};
}

Vector ClassSimilarity(std::span<const double> query_emb, const Matrix& p_star, DistanceKind kind) {
  if (query_emb.size() != p_star.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "query embedding of length " +
                                                   std::to_string(query_emb.size()) +
                                                   " vs prototypes " + p_star.ShapeString());
  }
  Vector s(p_star.rows());
  for (std::size_t n = 0; n < p_star.rows(); ++n) {
    const auto p = p_star.row(n);
    double sq = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double d = query_emb[c] - p[c];
      sq += d * d;
    }
    s[n] = kind == DistanceKind::kSquaredEuclidean ? -sq : -std::sqrt(sq);
  }
  return s;
}

void ClassSimilarityBackward(std::span<const double> query_emb, const Matrix& p_star,
                             DistanceKind kind, std::span<const double> d_sim, Matrix& d_p_star) {
  for (std::size_t n = 0; n < p_star.rows(); ++n) {
    if (d_sim[n] == 0.0) continue;
    const auto p = p_star.row(n);
    auto dp = d_p_star.row(n);
    // d(-|e - p|^2)/dp = 2 (e - p);  d(-|e - p|)/dp = (e - p) / |e - p|.
    double factor = 2.0;
    if (kind == DistanceKind::kEuclidean) {
      double sq = 0.0;
      for (std::size_t c = 0; c < p.size(); ++c) {
        const double d = query_emb[c] - p[c];
        sq += d * d;
      }
      if (sq == 0.0) continue;
      factor = 1.0 / std::sqrt(sq);
    }
    for (std::size_t c = 0; c < p.size(); ++c) {
      dp[c] += d_sim[n] * factor * (query_emb[c] - p[c]);
    }
  }
}

Vector ClosedSetProbs(std::span<const double> s_c) { return Softmax(s_c); }

CrossEntropyResult CrossEntropyLoss(const Matrix& prototypes, const AttentionParams& att,
                                    const Matrix& query_emb, std::span<const int> labels,
                                    DistanceKind kind) {
  if (query_emb.rows() != labels.size() || labels.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "cross entropy needs one label per query");
  }
  const AttentionForward fwd = EnhancePrototypesForward(prototypes, att);
  const std::size_t n_way = prototypes.rows();
  const double inv = 1.0 / static_cast<double>(labels.size());

  CrossEntropyResult out;
  out.probs = Matrix(labels.size(), n_way);
  Matrix d_p_star(n_way, prototypes.cols());
  Vector d_sim(n_way);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Vector s = ClassSimilarity(query_emb.row(i), fwd.enhanced, kind);
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    out.loss -= (s[y] - LogSumExp(s)) * inv;
    const Vector p = Softmax(s);
    for (std::size_t n = 0; n < n_way; ++n) {
      out.probs(i, n) = p[n];
      d_sim[n] = (p[n] - (n == y ? 1.0 : 0.0)) * inv;
    }
    ClassSimilarityBackward(query_emb.row(i), fwd.enhanced, kind, d_sim, d_p_star);
  }
  out.grad = EnhancePrototypesBackward(prototypes, fwd, d_p_star);
  return out;
}

}  // namespace gel
