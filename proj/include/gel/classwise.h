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

// Class-wise (global) branch: prototypes, self-attention enhancement,
// negative-distance similarity, closed-set softmax and cross entropy.
// Backward passes are written out by hand; support embeddings are constants.

#ifndef GEL_CLASSWISE_H_
#define GEL_CLASSWISE_H_

#include <span>

#include "gel/feature_map.h"
#include "gel/numerics.h"
#include "gel/random.h"

namespace gel {

enum class DistanceKind { kSquaredEuclidean, kEuclidean };

struct AttentionParams {
  Matrix w_q;
  Matrix w_k;
  Matrix w_v;

  // I + noise_scale * N(0, 1) for each of the three matrices.
  static AttentionParams NearIdentity(std::size_t dim, Rng& rng, double noise_scale = 0.01);
  static AttentionParams Zeros(std::size_t dim);

  std::size_t dim() const { return w_q.rows(); }
  bool operator==(const AttentionParams&) const = default;
};

// Row n is the mean of the pooled embeddings of the support maps labeled n.
Matrix ComputePrototypes(std::span<const FeatureMap> support, std::span<const int> labels,
                         int n_way);

// Intermediates of P* = softmax(P Wq (P Wk)^T / sqrt(dim)) (P Wv).
struct AttentionForward {
  Matrix queries;
  Matrix keys;
  Matrix values;
  Matrix weights;
  Matrix enhanced;
};

AttentionForward EnhancePrototypesForward(const Matrix& prototypes, const AttentionParams& att);
Matrix EnhancePrototypes(const Matrix& prototypes, const AttentionParams& att);

// Gradients of a scalar with respect to Wq, Wk, Wv given dL/dP*.
AttentionParams EnhancePrototypesBackward(const Matrix& prototypes, const AttentionForward& fwd,
                                          const Matrix& d_enhanced);

// s_c[n] = -distance(query, p*_n). Higher is more similar.
Vector ClassSimilarity(std::span<const double> query_emb, const Matrix& p_star, DistanceKind kind);

// Accumulates dL/dP* into d_p_star given dL/ds_c for one query.
void ClassSimilarityBackward(std::span<const double> query_emb, const Matrix& p_star,
                             DistanceKind kind, std::span<const double> d_sim, Matrix& d_p_star);

Vector ClosedSetProbs(std::span<const double> s_c);

struct CrossEntropyResult {
  double loss = 0.0;
  AttentionParams grad;
  // Row i: closed-set probabilities of query i.
  Matrix probs;
};

// Mean of -log p(label) over the labeled queries, with gradients w.r.t. the
// attention parameters (prototypes depend on them, embeddings do not).
CrossEntropyResult CrossEntropyLoss(const Matrix& prototypes, const AttentionParams& att,
                                    const Matrix& query_emb, std::span<const int> labels,
                                    DistanceKind kind);

}  // namespace gel

#endif  // GEL_CLASSWISE_H_
