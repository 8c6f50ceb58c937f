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

// Energy-based open-set scoring. Energies are negative log-sum-exp of
// similarities, so a higher energy means a more likely open-set sample.

#ifndef GEL_ENERGY_H_
#define GEL_ENERGY_H_

#include <span>
#include <string>
#include <string_view>

#include "gel/numerics.h"

namespace gel {

struct EnergyBreakdown {
  double e_global = 0.0;
  double e_local = 0.0;
  double e_total = 0.0;
};

struct MarginConfig {
  double m_known = -1.0;
  double m_unknown = 1.0;
  double lambda = 0.1;
};

enum class HingeKind { kSquared, kLinear };

enum class CombineVariant { kFixed, kLearnable, kTaskAdaptive, kGlobalOnly, kDelay };

std::string_view CombineVariantName(CombineVariant v);
// Accepts "fixed", "learnable", "task-adaptive", "global-only", "delay"
// (underscores are accepted in place of hyphens).
CombineVariant ParseCombineVariant(std::string_view name);

struct CombineStrategy {
  CombineVariant variant = CombineVariant::kFixed;
  // Coefficients on E_c and E_f; trainable for kLearnable, pinned to 1 for kFixed.
  double alpha = 1.0;
  double beta = 1.0;
  // kTaskAdaptive: (alpha, beta) = adaptor_weight * mean(P* rows) + adaptor_bias.
  // 2 x dim, zero-initialized with bias (1, 1) so it starts as the fixed sum.
  Matrix adaptor_weight;
  Vector adaptor_bias;

  static CombineStrategy Make(CombineVariant variant, std::size_t dim);
  bool operator==(const CombineStrategy&) const = default;
};

// E_c = -logsumexp(s_c).
double GlobalEnergy(std::span<const double> s_c);
// E_f = -logsumexp(s_f).
double LocalEnergy(std::span<const double> s_f);

struct Coefficients {
  double alpha = 1.0;
  double beta = 1.0;
};

// Effective (alpha, beta) for the strategy; p_star is only read by
// kTaskAdaptive. Throws kInvalidArgument on inconsistent strategy state.
Coefficients ResolveCoefficients(const CombineStrategy& strat, const Matrix& p_star);

// fixed / learnable / task-adaptive: alpha * E_c + beta * E_f.
// global-only: E_c.
// delay: -logsumexp over classes of (s_c + E_f), i.e. the pixel energy is
// formed first and folded into the class-wise similarities.
double Combine(double e_global, double e_local, std::span<const double> s_c,
               std::span<const double> s_f, const CombineStrategy& strat, const Matrix& p_star);

struct CombinePartials {
  double d_global = 0.0;  // dE/dE_c
  double d_local = 0.0;   // dE/dE_f
  double d_alpha = 0.0;   // dE/dalpha
  double d_beta = 0.0;    // dE/dbeta
};

CombinePartials CombineBackward(double e_global, double e_local, const CombineStrategy& strat,
                                const Coefficients& coeffs);

struct MarginLossResult {
  double loss = 0.0;
  Vector d_known;
  Vector d_unknown;
};

// mean_known h(E - M_k) + mean_unknown h(M_u - E) with h(x) = relu(x)^2
// (squared) or relu(x) (linear). Throws kInvalidArgument if a group is empty.
MarginLossResult MarginEnergyLoss(std::span<const double> known_energies,
                                  std::span<const double> unknown_energies, const MarginConfig& cfg,
                                  HingeKind hinge = HingeKind::kSquared);

double TotalLoss(double closed_set_loss, double energy_loss, double lambda);

}  // namespace gel

#endif  // GEL_ENERGY_H_
