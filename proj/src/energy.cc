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

#include "gel/energy.h"

#include <algorithm>
#include <string>

#include "gel/error.h"

namespace gel {

std::string_view CombineVariantName(CombineVariant v) {
  switch (v) {
    case CombineVariant::kFixed:
      return "fixed";
    case CombineVariant::kLearnable:
      return "learnable";
    case CombineVariant::kTaskAdaptive:
      return "task-adaptive";
    case CombineVariant::kGlobalOnly:
      return "global-only";
    case CombineVariant::kDelay:
      return "delay";
  }
  return "?";
}

CombineVariant ParseCombineVariant(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '_', '-');
  for (CombineVariant v :
       {CombineVariant::kFixed, CombineVariant::kLearnable, CombineVariant::kTaskAdaptive,
        CombineVariant::kGlobalOnly, CombineVariant::kDelay}) {
    if (s == CombineVariantName(v)) return v;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown combine strategy '" + std::string(name) + "'");
}

CombineStrategy CombineStrategy::Make(CombineVariant variant, std::size_t dim) {
  CombineStrategy s;
  s.variant = variant;
  if (variant == CombineVariant::kTaskAdaptive) {
    s.adaptor_weight = Matrix(2, dim);
    s.adaptor_bias = {1.0, 1.0};
  }
  return s;
}

double GlobalEnergy(std::span<const double> s_c) { return -LogSumExp(s_c); }

double LocalEnergy(std::span<const double> s_f) { return -LogSumExp(s_f); }

Coefficients ResolveCoefficients(const CombineStrategy& strat, const Matrix& p_star) {
  switch (strat.variant) {
    case CombineVariant::kFixed:
      if (strat.alpha != 1.0 || strat.beta != 1.0) {
        throw Error(ErrorCode::kInvalidArgument, "fixed combine requires alpha = beta = 1");
      }
      return {1.0, 1.0};
    case CombineVariant::kLearnable:
      return {strat.alpha, strat.beta};
    case CombineVariant::kTaskAdaptive: {
      if (strat.adaptor_weight.rows() != 2 || strat.adaptor_weight.cols() != p_star.cols() ||
          strat.adaptor_bias.size() != 2 || p_star.rows() == 0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "task-adaptive adaptor " + strat.adaptor_weight.ShapeString() +
                        " does not fit prototypes " + p_star.ShapeString());
      }
      Vector mean(p_star.cols(), 0.0);
      for (std::size_t n = 0; n < p_star.rows(); ++n) {
        for (std::size_t c = 0; c < p_star.cols(); ++c) mean[c] += p_star(n, c);
      }
      for (double& x : mean) x /= static_cast<double>(p_star.rows());
      return {Dot(strat.adaptor_weight.row(0), mean) + strat.adaptor_bias[0],
              Dot(strat.adaptor_weight.row(1), mean) + strat.adaptor_bias[1]};
    }
    case CombineVariant::kGlobalOnly:
      return {1.0, 0.0};
    case CombineVariant::kDelay:
      return {1.0, -1.0};
  }
  return {};
}

double Combine(double e_global, double e_local, std::span<const double> s_c,
               std::span<const double> s_f, const CombineStrategy& strat, const Matrix& p_star) {
  (void)s_f;
  switch (strat.variant) {
    case CombineVariant::kGlobalOnly:
      return e_global;
    case CombineVariant::kDelay: {
      Vector shifted(s_c.begin(), s_c.end());
      for (double& x : shifted) x += e_local;
      return -LogSumExp(shifted);
    }
    default: {
      const Coefficients c = ResolveCoefficients(strat, p_star);
      return c.alpha * e_global + c.beta * e_local;
    }
  }
}

CombinePartials CombineBackward(double e_global, double e_local, const CombineStrategy& strat,
                                const Coefficients& coeffs) {
  switch (strat.variant) {
    case CombineVariant::kGlobalOnly:
      return {1.0, 0.0, 0.0, 0.0};
    case CombineVariant::kDelay:
      // -lse(s_c + E_f) = E_c - E_f.
      return {1.0, -1.0, 0.0, 0.0};
    case CombineVariant::kFixed:
      return {1.0, 1.0, 0.0, 0.0};
    default:
      return {coeffs.alpha, coeffs.beta, e_global, e_local};
  }
}

MarginLossResult MarginEnergyLoss(std::span<const double> known_energies,
                                  std::span<const double> unknown_energies, const MarginConfig& cfg,
                                  HingeKind hinge) {
  if (known_energies.empty() || unknown_energies.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "margin energy loss needs known and unknown queries (got " +
                    std::to_string(known_energies.size()) + " / " +
                    std::to_string(unknown_energies.size()) + ")");
  }
  if (!(cfg.m_known < cfg.m_unknown)) {
    throw Error(ErrorCode::kInvalidArgument, "known margin must be below the unknown margin");
  }
  MarginLossResult r;
  r.d_known.resize(known_energies.size());
  r.d_unknown.resize(unknown_energies.size());

  auto group = [&](std::span<const double> energies, double sign, double margin, Vector& grad) {
    const double inv = 1.0 / static_cast<double>(energies.size());
    double total = 0.0;
    for (std::size_t i = 0; i < energies.size(); ++i) {
      const double excess = sign * (energies[i] - margin);
      if (excess <= 0.0) {
        grad[i] = 0.0;
        continue;
      }
      if (hinge == HingeKind::kSquared) {
        total += excess * excess;
        grad[i] = 2.0 * excess * sign * inv;
      } else {
        total += excess;
        grad[i] = sign * inv;
      }
    }
    return total * inv;
  };
  r.loss = group(known_energies, 1.0, cfg.m_known, r.d_known) +
           group(unknown_energies, -1.0, cfg.m_unknown, r.d_unknown);
  return r;
}

double TotalLoss(double closed_set_loss, double energy_loss, double lambda) {
  return closed_set_loss + lambda * energy_loss;
}

}  // namespace gel
