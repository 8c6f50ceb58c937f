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

#ifndef GEL_RANDOM_H_
#define GEL_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gel {

// SplitMix64 used as a counter-based generator: the n-th output is
// Mix(seed + n * 0x9E3779B97F4A7C15), where Mix is Stafford's variant 13
// finalizer. Every derived quantity (uniform reals, integers, normals) is
// produced by fixed algorithms defined here, never by <random> distributions,
// whose outputs differ across standard library implementations.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t NextU64();
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  // Uniform integer in [0, n) by rejection; n must be positive.
  std::uint64_t UniformInt(std::uint64_t n);
  // Standard normal by Box-Muller; consumes exactly two outputs per call.
  double Normal();

  // Fisher-Yates prefix: k distinct indices from [0, n), uniformly.
  std::vector<std::size_t> SampleWithoutReplacement(std::size_t n, std::size_t k);

  // Independent stream derived from this generator's seed and a label, without
  // advancing this generator.
  Rng Fork(std::uint64_t label) const;

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

std::uint64_t Mix64(std::uint64_t z);

}  // namespace gel

#endif  // GEL_RANDOM_H_
