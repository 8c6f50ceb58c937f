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

#include "gel/episode.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.h"
#include "gel/error.h"

namespace gel {

FeatureMap::FeatureMap(std::size_t m, std::size_t dim, std::vector<double> data)
    : m_(m), dim_(dim), data_(std::move(data)) {
  if (data_.size() != m_ * m_ * dim_) {
    std::ostringstream msg;
    msg << "feature map " << m_ << "x" << m_ << "x" << dim_ << " given " << data_.size()
        << " values";
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
}

Vector AvgPool(const FeatureMap& f) {
  Vector out(f.dim(), 0.0);
  for (std::size_t p = 0; p < f.pixels(); ++p) {
    const auto px = f.pixel(p);
    for (std::size_t c = 0; c < f.dim(); ++c) out[c] += px[c];
  }
  const double inv = 1.0 / static_cast<double>(f.pixels());
  for (double& x : out) x *= inv;
  return out;
}

FeatureMap MeanMap(std::span<const FeatureMap> maps) {
  if (maps.empty()) throw Error(ErrorCode::kInvalidArgument, "mean of zero maps");
  FeatureMap out(maps.front().m(), maps.front().dim());
  for (const FeatureMap& f : maps) {
    if (!f.SameGeometry(out)) {
      throw Error(ErrorCode::kDimensionMismatch, "mean of maps with mixed geometry");
    }
    auto dst = out.values();
    auto src = f.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const double inv = 1.0 / static_cast<double>(maps.size());
  for (double& x : out.values()) x *= inv;
  return out;
}

std::size_t Episode::m() const { return support.empty() ? 0 : support.front().m(); }

std::size_t Episode::dim() const { return support.empty() ? 0 : support.front().dim(); }

std::pair<std::size_t, std::size_t> BankGeometry(const Bank& bank) {
  const FeatureMap* first = nullptr;
  for (const ClassBank& cls : bank) {
    for (const FeatureMap& f : cls.samples) {
      if (first == nullptr) {
        first = &f;
      } else if (!f.SameGeometry(*first)) {
        std::ostringstream msg;
        msg << "class " << cls.class_id << " has a " << f.m() << "x" << f.m() << "x" << f.dim()
            << " sample; expected " << first->m() << "x" << first->m() << "x" << first->dim();
        throw Error(ErrorCode::kGeometryMismatch, msg.str());
      }
    }
  }
  if (first == nullptr) return {0, 0};
  return {first->m(), first->dim()};
}

Episode SampleEpisode(const Bank& bank, int n_way, int k_shot, int q_query, Rng& rng) {
  if (n_way < 1 || k_shot < 1 || q_query < 1) {
    throw Error(ErrorCode::kInvalidArgument, "episode needs N, K, Q >= 1");
  }
  const std::size_t n = static_cast<std::size_t>(n_way);
  const std::size_t k = static_cast<std::size_t>(k_shot);
  const std::size_t q = static_cast<std::size_t>(q_query);

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    if (bank[i].samples.size() >= k + q) eligible.push_back(i);
  }
  if (eligible.size() < 2 * n) {
    std::ostringstream msg;
    msg << "need " << 2 * n << " classes with >= " << k + q << " samples each, found "
        << eligible.size() << " (short by " << 2 * n - eligible.size() << ")";
    throw Error(ErrorCode::kInsufficientData, msg.str());
  }
  BankGeometry(bank);

  Episode ep;
  ep.n_way = n_way;
  ep.k_shot = k_shot;
  ep.q_query = q_query;

  const std::vector<std::size_t> picks = rng.SampleWithoutReplacement(eligible.size(), 2 * n);
  for (std::size_t c = 0; c < 2 * n; ++c) {
    const std::size_t bi = eligible[picks[c]];
    const ClassBank& cls = bank[bi];
    const bool known = c < n;
    const std::size_t take = known ? k + q : q;
    const std::vector<std::size_t> draw = rng.SampleWithoutReplacement(cls.samples.size(), take);
    if (known) {
      ep.known_class_ids.push_back(cls.class_id);
      for (std::size_t j = 0; j < k; ++j) {
        ep.support.push_back(cls.samples[draw[j]]);
        ep.support_labels.push_back(static_cast<int>(c));
        ep.support_refs.push_back({bi, draw[j]});
      }
      for (std::size_t j = k; j < take; ++j) {
        ep.known_queries.push_back(cls.samples[draw[j]]);
        ep.known_labels.push_back(static_cast<int>(c));
        ep.known_refs.push_back({bi, draw[j]});
      }
    } else {
      ep.unknown_class_ids.push_back(cls.class_id);
      for (std::size_t j = 0; j < take; ++j) {
        ep.unknown_queries.push_back(cls.samples[draw[j]]);
        ep.unknown_refs.push_back({bi, draw[j]});
      }
    }
  }
  return ep;
}

namespace {

Vector RandomUnit(std::size_t dim, Rng& rng) {
  Vector v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : v) x = rng.Normal();
    norm = Norm(v);
  }
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

Bank GenerateSynthetic(const SyntheticSpec& spec, Rng& rng) {
  if (spec.n_classes < 0 || spec.samples_per_class < 0 || spec.m < 1 || spec.dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic spec has non-positive geometry");
  }
  if (spec.cluster_separation < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "cluster separation must be >= 0");
  }
  const std::size_t m = static_cast<std::size_t>(spec.m);
  const std::size_t dim = static_cast<std::size_t>(spec.dim);
  const std::size_t pixels = m * m;

  Bank bank;
  bank.reserve(static_cast<std::size_t>(spec.n_classes));
  for (int c = 0; c < spec.n_classes; ++c) {
    ClassBank cls;
    cls.class_id = static_cast<std::uint32_t>(c);
    Vector mean = RandomUnit(dim, rng);
    for (double& x : mean) x *= spec.cluster_separation;
    const Vector patch_dir = RandomUnit(dim, rng);
    const std::size_t patch_pixel = static_cast<std::size_t>(rng.UniformInt(pixels));

    for (int s = 0; s < spec.samples_per_class; ++s) {
      FeatureMap f(m, dim);
      for (std::size_t p = 0; p < pixels; ++p) {
        auto px = f.pixel(p);
        for (std::size_t ch = 0; ch < dim; ++ch) px[ch] = mean[ch] + rng.Normal();
        if (spec.local_patch && p == patch_pixel) {
          for (std::size_t ch = 0; ch < dim; ++ch) {
            px[ch] += spec.patch_strength * patch_dir[ch];
          }
        }
      }
      cls.samples.push_back(std::move(f));
    }
    bank.push_back(std::move(cls));
  }
  return bank;
}

void SaveBank(const Bank& bank, const std::string& path) {
  BankGeometry(bank);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.write("GELB", 4);
  internal::PutU32(out, kBankFormatVersion);
  internal::PutU32(out, static_cast<std::uint32_t>(bank.size()));
  for (const ClassBank& cls : bank) {
    const std::size_t m = cls.samples.empty() ? 0 : cls.samples.front().m();
    const std::size_t dim = cls.samples.empty() ? 0 : cls.samples.front().dim();
    internal::PutU32(out, cls.class_id);
    internal::PutU32(out, static_cast<std::uint32_t>(cls.samples.size()));
    internal::PutU32(out, static_cast<std::uint32_t>(m));
    internal::PutU32(out, static_cast<std::uint32_t>(dim));
    for (const FeatureMap& f : cls.samples) {
      for (double x : f.values()) internal::PutF32(out, static_cast<float>(x));
    }
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

Bank LoadBank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  internal::LeReader r(in, path);
  r.ExpectMagic("GELB");
  const std::uint32_t version = r.U32("version");
  if (version != kBankFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch, path + ": GELB version " + std::to_string(version) +
                                                 ", this build reads version " +
                                                 std::to_string(kBankFormatVersion));
  }
  const std::uint32_t n_classes = r.U32("class count");
  Bank bank;
  bank.reserve(n_classes);
  for (std::uint32_t c = 0; c < n_classes; ++c) {
    ClassBank cls;
    cls.class_id = r.U32("class id");
    const std::uint32_t n_samples = r.U32("sample count");
    const std::uint32_t m = r.U32("m");
    const std::uint32_t dim = r.U32("dim");
    const std::size_t per = static_cast<std::size_t>(m) * m * dim;
    cls.samples.reserve(n_samples);
    for (std::uint32_t s = 0; s < n_samples; ++s) {
      std::vector<double> data(per);
      for (double& x : data) x = r.F32("sample payload");
      if (!AllFinite(data)) {
        throw Error(ErrorCode::kNonFinite,
                    path + ": class " + std::to_string(cls.class_id) + " holds a non-finite value");
      }
      cls.samples.emplace_back(m, dim, std::move(data));
    }
    bank.push_back(std::move(cls));
  }
  BankGeometry(bank);
  return bank;
}

BankSplit SplitBank(const Bank& bank, std::size_t n_train, std::size_t n_validation) {
  if (n_train + n_validation > bank.size()) {
    throw Error(ErrorCode::kInsufficientData,
                "split asks for " + std::to_string(n_train + n_validation) +
                    " classes but the bank has " + std::to_string(bank.size()));
  }
  BankSplit split;
  split.train.assign(bank.begin(), bank.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(bank.begin() + static_cast<std::ptrdiff_t>(n_train),
                          bank.begin() + static_cast<std::ptrdiff_t>(n_train + n_validation));
  split.test.assign(bank.begin() + static_cast<std::ptrdiff_t>(n_train + n_validation), bank.end());
  return split;
}

}  // namespace gel
