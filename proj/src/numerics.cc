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

#include "gel/numerics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gel/error.h"

namespace gel {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid argument";
    case ErrorCode::kDimensionMismatch:
      return "dimension mismatch";
    case ErrorCode::kOutOfRange:
      return "out of range";
    case ErrorCode::kInsufficientData:
      return "insufficient data";
    case ErrorCode::kNonFinite:
      return "non-finite value";
    case ErrorCode::kIo:
      return "i/o error";
    case ErrorCode::kBadMagic:
      return "bad magic";
    case ErrorCode::kVersionMismatch:
      return "version mismatch";
    case ErrorCode::kTruncated:
      return "truncated file";
    case ErrorCode::kGeometryMismatch:
      return "geometry mismatch";
  }
  return "unknown error";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    std::ostringstream msg;
    msg << "matrix " << rows_ << "x" << cols_ << " given " << data_.size() << " values";
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::FromRows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  const std::size_t cols = rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw Error(ErrorCode::kDimensionMismatch, "ragged rows in FromRows");
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::Transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

std::string Matrix::ShapeString() const {
  std::ostringstream s;
  s << rows_ << "x" << cols_;
  return s.str();
}

namespace {

[[noreturn]] void ThrowShape(const char* op, const Matrix& a, const Matrix& b) {
  throw Error(ErrorCode::kDimensionMismatch,
              std::string(op) + ": " + a.ShapeString() + " vs " + b.ShapeString());
}

}  // namespace

Matrix MatMul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) ThrowShape("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix MatMulTransA(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) ThrowShape("matmul_trans_a", a, b);
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

Matrix MatMulTransB(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) ThrowShape("matmul_trans_b", a, b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = Dot(a.row(i), b.row(j));
  }
  return out;
}

Vector Softmax(std::span<const double> v) {
  Vector out(v.size());
  if (v.empty()) return out;
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

Matrix SoftmaxRows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const Vector row = Softmax(m.row(r));
    std::copy(row.begin(), row.end(), out.row(r).begin());
  }
  return out;
}

double LogSumExp(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::kInvalidArgument, "logsumexp of empty vector");
  const auto top = std::max_element(v.begin(), v.end());
  const double mx = *top;
  if (std::isinf(mx)) return mx;
  // The max term contributes exactly 1; log1p keeps the remainder precise.
  double rest = 0.0;
  for (auto it = v.begin(); it != v.end(); ++it) {
    if (it != top) rest += std::exp(*it - mx);
  }
  return mx + std::log1p(rest);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "dot: lengths " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Norm(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

double Cosine(std::span<const double> a, std::span<const double> b) {
  const double na = Norm(a);
  const double nb = Norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(Dot(a, b) / (na * nb), -1.0, 1.0);
}

std::vector<std::size_t> TopKIndices(std::span<const double> v, std::size_t k) {
  if (k < 1 || k > v.size()) {
    throw Error(ErrorCode::kOutOfRange, "top-k with k=" + std::to_string(k) + " over " +
                                            std::to_string(v.size()) + " values");
  }
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](std::size_t a, std::size_t b) {
    return v[a] > v[b] || (v[a] == v[b] && a < b);
  });
  idx.resize(k);
  return idx;
}

double TopKSum(std::span<const double> v, std::size_t k) {
  double s = 0.0;
  for (std::size_t i : TopKIndices(v, k)) s += v[i];
  return s;
}

bool AllFinite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace gel
