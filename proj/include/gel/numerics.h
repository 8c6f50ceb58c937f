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

// Dense 64-bit linear algebra used by every other module. Row-major storage,
// no expression templates; geometry in this project is tiny.

#ifndef GEL_NUMERICS_H_
#define GEL_NUMERICS_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gel {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix Identity(std::size_t n);
  // Builds from nested rows; all rows must share a length.
  static Matrix FromRows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  Matrix Transpose() const;
  std::string ShapeString() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws kDimensionMismatch naming both shapes when a.cols != b.rows.
Matrix MatMul(const Matrix& a, const Matrix& b);
// a^T * b without materializing the transpose.
Matrix MatMulTransA(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix MatMulTransB(const Matrix& a, const Matrix& b);

Matrix SoftmaxRows(const Matrix& m);
Vector Softmax(std::span<const double> v);

// max(v) + log(sum(exp(v - max(v)))). Throws kInvalidArgument on empty input.
double LogSumExp(std::span<const double> v);

double Dot(std::span<const double> a, std::span<const double> b);
double Norm(std::span<const double> v);

// Cosine similarity. A zero-norm operand yields 0 instead of NaN.
double Cosine(std::span<const double> a, std::span<const double> b);

// Sum of the k largest entries. Throws kOutOfRange unless 1 <= k <= v.size().
double TopKSum(std::span<const double> v, std::size_t k);

// Indices of the k largest entries, in descending value order. Ties keep the
// lower index first (stable descending sort).
std::vector<std::size_t> TopKIndices(std::span<const double> v, std::size_t k);

bool AllFinite(std::span<const double> v);

}  // namespace gel

#endif  // GEL_NUMERICS_H_
