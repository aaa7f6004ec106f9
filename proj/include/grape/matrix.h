// Copyright 2026 The grape-dp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef GRAPE_MATRIX_H_
#define GRAPE_MATRIX_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "grape/rng.h"

namespace grape {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix FromRows(std::initializer_list<std::initializer_list<double>>);
  static Matrix Identity(std::size_t n);
  static Matrix Diagonal(std::span<const double> values);
  // Column vector (n x 1).
  static Matrix Column(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t i) {
    return std::span<double>(data_).subspan(i * cols_, cols_);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * cols_, cols_);
  }

  bool SameShape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string ShapeString() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double scale);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double scale, Matrix a);

// A * B.
Matrix MatMul(const Matrix& a, const Matrix& b);
// A^T * B.
Matrix MatMulTN(const Matrix& a, const Matrix& b);
// A * B^T.
Matrix MatMulNT(const Matrix& a, const Matrix& b);
Matrix Transpose(const Matrix& a);
// u v^T.
Matrix Outer(std::span<const double> u, std::span<const double> v);
// Gathers the given columns, in order.
Matrix SelectColumns(const Matrix& a, std::span<const std::size_t> columns);

double Dot(std::span<const double> a, std::span<const double> b);
double Norm2(std::span<const double> v);
double FrobeniusNorm(const Matrix& a);
double MaxAbs(const Matrix& a);
double MaxAbsDiff(const Matrix& a, const Matrix& b);
double MaxAbsDiff(std::span<const double> a, std::span<const double> b);
bool AllFinite(std::span<const double> v);

void Axpy(double alpha, std::span<const double> x, std::span<double> y);
void Scale(double alpha, std::span<double> x);

// Concatenates spans end to end.
std::vector<double> Concatenate(
    std::initializer_list<std::span<const double>> parts);

// m x r matrix with i.i.d. N(0, variance) entries drawn row-major from a
// copy of `stream`. Pure in (stream, m, r, variance).
Matrix GaussianMatrix(RngStream stream, std::size_t m, std::size_t r,
                      double variance);

}  // namespace grape

#endif  // GRAPE_MATRIX_H_
